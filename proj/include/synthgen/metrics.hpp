#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthgen/tensor.hpp"

namespace synthgen::metrics {

// K x K pixel counts, rows = ground truth, cols = prediction. Ignore pixels
// never enter, so total() is the number of evaluated pixels.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k);

    std::size_t class_count() const { return k_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
    std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts_[gt * k_ + pred]; }
    std::uint64_t total() const;

    // Accumulates one prediction/ground-truth pair. Throws if shapes differ
    // or any non-ignore value is >= K.
    void update(const LabelMap& pred, const LabelMap& gt);

    // Elementwise addition; shards evaluated in parallel reduce with this.
    void merge(const ConfusionMatrix& other);

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

// IoU_k = TP / (TP + FP + FN). Classes absent from both prediction and
// ground truth get NaN here and are excluded from the mean.
std::vector<double> iou_per_class(const ConfusionMatrix& cm);

// Mean IoU over present classes. Throws if every class is absent.
double miou(const ConfusionMatrix& cm);

// JSON report string: {per_class: {name: iou}, miou, pixels_evaluated}.
// Absent classes appear with null IoU. `names` may be empty (class ids used
// as names) or must have one entry per class.
std::string report_json(const ConfusionMatrix& cm, const std::vector<std::string>& names);

}  // namespace synthgen::metrics
