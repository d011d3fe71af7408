#include "synthgen/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

using json = nlohmann::ordered_json;

namespace synthgen::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {
    if (k < 1) throw std::runtime_error("ConfusionMatrix: need at least one class");
    if (k >= kIgnoreLabel) {
        throw std::runtime_error("ConfusionMatrix: class count collides with ignore label");
    }
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

void ConfusionMatrix::update(const LabelMap& pred, const LabelMap& gt) {
    if (!same_shape(pred, gt)) {
        throw std::runtime_error("ConfusionMatrix::update: prediction/ground-truth shape mismatch");
    }
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        const std::uint8_t g = gt.v[i];
        if (g == kIgnoreLabel) continue;
        const std::uint8_t p = pred.v[i];
        if (g >= k_ || p >= k_) {
            throw std::runtime_error("ConfusionMatrix::update: class id " +
                                     std::to_string(std::max(g, p)) + " out of range for K=" +
                                     std::to_string(k_));
        }
        ++counts_[static_cast<std::size_t>(g) * k_ + p];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw std::runtime_error("ConfusionMatrix::merge: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<double> iou_per_class(const ConfusionMatrix& cm) {
    const std::size_t k = cm.class_count();
    std::vector<double> iou(k);
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == c) continue;
            fp += cm.at(j, c);
            fn += cm.at(c, j);
        }
        const std::uint64_t denom = tp + fp + fn;
        iou[c] = denom == 0 ? std::nan("") : static_cast<double>(tp) / static_cast<double>(denom);
    }
    return iou;
}

double miou(const ConfusionMatrix& cm) {
    const std::vector<double> iou = iou_per_class(cm);
    double sum = 0.0;
    std::size_t present = 0;
    for (double v : iou) {
        if (std::isnan(v)) continue;
        sum += v;
        ++present;
    }
    if (present == 0) throw std::runtime_error("miou: every class is absent");
    return sum / static_cast<double>(present);
}

std::string report_json(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    const std::size_t k = cm.class_count();
    if (!names.empty() && names.size() != k) {
        throw std::runtime_error("report_json: expected " + std::to_string(k) + " class names, got " +
                                 std::to_string(names.size()));
    }
    const std::vector<double> iou = iou_per_class(cm);
    json per_class = json::object();
    for (std::size_t c = 0; c < k; ++c) {
        const std::string name = names.empty() ? "class_" + std::to_string(c) : names[c];
        if (std::isnan(iou[c])) {
            per_class[name] = nullptr;
        } else {
            per_class[name] = iou[c];
        }
    }
    json j;
    j["per_class"] = std::move(per_class);
    j["miou"] = miou(cm);
    j["pixels_evaluated"] = cm.total();
    return j.dump(2);
}

}  // namespace synthgen::metrics
