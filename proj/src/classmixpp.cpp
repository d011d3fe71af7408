#include "synthgen/classmixpp.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace synthgen::mix {

LabelMap argmax_labels(const Tensor& scores) {
    if (scores.ndim() != 3) {
        throw std::runtime_error("argmax_labels: expected [K,H,W], got " + shape_str(scores));
    }
    const std::size_t k = scores.dim(0), h = scores.dim(1), w = scores.dim(2);
    if (k < 1) throw std::runtime_error("argmax_labels: need at least one class channel");
    LabelMap out(h, w);
    const std::size_t hw = h * w;
    for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = 0;
        double best_v = scores.data[p];
        for (std::size_t c = 1; c < k; ++c) {
            const double v = scores.data[c * hw + p];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out.v[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::vector<int> class_set(const LabelMap& labels) {
    std::array<bool, 256> seen{};
    for (std::uint8_t id : labels.v) seen[id] = true;
    std::vector<int> out;
    for (int id = 0; id < 256; ++id) {
        if (seen[static_cast<std::size_t>(id)] && id != kIgnoreLabel) out.push_back(id);
    }
    if (out.empty()) throw std::runtime_error("class_set: label map contains only ignore pixels");
    return out;
}

std::vector<int> select_half(const std::vector<int>& classes, Rng& rng) {
    const std::size_t m = std::max<std::size_t>(1, classes.size() / 2);
    return rng.choose_subset(classes, m);
}

LabelMap build_mask(const LabelMap& labels, const std::vector<int>& selected) {
    std::array<bool, 256> pick{};
    for (int id : selected) {
        if (id >= 0 && id < 256) pick[static_cast<std::size_t>(id)] = true;
    }
    pick[kIgnoreLabel] = false;
    LabelMap mask(labels.rows, labels.cols);
    for (std::size_t i = 0; i < labels.v.size(); ++i) {
        mask.v[i] = pick[labels.v[i]] ? 1 : 0;
    }
    return mask;
}

MixResult classmix_pp(const io::LabeledImage& a, const io::LabeledImage& b, Rng& rng) {
    if (!same_shape(a.image, b.image) || !same_shape(a.labels, b.labels)) {
        throw std::runtime_error("classmix_pp: inputs must share height and width");
    }
    const LabelMap& sa = argmax_labels(a.labels);

    MixResult r;
    r.selected_classes = select_half(class_set(sa), rng);
    r.mask = build_mask(sa, r.selected_classes);

    const std::size_t hw = r.mask.size();
    r.mixed_image = Tensor({3, a.labels.rows, a.labels.cols});
    for (std::size_t c = 0; c < 3; ++c) {
        const double* pa = a.image.data.data() + c * hw;
        const double* pb = b.image.data.data() + c * hw;
        double* po = r.mixed_image.data.data() + c * hw;
        for (std::size_t i = 0; i < hw; ++i) po[i] = r.mask.v[i] ? pa[i] : pb[i];
    }
    r.mixed_labels = LabelMap(a.labels.rows, a.labels.cols);
    for (std::size_t i = 0; i < hw; ++i) {
        r.mixed_labels.v[i] = r.mask.v[i] ? a.labels.v[i] : b.labels.v[i];
    }
    return r;
}

}  // namespace synthgen::mix
