#include "synthgen/gmc.hpp"

#include <stdexcept>

#include "synthgen/nn_ops.hpp"

namespace synthgen::gmc {

Tensor PatchMask::expanded() const {
    Tensor out({grid_h * patch, grid_w * patch});
    for (std::size_t gy = 0; gy < grid_h; ++gy) {
        for (std::size_t gx = 0; gx < grid_w; ++gx) {
            const double v = cell(gy, gx) ? 1.0 : 0.0;
            for (std::size_t dy = 0; dy < patch; ++dy) {
                double* row = out.data.data() + (gy * patch + dy) * grid_w * patch + gx * patch;
                for (std::size_t dx = 0; dx < patch; ++dx) row[dx] = v;
            }
        }
    }
    return out;
}

double PatchMask::visible_fraction() const {
    if (grid.empty()) return 0.0;
    std::size_t on = 0;
    for (auto c : grid) on += c;
    return static_cast<double>(on) / static_cast<double>(grid.size());
}

PatchMask sample_patch_mask(std::size_t h, std::size_t w, std::size_t b, double r, Rng& rng) {
    if (b < 1) throw std::runtime_error("sample_patch_mask: patch size must be >= 1");
    if (h % b != 0 || w % b != 0) throw std::runtime_error("patch grid misalignment");
    if (r < 0.0 || r > 1.0) throw std::runtime_error("sample_patch_mask: ratio must be in [0,1]");
    PatchMask m;
    m.patch = b;
    m.ratio = r;
    m.grid_h = h / b;
    m.grid_w = w / b;
    m.grid.resize(m.grid_h * m.grid_w);
    for (auto& cell : m.grid) cell = rng.uniform() > r ? 1 : 0;
    return m;
}

Tensor apply_mask(const Tensor& x, const PatchMask& mask) {
    if (x.ndim() != 3) throw std::runtime_error("apply_mask: expected [3,H,W], got " + shape_str(x));
    const std::size_t h = x.dim(1), w = x.dim(2);
    if (h != mask.grid_h * mask.patch || w != mask.grid_w * mask.patch) {
        throw std::runtime_error("apply_mask: mask covers " +
                                 std::to_string(mask.grid_h * mask.patch) + "x" +
                                 std::to_string(mask.grid_w * mask.patch) + ", image is " +
                                 shape_str(x));
    }
    Tensor out = x;
    for (std::size_t gy = 0; gy < mask.grid_h; ++gy) {
        for (std::size_t gx = 0; gx < mask.grid_w; ++gx) {
            if (mask.cell(gy, gx)) continue;
            for (std::size_t c = 0; c < x.dim(0); ++c) {
                for (std::size_t dy = 0; dy < mask.patch; ++dy) {
                    double* row = out.data.data() +
                                  (c * h + gy * mask.patch + dy) * w + gx * mask.patch;
                    for (std::size_t dx = 0; dx < mask.patch; ++dx) row[dx] = 0.0;
                }
            }
        }
    }
    return out;
}

double gmc_loss(const model::SegNetParams& params, const Tensor& x, const LabelMap& y,
                std::size_t b, double r, Rng& rng, model::SegNetParams* grads,
                double grad_scale) {
    const PatchMask mask = sample_patch_mask(x.dim(1), x.dim(2), b, r, rng);
    const Tensor masked = apply_mask(x, mask);

    model::ForwardCache cache;
    const Tensor logits = model::forward(params, masked, grads ? &cache : nullptr);
    CrossEntropyResult ce = seg_cross_entropy(logits, y);
    if (grads) {
        if (grad_scale != 1.0) {
            for (double& g : ce.grad_logits.data) g *= grad_scale;
        }
        model::backward(params, cache, ce.grad_logits, *grads);
    }
    return ce.loss;
}

}  // namespace synthgen::gmc
