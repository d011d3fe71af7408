#pragma once

#include <cstdint>
#include <vector>

#include "synthgen/model.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::gmc {

// Patch-grid occlusion mask. Cell value 1 keeps the b x b patch visible;
// a cell is visible iff its uniform draw v exceeds the mask ratio r, so the
// expected visible fraction is 1 - r.
struct PatchMask {
    std::size_t patch = 0;  // b
    double ratio = 0.0;     // r
    std::size_t grid_h = 0, grid_w = 0;
    std::vector<std::uint8_t> grid;  // [grid_h * grid_w]

    std::uint8_t cell(std::size_t gy, std::size_t gx) const { return grid[gy * grid_w + gx]; }
    // [H,W] view with each cell replicated b x b.
    Tensor expanded() const;
    double visible_fraction() const;
};

// One independent U(0,1) draw per cell; throws "patch grid misalignment"
// unless b divides both H and W, and requires r in [0,1].
PatchMask sample_patch_mask(std::size_t h, std::size_t w, std::size_t b, double r, Rng& rng);

// x^M: zeroes every masked pixel of a [3,H,W] image, all channels.
Tensor apply_mask(const Tensor& x, const PatchMask& mask);

// Masked-consistency objective: sample a mask, run the model on the masked
// image, and score the prediction against ground truth over ALL pixels —
// the mask hides input evidence, never supervision. When `grads` is given,
// parameter gradients scaled by grad_scale are accumulated into it.
double gmc_loss(const model::SegNetParams& params, const Tensor& x, const LabelMap& y,
                std::size_t b, double r, Rng& rng, model::SegNetParams* grads = nullptr,
                double grad_scale = 1.0);

}  // namespace synthgen::gmc
