#pragma once

#include "synthgen/image_io.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::aug {

// Bilinear resize for images (half-pixel-center convention: the source
// coordinate of output pixel o is (o + 0.5) * in/out - 0.5, clamped).
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

// Nearest-neighbor resize for label maps; never introduces new class ids.
LabelMap resize_nearest(const LabelMap& labels, std::size_t out_h, std::size_t out_w);

// Crops the same window from image and labels. Throws if the crop exceeds
// the input.
io::LabeledImage random_crop(const io::LabeledImage& sample, std::size_t h, std::size_t w,
                             Rng& rng);

// Brightness then contrast, factors drawn uniformly from the given ranges;
// output clamped to [0,1]. Contrast blends toward the image mean intensity.
Tensor color_jitter(const Tensor& image, double brightness_lo, double brightness_hi,
                    double contrast_lo, double contrast_hi, Rng& rng);

// Separable 3-tap Gaussian with reflect padding at the borders.
Tensor gaussian_blur(const Tensor& image, double sigma);

}  // namespace synthgen::aug
