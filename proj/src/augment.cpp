#include "synthgen/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace synthgen::aug {

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (image.ndim() != 3) throw std::runtime_error("resize_bilinear: image must be [C,H,W]");
    if (out_h < 1 || out_w < 1) throw std::runtime_error("resize_bilinear: output dims must be >= 1");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (out_h == h && out_w == w) return image;

    Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* p = &image.data[ch * h * w];
                const double top = p[y0 * w + x0] * (1.0 - wx) + p[y0 * w + x1] * wx;
                const double bot = p[y1 * w + x0] * (1.0 - wx) + p[y1 * w + x1] * wx;
                out.data[(ch * out_h + oy) * out_w + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

LabelMap resize_nearest(const LabelMap& labels, std::size_t out_h, std::size_t out_w) {
    if (out_h < 1 || out_w < 1) throw std::runtime_error("resize_nearest: output dims must be >= 1");
    if (out_h == labels.rows && out_w == labels.cols) return labels;
    LabelMap out(out_h, out_w);
    const double sy = static_cast<double>(labels.rows) / out_h;
    const double sx = static_cast<double>(labels.cols) / out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const std::size_t iy =
            std::min(static_cast<std::size_t>((oy + 0.5) * sy), labels.rows - 1);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t ix =
                std::min(static_cast<std::size_t>((ox + 0.5) * sx), labels.cols - 1);
            out(oy, ox) = labels(iy, ix);
        }
    }
    return out;
}

io::LabeledImage random_crop(const io::LabeledImage& sample, std::size_t h, std::size_t w,
                             Rng& rng) {
    const std::size_t sh = sample.image.dim(1), sw = sample.image.dim(2);
    if (h > sh || w > sw) throw std::runtime_error("random_crop: crop larger than image");
    const std::size_t top = rng.uniform_index(sh - h + 1);
    const std::size_t left = rng.uniform_index(sw - w + 1);

    io::LabeledImage out;
    out.domain = sample.domain;
    out.image = Tensor({3, h, w});
    out.labels = LabelMap(h, w);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            const double* src = &sample.image.data[(c * sh + top + y) * sw + left];
            double* dst = &out.image.data[(c * h + y) * w];
            std::copy(src, src + w, dst);
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) out.labels(y, x) = sample.labels(top + y, left + x);
    }
    return out;
}

Tensor color_jitter(const Tensor& image, double brightness_lo, double brightness_hi,
                    double contrast_lo, double contrast_hi, Rng& rng) {
    if (brightness_lo <= 0.0 || contrast_lo <= 0.0) {
        throw std::runtime_error("color_jitter: jitter ranges must be positive");
    }
    const double fb = rng.uniform(brightness_lo, brightness_hi);
    const double fc = rng.uniform(contrast_lo, contrast_hi);

    Tensor out(image.shape);
    double mean = 0.0;
    for (double v : image.data) mean += v;
    mean = mean * fb / static_cast<double>(image.numel());
    for (std::size_t i = 0; i < image.numel(); ++i) {
        const double v = mean + (image.data[i] * fb - mean) * fc;
        out.data[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
    if (image.ndim() != 3) throw std::runtime_error("gaussian_blur: image must be [C,H,W]");
    if (!(sigma > 0.0)) throw std::runtime_error("gaussian_blur: sigma must be positive");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);

    const double k1 = std::exp(-0.5 / (sigma * sigma));
    const double norm = 1.0 + 2.0 * k1;
    const double w0 = 1.0 / norm, w1 = k1 / norm;

    auto reflect = [](std::ptrdiff_t i, std::size_t n) -> std::size_t {
        if (i < 0) return 0;
        if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
        return static_cast<std::size_t>(i);
    };

    Tensor tmp(image.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = &image.data[ch * h * w];
        double* t = &tmp.data[ch * h * w];
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t xl = reflect(static_cast<std::ptrdiff_t>(x) - 1, w);
                const std::size_t xr = reflect(static_cast<std::ptrdiff_t>(x) + 1, w);
                t[y * w + x] = w1 * p[y * w + xl] + w0 * p[y * w + x] + w1 * p[y * w + xr];
            }
        }
    }
    Tensor out(image.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* t = &tmp.data[ch * h * w];
        double* o = &out.data[ch * h * w];
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t yu = reflect(static_cast<std::ptrdiff_t>(y) - 1, h);
            const std::size_t yd = reflect(static_cast<std::ptrdiff_t>(y) + 1, h);
            for (std::size_t x = 0; x < w; ++x) {
                o[y * w + x] = w1 * t[yu * w + x] + w0 * t[y * w + x] + w1 * t[yd * w + x];
            }
        }
    }
    return out;
}

}  // namespace synthgen::aug
