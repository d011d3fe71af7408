#include "synthgen/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace synthgen {

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.ndim()) throw std::runtime_error("softmax: invalid axis");
    check_finite(x, "softmax input");
    std::size_t n = x.dim(axis);
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.shape[i];
    std::size_t outer = x.numel() / (n * inner);

    Tensor out(x.shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            double mx = x.data[base];
            for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x.data[base + i * inner]);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double e = std::exp(x.data[base + i * inner] - mx);
                out.data[base + i * inner] = e;
                sum += e;
            }
            for (std::size_t i = 0; i < n; ++i) out.data[base + i * inner] /= sum;
        }
    }
    return out;
}

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 int ignore_index) {
    if (logits.ndim() != 2) throw std::runtime_error("cross_entropy: logits must be [N,K]");
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    if (labels.size() != n) throw std::runtime_error("cross_entropy: label count mismatch");

    CrossEntropyResult res;
    res.grad_logits = Tensor::zeros(logits.shape);

    std::size_t count = 0;
    for (int y : labels) {
        if (y == ignore_index) continue;
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw std::runtime_error("cross_entropy: label out of range");
        }
        ++count;
    }
    if (count == 0) throw std::runtime_error("cross_entropy: empty loss (all entries ignored)");

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == ignore_index) continue;
        const double* row = &logits.data[i * k];
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - row[static_cast<std::size_t>(labels[i])];
        double* g = &res.grad_logits.data[i * k];
        for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - lse) / count;
        g[static_cast<std::size_t>(labels[i])] -= 1.0 / count;
    }
    res.loss = loss / count;
    return res;
}

CrossEntropyResult seg_cross_entropy(const Tensor& logits_khw, const LabelMap& labels) {
    if (logits_khw.ndim() != 3) throw std::runtime_error("seg_cross_entropy: logits must be [K,H,W]");
    const std::size_t k = logits_khw.dim(0);
    const std::size_t h = logits_khw.dim(1);
    const std::size_t w = logits_khw.dim(2);
    if (labels.rows != h || labels.cols != w) {
        throw std::runtime_error("seg_cross_entropy: label map shape mismatch");
    }
    const std::size_t hw = h * w;

    std::size_t count = 0;
    for (std::uint8_t y : labels.v) {
        if (y == kIgnoreLabel) continue;
        if (y >= k) throw std::runtime_error("seg_cross_entropy: label out of range");
        ++count;
    }
    if (count == 0) throw std::runtime_error("seg_cross_entropy: empty loss (all pixels ignored)");

    CrossEntropyResult res;
    res.grad_logits = Tensor::zeros(logits_khw.shape);
    double loss = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
        const std::uint8_t y = labels.v[p];
        if (y == kIgnoreLabel) continue;
        double mx = logits_khw.data[p];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits_khw.data[j * hw + p]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(logits_khw.data[j * hw + p] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - logits_khw.data[static_cast<std::size_t>(y) * hw + p];
        for (std::size_t j = 0; j < k; ++j) {
            res.grad_logits.data[j * hw + p] = std::exp(logits_khw.data[j * hw + p] - lse) / count;
        }
        res.grad_logits.data[static_cast<std::size_t>(y) * hw + p] -= 1.0 / count;
    }
    res.loss = loss / count;
    return res;
}

namespace {

struct ConvDims {
    std::size_t c, h, w, f, k, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding) {
    if (x.ndim() != 3 || w.ndim() != 4) {
        throw std::runtime_error("conv2d: x must be [C,H,W] and w [F,C,k,k]");
    }
    ConvDims d{};
    d.c = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.f = w.dim(0);
    d.k = w.dim(2);
    if (w.dim(1) != d.c) throw std::runtime_error("conv2d: channel mismatch");
    if (w.dim(3) != d.k) throw std::runtime_error("conv2d: kernel must be square");
    if (d.k % 2 == 0) throw std::runtime_error("conv2d: kernel size must be odd");
    if (stride == 0) throw std::runtime_error("conv2d: stride must be >= 1");
    if (d.h + 2 * padding < d.k || d.w + 2 * padding < d.k) {
        throw std::runtime_error("conv2d: kernel larger than padded input");
    }
    d.ho = (d.h + 2 * padding - d.k) / stride + 1;
    d.wo = (d.w + 2 * padding - d.k) / stride + 1;
    return d;
}

// Valid output range [o_lo, o_hi) so that o*stride + kk - padding lands in
// [0, in_size).
void out_range(std::size_t kk, std::size_t padding, std::size_t stride, std::size_t in_size,
               std::size_t out_size, std::size_t& o_lo, std::size_t& o_hi) {
    // o*stride >= padding - kk
    if (padding > kk) {
        o_lo = (padding - kk + stride - 1) / stride;
    } else {
        o_lo = 0;
    }
    // o*stride < in_size + padding - kk
    std::size_t lim = in_size + padding - kk;  // guaranteed > 0 by conv_dims
    o_hi = std::min(out_size, (lim + stride - 1) / stride);
    if (o_lo > o_hi) o_lo = o_hi;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding) {
    ConvDims d = conv_dims(x, w, stride, padding);
    if (b.numel() != d.f) throw std::runtime_error("conv2d: bias size mismatch");

    Tensor out({d.f, d.ho, d.wo});
    for (std::size_t f = 0; f < d.f; ++f) {
        double* of = &out.data[f * d.ho * d.wo];
        const double bias = b.data[f];
        for (std::size_t i = 0; i < d.ho * d.wo; ++i) of[i] = bias;
    }

    for (std::size_t f = 0; f < d.f; ++f) {
        for (std::size_t c = 0; c < d.c; ++c) {
            const double* xc = &x.data[c * d.h * d.w];
            for (std::size_t ky = 0; ky < d.k; ++ky) {
                std::size_t oy_lo, oy_hi;
                out_range(ky, padding, stride, d.h, d.ho, oy_lo, oy_hi);
                for (std::size_t kx = 0; kx < d.k; ++kx) {
                    const double wv = w.data[((f * d.c + c) * d.k + ky) * d.k + kx];
                    if (wv == 0.0) continue;
                    std::size_t ox_lo, ox_hi;
                    out_range(kx, padding, stride, d.w, d.wo, ox_lo, ox_hi);
                    for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                        const std::size_t iy = oy * stride + ky - padding;
                        const double* xr = xc + iy * d.w + (ox_lo * stride + kx - padding);
                        double* orow = &out.data[(f * d.ho + oy) * d.wo + ox_lo];
                        const std::size_t nx = ox_hi - ox_lo;
                        for (std::size_t i = 0; i < nx; ++i) orow[i] += wv * xr[i * stride];
                    }
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                            std::size_t padding, const Tensor& dy) {
    ConvDims d = conv_dims(x, w, stride, padding);
    if (dy.ndim() != 3 || dy.dim(0) != d.f || dy.dim(1) != d.ho || dy.dim(2) != d.wo) {
        throw std::runtime_error("conv2d_backward: dy shape mismatch");
    }

    Conv2dGrads g;
    g.dx = Tensor::zeros(x.shape);
    g.dw = Tensor::zeros(w.shape);
    g.db = Tensor::zeros({d.f});

    for (std::size_t f = 0; f < d.f; ++f) {
        const double* dyf = &dy.data[f * d.ho * d.wo];
        double acc = 0.0;
        for (std::size_t i = 0; i < d.ho * d.wo; ++i) acc += dyf[i];
        g.db.data[f] = acc;
    }

    for (std::size_t f = 0; f < d.f; ++f) {
        for (std::size_t c = 0; c < d.c; ++c) {
            const double* xc = &x.data[c * d.h * d.w];
            double* dxc = &g.dx.data[c * d.h * d.w];
            for (std::size_t ky = 0; ky < d.k; ++ky) {
                std::size_t oy_lo, oy_hi;
                out_range(ky, padding, stride, d.h, d.ho, oy_lo, oy_hi);
                for (std::size_t kx = 0; kx < d.k; ++kx) {
                    std::size_t ox_lo, ox_hi;
                    out_range(kx, padding, stride, d.w, d.wo, ox_lo, ox_hi);
                    const double wv = w.data[((f * d.c + c) * d.k + ky) * d.k + kx];
                    double dw_acc = 0.0;
                    for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                        const std::size_t iy = oy * stride + ky - padding;
                        const std::size_t ix0 = ox_lo * stride + kx - padding;
                        const double* xr = xc + iy * d.w + ix0;
                        double* dxr = dxc + iy * d.w + ix0;
                        const double* dyr = &dy.data[(f * d.ho + oy) * d.wo + ox_lo];
                        const std::size_t nx = ox_hi - ox_lo;
                        for (std::size_t i = 0; i < nx; ++i) {
                            dw_acc += xr[i * stride] * dyr[i];
                            dxr[i * stride] += wv * dyr[i];
                        }
                    }
                    g.dw.data[((f * d.c + c) * d.k + ky) * d.k + kx] += dw_acc;
                }
            }
        }
    }
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (!same_shape(x, dy)) throw std::runtime_error("relu_backward: shape mismatch");
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    return out;
}

Tensor upsample_nearest_2x(const Tensor& x) {
    if (x.ndim() != 3) throw std::runtime_error("upsample_nearest_2x: input must be [C,H,W]");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) {
                const double v = x.data[(ch * h + y) * w + xx];
                double* o = &out.data[(ch * 2 * h + 2 * y) * 2 * w + 2 * xx];
                o[0] = v;
                o[1] = v;
                o[2 * w] = v;
                o[2 * w + 1] = v;
            }
        }
    }
    return out;
}

Tensor upsample_nearest_2x_backward(const Tensor& dy) {
    if (dy.ndim() != 3) throw std::runtime_error("upsample_nearest_2x_backward: dy must be [C,H,W]");
    const std::size_t c = dy.dim(0), h2 = dy.dim(1), w2 = dy.dim(2);
    if (h2 % 2 != 0 || w2 % 2 != 0) {
        throw std::runtime_error("upsample_nearest_2x_backward: dy dims must be even");
    }
    const std::size_t h = h2 / 2, w = w2 / 2;
    Tensor out({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) {
                const double* p = &dy.data[(ch * h2 + 2 * y) * w2 + 2 * xx];
                out.data[(ch * h + y) * w + xx] = p[0] + p[1] + p[w2] + p[w2 + 1];
            }
        }
    }
    return out;
}

Tensor l2_normalize(const Tensor& v) {
    double nsq = 0.0;
    for (double x : v.data) nsq += x * x;
    const double n = std::sqrt(nsq);
    if (!(n > 1e-12)) throw std::runtime_error("l2_normalize: zero-norm vector");
    Tensor out(v.shape);
    for (std::size_t i = 0; i < v.numel(); ++i) out.data[i] = v.data[i] / n;
    return out;
}

Tensor l2_normalize_backward(const Tensor& v, const Tensor& dy) {
    if (!same_shape(v, dy)) throw std::runtime_error("l2_normalize_backward: shape mismatch");
    double nsq = 0.0;
    for (double x : v.data) nsq += x * x;
    const double n = std::sqrt(nsq);
    if (!(n > 1e-12)) throw std::runtime_error("l2_normalize_backward: zero-norm vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < v.numel(); ++i) dot += v.data[i] * dy.data[i];
    const double proj = dot / nsq;
    Tensor out(v.shape);
    for (std::size_t i = 0; i < v.numel(); ++i) {
        out.data[i] = (dy.data[i] - v.data[i] * proj) / n;
    }
    return out;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double eps) {
    Tensor grad(x.shape);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + eps;
        const double fp = f(probe);
        probe.data[i] = orig - eps;
        const double fm = f(probe);
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_difference_gradient: non-finite function value");
        }
        grad.data[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace synthgen
