#pragma once

#include <functional>

#include "synthgen/tensor.hpp"

namespace synthgen {

// Softmax along `axis`, computed with max-subtraction. Slices along the axis
// sum to 1 within 1e-12.
Tensor softmax(const Tensor& x, std::size_t axis);

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor grad_logits;
};

// Mean negative log-softmax probability of the true class over non-ignored
// rows. Gradient is (softmax - one_hot) / count on those rows, zero on
// ignored rows. logits are [N,K], labels hold N entries in [0,K) or
// ignore_index. Throws if every entry is ignored or a label is out of range.
CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                 int ignore_index = -1);

// Same loss over the pixels of a [K,H,W] logit volume against an [H,W]
// label map, kIgnoreLabel excluded. Gradient has the logit layout.
CrossEntropyResult seg_cross_entropy(const Tensor& logits_khw, const LabelMap& labels);

// Cross-correlation of x [C,H,W] with w [F,C,k,k] plus bias b [F].
// Output spatial size is floor((H + 2*padding - k)/stride) + 1 (zero padding).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding);

struct Conv2dGrads {
    Tensor dx, dw, db;
};

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                            std::size_t padding, const Tensor& dy);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// [C,H,W] -> [C,2H,2W], each pixel replicated into a 2x2 block.
Tensor upsample_nearest_2x(const Tensor& x);
// Sums each 2x2 block of dy back onto the source pixel.
Tensor upsample_nearest_2x_backward(const Tensor& dy);

// v / ||v||_2 over the flattened tensor. Throws if ||v||_2 <= 1e-12.
Tensor l2_normalize(const Tensor& v);
// Gradient of y = v/||v||: dv = (dy - y * (y . dy)) / ||v||.
Tensor l2_normalize_backward(const Tensor& v, const Tensor& dy);

// Central-difference gradient (f(x+eps e_i) - f(x-eps e_i)) / (2 eps) per
// coordinate. The verification oracle for every analytic backward pass.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double eps = 1e-5);

}  // namespace synthgen
