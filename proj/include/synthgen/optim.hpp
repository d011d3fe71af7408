#pragma once

#include <cstdint>

#include "synthgen/model.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::optim {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Moment estimates mirror the parameter shapes; t counts completed steps.
struct AdamWState {
    model::SegNetParams m, v;
    std::int64_t t = 0;
};

AdamWState make_adamw_state(const model::SegNetParams& params);

// Single-tensor decoupled-weight-decay Adam update with bias correction;
// t is the post-increment step count (>= 1).
void adamw_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, std::int64_t t,
                  const AdamWConfig& cfg);

// One optimizer step over every parameter tensor; increments state.t.
void adamw_step(model::SegNetParams& params, const model::SegNetParams& grads, AdamWState& state,
                const AdamWConfig& cfg);

// Linear decay base_lr * (1 - epoch/total), floored at base_lr/100.
double lr_schedule(double base_lr, std::size_t epoch, std::size_t total_epochs);

// theta_t <- alpha * theta_t + (1 - alpha) * theta_s, elementwise over all
// parameter tensors. alpha in [0,1].
void ema_update(model::SegNetParams& teacher, const model::SegNetParams& student, double alpha);

}  // namespace synthgen::optim
