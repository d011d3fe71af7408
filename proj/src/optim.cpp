#include "synthgen/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace synthgen::optim {

AdamWState make_adamw_state(const model::SegNetParams& params) {
    AdamWState s;
    s.m = model::zeros_like(params);
    s.v = model::zeros_like(params);
    return s;
}

void adamw_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, std::int64_t t,
                  const AdamWConfig& cfg) {
    if (!same_shape(p, g) || !same_shape(p, m) || !same_shape(p, v)) {
        throw std::runtime_error("adamw_update: parameter/gradient/state shape mismatch");
    }
    if (t < 1) throw std::runtime_error("adamw_update: step count must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.numel(); ++i) {
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
        const double m_hat = m.data[i] / bc1;
        const double v_hat = v.data[i] / bc2;
        p.data[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p.data[i]);
    }
}

void adamw_step(model::SegNetParams& params, const model::SegNetParams& grads, AdamWState& state,
                const AdamWConfig& cfg) {
    ++state.t;
    auto ps = model::param_tensors(params);
    auto gs = model::param_tensors(grads);
    auto ms = model::param_tensors(state.m);
    auto vs = model::param_tensors(state.v);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        adamw_update(*ps[i].second, *gs[i].second, *ms[i].second, *vs[i].second, state.t, cfg);
    }
}

double lr_schedule(double base_lr, std::size_t epoch, std::size_t total_epochs) {
    if (total_epochs == 0) return base_lr;
    const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return std::max(base_lr * (1.0 - frac), base_lr / 100.0);
}

void ema_update(model::SegNetParams& teacher, const model::SegNetParams& student, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::runtime_error("ema_update: decay must lie in [0,1]");
    }
    auto ts = model::param_tensors(teacher);
    auto ss = model::param_tensors(student);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Tensor& t = *ts[i].second;
        const Tensor& s = *ss[i].second;
        if (!same_shape(t, s)) throw std::runtime_error("ema_update: parameter shape mismatch");
        for (std::size_t j = 0; j < t.numel(); ++j) {
            t.data[j] = alpha * t.data[j] + (1.0 - alpha) * s.data[j];
        }
    }
}

}  // namespace synthgen::optim
