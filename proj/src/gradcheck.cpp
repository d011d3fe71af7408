#include "synthgen/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "synthgen/gmc.hpp"
#include "synthgen/model.hpp"
#include "synthgen/nn_ops.hpp"
#include "synthgen/plgcl.hpp"
#include "synthgen/rng.hpp"

namespace synthgen::gradcheck {

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nb);
    if (denom == 0.0) return 0.0;
    return std::sqrt(num) / denom;
}

double rel_err(const Tensor& a, const Tensor& b) { return rel_err(a.data, b.data); }

namespace {

constexpr double kEps = 1e-6;

// A loss evaluation plus the sign pattern of every pre-ReLU activation it
// passed through. Central differences are meaningless when the probe
// window flips a sign (the loss has a kink inside it), so such coordinates
// are detected and skipped.
struct Probe {
    double loss = 0.0;
    std::vector<std::uint8_t> signs;
};

void push_signs(std::vector<std::uint8_t>& signs, const Tensor& pre_relu) {
    for (double v : pre_relu.data) signs.push_back(v > 0.0 ? 1 : 0);
}

using ProbeFn = std::function<Probe(const model::SegNetParams&)>;

struct TensorPlan {
    std::string name;
    Tensor* param;
    const Tensor* grad;
    std::size_t sample;  // 0 = all coordinates
};

// Compares analytic gradients against central differences over a sampled
// coordinate set, updating `path` with the worst tensor-level error.
void check_tensors(model::SegNetParams& work, const std::vector<TensorPlan>& plans,
                   const ProbeFn& probe, Rng& rng, PathResult& path) {
    for (const auto& plan : plans) {
        Tensor& t = *plan.param;
        std::vector<std::size_t> coords;
        if (plan.sample == 0 || t.numel() <= plan.sample * 2) {
            coords.resize(t.numel());
            for (std::size_t i = 0; i < t.numel(); ++i) coords[i] = i;
        } else {
            std::vector<std::uint8_t> used(t.numel(), 0);
            while (coords.size() < plan.sample) {
                const std::size_t i = rng.uniform_index(t.numel());
                if (!used[i]) {
                    used[i] = 1;
                    coords.push_back(i);
                }
            }
        }

        std::vector<double> analytic, numeric;
        for (std::size_t i : coords) {
            const double saved = t.data[i];
            t.data[i] = saved + kEps;
            const Probe hi = probe(work);
            t.data[i] = saved - kEps;
            const Probe lo = probe(work);
            t.data[i] = saved;
            if (hi.signs != lo.signs) {
                ++path.coords_skipped;
                continue;
            }
            analytic.push_back(plan.grad->data[i]);
            numeric.push_back((hi.loss - lo.loss) / (2.0 * kEps));
            ++path.coords_checked;
        }
        path.max_rel_err = std::max(path.max_rel_err, rel_err(analytic, numeric));
    }
}

std::vector<TensorPlan> full_net_plans(model::SegNetParams& p, const model::SegNetParams& g,
                                       bool include_decoder) {
    std::vector<TensorPlan> plans = {
        {"conv1_w", &p.conv1_w, &g.conv1_w, 48}, {"conv1_b", &p.conv1_b, &g.conv1_b, 0},
        {"conv2_w", &p.conv2_w, &g.conv2_w, 48}, {"conv2_b", &p.conv2_b, &g.conv2_b, 0},
        {"conv3_w", &p.conv3_w, &g.conv3_w, 48}, {"conv3_b", &p.conv3_b, &g.conv3_b, 0},
    };
    if (include_decoder) {
        plans.push_back({"out_w", &p.out_w, &g.out_w, 48});
        plans.push_back({"out_b", &p.out_b, &g.out_b, 0});
    }
    return plans;
}

Tensor random_image(std::size_t h, std::size_t w, Rng& rng) {
    Tensor x({3, h, w});
    for (double& v : x.data) v = rng.uniform();
    return x;
}

LabelMap random_labels(std::size_t h, std::size_t w, std::size_t k, Rng& rng) {
    LabelMap y(h, w);
    for (auto& v : y.v) {
        v = rng.uniform() < 0.1 ? kIgnoreLabel
                                : static_cast<std::uint8_t>(rng.uniform_index(k));
    }
    // Guard against the (improbable) all-ignore map.
    y.v[0] = 0;
    return y;
}

plgcl::GaussianStats random_stats(std::size_t d, Rng& rng) {
    plgcl::GaussianStats s;
    Tensor m({d});
    for (double& v : m.data) v = rng.normal();
    s.mean = l2_normalize(m);
    s.var = Tensor({d});
    for (double& v : s.var.data) v = 0.05 * rng.uniform();
    return s;
}

}  // namespace

SuiteResult run_suite(std::size_t seeds, double tolerance) {
    constexpr std::size_t kSide = 8, kClasses = 6, kDim = 8;
    constexpr double kTau = 0.07, kZeta = 1.3, kLambda = 0.8;

    SuiteResult suite;
    suite.tolerance = tolerance;
    suite.paths = {{"segmentation_ce"}, {"masked_consistency"}, {"contrastive_anchor"},
                   {"contrastive_head"}};

    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng = Rng::derive(0x5eed517ULL, s);
        model::SegNetParams params = model::init_params(rng, kClasses, kDim);
        const Tensor x = random_image(kSide, kSide, rng);
        const LabelMap y = random_labels(kSide, kSide, kClasses, rng);

        {  // (a) segmentation cross-entropy through the full network
            model::SegNetParams grads = model::zeros_like(params);
            model::ForwardCache cache;
            const Tensor logits = model::forward(params, x, &cache);
            CrossEntropyResult ce = seg_cross_entropy(logits, y);
            model::backward(params, cache, ce.grad_logits, grads);

            ProbeFn probe = [&](const model::SegNetParams& p) {
                Probe out;
                model::ForwardCache c;
                const Tensor lg = model::forward(p, x, &c);
                out.loss = seg_cross_entropy(lg, y).loss;
                push_signs(out.signs, c.a1);
                push_signs(out.signs, c.a2);
                push_signs(out.signs, c.a3);
                return out;
            };
            check_tensors(params, full_net_plans(params, grads, true), probe, rng,
                          suite.paths[0]);
        }

        {  // (b) masked-consistency loss, mask frozen by reusing one seed
            const std::uint64_t mask_seed = rng.next_u64();
            model::SegNetParams grads = model::zeros_like(params);
            Rng mask_rng(mask_seed);
            gmc::gmc_loss(params, x, y, 4, 0.5, mask_rng, &grads);

            Rng probe_rng(mask_seed);
            const gmc::PatchMask mask = gmc::sample_patch_mask(kSide, kSide, 4, 0.5, probe_rng);
            const Tensor xm = gmc::apply_mask(x, mask);
            ProbeFn probe = [&](const model::SegNetParams& p) {
                Probe out;
                model::ForwardCache c;
                const Tensor lg = model::forward(p, xm, &c);
                out.loss = seg_cross_entropy(lg, y).loss;
                push_signs(out.signs, c.a1);
                push_signs(out.signs, c.a2);
                push_signs(out.signs, c.a3);
                return out;
            };
            check_tensors(params, full_net_plans(params, grads, true), probe, rng,
                          suite.paths[1]);
        }

        Tensor f_raw({kDim});
        for (double& v : f_raw.data) v = rng.normal();
        const Tensor f_u = l2_normalize(f_raw);
        const plgcl::GaussianStats pos = random_stats(kDim, rng);
        std::vector<plgcl::GaussianStats> negs;
        for (int i = 0; i < 3; ++i) negs.push_back(random_stats(kDim, rng));

        {  // (c) contrastive loss w.r.t. the anchor embedding
            const Tensor analytic =
                plgcl::plgcl_loss(f_u, pos, negs, kTau, kZeta, kLambda).grad_f_u;
            const Tensor numeric = finite_difference_gradient(
                [&](const Tensor& f) {
                    return plgcl::plgcl_loss(f, pos, negs, kTau, kZeta, kLambda).loss;
                },
                f_u, kEps);
            suite.paths[2].max_rel_err =
                std::max(suite.paths[2].max_rel_err, rel_err(analytic, numeric));
            suite.paths[2].coords_checked += kDim;
        }

        {  // (d) contrastive loss w.r.t. the projection head (and encoder)
            const Tensor patch = random_image(kSide, kSide, rng);
            model::SegNetParams grads = model::zeros_like(params);
            model::EncodeCache cache;
            const Tensor emb = model::encode_project(params, patch, &cache);
            const plgcl::PlgclLossResult out =
                plgcl::plgcl_loss(emb, pos, negs, kTau, kZeta, kLambda);
            model::encode_project_backward(params, cache, out.grad_f_u, grads);

            ProbeFn probe = [&](const model::SegNetParams& p) {
                Probe pr;
                model::EncodeCache c;
                const Tensor e = model::encode_project(p, patch, &c);
                pr.loss = plgcl::plgcl_loss(e, pos, negs, kTau, kZeta, kLambda).loss;
                push_signs(pr.signs, c.a1);
                push_signs(pr.signs, c.a2);
                push_signs(pr.signs, c.a3);
                return pr;
            };
            std::vector<TensorPlan> plans = full_net_plans(params, grads, false);
            plans.push_back({"head_w", &params.head_w, &grads.head_w, 64});
            plans.push_back({"head_b", &params.head_b, &grads.head_b, 0});
            check_tensors(params, plans, probe, rng, suite.paths[3]);
        }
    }

    suite.pass = true;
    for (auto& p : suite.paths) {
        p.pass = p.max_rel_err < tolerance;
        if (!p.pass) suite.pass = false;
    }
    return suite;
}

}  // namespace synthgen::gradcheck
