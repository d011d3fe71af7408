#include "synthgen/plgcl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "synthgen/nn_ops.hpp"

namespace synthgen::plgcl {

Tensor confidence_maps(const Tensor& teacher_logits) {
    if (teacher_logits.ndim() != 3) {
        throw std::runtime_error("confidence_maps: expected [K,H,W], got " +
                                 shape_str(teacher_logits));
    }
    check_finite(teacher_logits, "confidence_maps input");
    return softmax(teacher_logits, 0);
}

Tensor attended_image(const Tensor& image, const Tensor& conf_k) {
    if (image.ndim() != 3 || image.dim(0) != 3) {
        throw std::runtime_error("attended_image: expected image [3,H,W], got " +
                                 shape_str(image));
    }
    if (conf_k.ndim() != 2 || conf_k.dim(0) != image.dim(1) || conf_k.dim(1) != image.dim(2)) {
        throw std::runtime_error("attended_image: confidence map " + shape_str(conf_k) +
                                 " does not match image " + shape_str(image));
    }
    Tensor out = image;
    const std::size_t hw = conf_k.numel();
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < hw; ++i) out.data[c * hw + i] *= conf_k.data[i];
    }
    return out;
}

double entropy_fn(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::runtime_error("entropy_fn: input must lie in [0,1]");
    }
    const double c = std::clamp(x, 1e-7, 1.0 - 1e-7);
    return -c * std::log(c) - (1.0 - c) * std::log(1.0 - c);
}

std::vector<PatchRecord> patch_statistics(const Tensor& conf_k, const Tensor& attended,
                                          std::size_t p, int cls) {
    const std::size_t h = conf_k.dim(0), w = conf_k.dim(1);
    if (attended.ndim() != 3 || attended.dim(0) != 3 || attended.dim(1) != h ||
        attended.dim(2) != w) {
        throw std::runtime_error("patch_statistics: attended image " + shape_str(attended) +
                                 " does not match confidence map " + shape_str(conf_k));
    }
    if (p < 1 || h % p != 0 || w % p != 0) throw std::runtime_error("patch grid misalignment");

    std::vector<PatchRecord> out;
    out.reserve((h / p) * (w / p));
    const std::size_t hw = h * w;
    const double inv = 1.0 / static_cast<double>(p * p);
    for (std::size_t gy = 0; gy < h / p; ++gy) {
        for (std::size_t gx = 0; gx < w / p; ++gx) {
            PatchRecord rec;
            rec.cls = cls;
            rec.row = gy * p;
            rec.col = gx * p;
            rec.size = p;
            rec.pixels = Tensor({3, p, p});
            double avg = 0.0, ent = 0.0;
            for (std::size_t dy = 0; dy < p; ++dy) {
                for (std::size_t dx = 0; dx < p; ++dx) {
                    const std::size_t pix = (rec.row + dy) * w + rec.col + dx;
                    avg += conf_k.data[pix];
                    const double r = attended.data[pix];
                    const double g = attended.data[hw + pix];
                    const double b = attended.data[2 * hw + pix];
                    ent += entropy_fn(luma(r, g, b));
                    for (std::size_t c = 0; c < 3; ++c) {
                        rec.pixels.data[(c * p + dy) * p + dx] = attended.data[c * hw + pix];
                    }
                }
            }
            rec.avg_confidence = avg * inv;
            rec.avg_entropy = ent * inv;
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<ClassPatchSet> sample_patches(const Tensor& image, const Tensor& conf,
                                          const PlgclConfig& cfg) {
    if (conf.ndim() != 3) {
        throw std::runtime_error("sample_patches: expected confidence [K,H,W], got " +
                                 shape_str(conf));
    }
    const std::size_t k = conf.dim(0), h = conf.dim(1), w = conf.dim(2);
    const std::size_t hw = h * w;

    std::vector<ClassPatchSet> sets;
    for (std::size_t cls = 0; cls < k; ++cls) {
        Tensor conf_k({h, w});
        std::copy_n(conf.data.begin() + static_cast<std::ptrdiff_t>(cls * hw), hw,
                    conf_k.data.begin());
        Tensor attended = attended_image(image, conf_k);
        std::vector<PatchRecord> patches =
            patch_statistics(conf_k, attended, cfg.patch, static_cast<int>(cls));

        // Rank by confidence, stable spatial tie-break: top-left wins.
        std::sort(patches.begin(), patches.end(), [](const PatchRecord& a, const PatchRecord& b) {
            if (a.avg_confidence != b.avg_confidence) return a.avg_confidence > b.avg_confidence;
            if (a.row != b.row) return a.row < b.row;
            return a.col < b.col;
        });
        if (patches.front().avg_confidence < cfg.presence_threshold) continue;

        ClassPatchSet set;
        set.cls = static_cast<int>(cls);
        set.anchor = patches.front();
        const std::size_t pool = std::min(cfg.cap, patches.size() - 1);
        set.candidates.assign(patches.begin() + 1, patches.begin() + 1 + static_cast<std::ptrdiff_t>(pool));

        std::vector<std::size_t> order(set.candidates.size());
        std::iota(order.begin(), order.end(), 0);
        const double ent0 = set.anchor.avg_entropy;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = std::abs(set.candidates[a].avg_entropy - ent0);
            const double db = std::abs(set.candidates[b].avg_entropy - ent0);
            if (da != db) return da < db;
            if (set.candidates[a].row != set.candidates[b].row) {
                return set.candidates[a].row < set.candidates[b].row;
            }
            return set.candidates[a].col < set.candidates[b].col;
        });
        for (std::size_t i = 0; i < std::min(cfg.n_nearest, order.size()); ++i) {
            set.positives.push_back(set.candidates[order[i]]);
        }
        sets.push_back(std::move(set));
    }

    if (sets.size() < 2) return {};  // skip signal: contrastive term has no negatives
    return sets;
}

std::vector<const PatchRecord*> negatives_for(const std::vector<ClassPatchSet>& sets,
                                              std::size_t idx) {
    std::vector<const PatchRecord*> negs;
    for (std::size_t j = 0; j < sets.size(); ++j) {
        if (j == idx) continue;
        negs.push_back(&sets[j].anchor);
        for (const auto& cand : sets[j].candidates) negs.push_back(&cand);
    }
    return negs;
}

std::vector<Tensor> embed_patches(const model::SegNetParams& params,
                                  const std::vector<PatchRecord>& patches) {
    std::vector<Tensor> out;
    out.reserve(patches.size());
    for (const auto& rec : patches) out.push_back(model::encode_project(params, rec.pixels));
    return out;
}

namespace {

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace

double infonce_loss(const Tensor& f_u, const std::vector<Tensor>& positives,
                    const std::vector<Tensor>& negatives, double tau) {
    if (positives.empty()) throw std::runtime_error("infonce_loss: empty positive set");
    if (negatives.empty()) throw std::runtime_error("infonce_loss: empty negative set");
    if (tau <= 0.0) throw std::runtime_error("infonce_loss: temperature must be positive");

    std::vector<double> neg_dots(negatives.size());
    for (std::size_t i = 0; i < negatives.size(); ++i) neg_dots[i] = dot(f_u, negatives[i]) / tau;

    double total = 0.0;
    for (const Tensor& fp : positives) {
        const double ap = dot(f_u, fp) / tau;
        double m = ap;
        for (double an : neg_dots) m = std::max(m, an);
        double z = std::exp(ap - m);
        for (double an : neg_dots) z += std::exp(an - m);
        total += m + std::log(z) - ap;  // -ln(exp(ap)/Z)
    }
    return total / static_cast<double>(positives.size());
}

GaussianStats gaussian_stats(const std::vector<Tensor>& embeddings) {
    if (embeddings.empty()) throw std::runtime_error("gaussian_stats: empty embedding set");
    const std::size_t d = embeddings.front().numel();
    GaussianStats s;
    s.mean = Tensor::zeros({d});
    s.var = Tensor::zeros({d});
    for (const Tensor& e : embeddings) {
        if (e.numel() != d) throw std::runtime_error("gaussian_stats: mixed embedding sizes");
        for (std::size_t i = 0; i < d; ++i) s.mean.data[i] += e.data[i];
    }
    const double inv = 1.0 / static_cast<double>(embeddings.size());
    for (std::size_t i = 0; i < d; ++i) s.mean.data[i] *= inv;
    for (const Tensor& e : embeddings) {
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = e.data[i] - s.mean.data[i];
            s.var.data[i] += diff * diff;
        }
    }
    for (std::size_t i = 0; i < d; ++i) s.var.data[i] *= inv;
    return s;
}

PlgclLossResult plgcl_loss(const Tensor& f_u, const GaussianStats& pos,
                           const std::vector<GaussianStats>& negs, double tau, double zeta,
                           double lambda) {
    if (tau <= 0.0) throw std::runtime_error("plgcl_loss: temperature must be positive");
    const std::size_t d = f_u.numel();
    if (pos.mean.numel() != d) {
        throw std::runtime_error("plgcl_loss: positive stats dimension mismatch");
    }

    // Exponent of one Gaussian's moment term: a + q with a = f_u.mean/tau,
    // q = (lambda/(2 tau^2)) sum_d f_d^2 var_d.
    const double var_scale = lambda / (2.0 * tau * tau);
    auto exponent = [&](const GaussianStats& g) {
        double a = 0.0, q = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            a += f_u.data[i] * g.mean.data[i];
            q += f_u.data[i] * f_u.data[i] * g.var.data[i];
        }
        return a / tau + var_scale * q;
    };

    const double e_pos = exponent(pos);
    std::vector<double> e_neg(negs.size());
    double m = e_pos;
    for (std::size_t k = 0; k < negs.size(); ++k) {
        if (negs[k].mean.numel() != d) {
            throw std::runtime_error("plgcl_loss: negative stats dimension mismatch");
        }
        e_neg[k] = exponent(negs[k]);
        m = std::max(m, e_neg[k]);
    }

    const double w_pos = std::exp(e_pos - m);
    std::vector<double> w_neg(negs.size());
    double z = w_pos;
    for (std::size_t k = 0; k < negs.size(); ++k) {
        w_neg[k] = zeta * std::exp(e_neg[k] - m);
        z += w_neg[k];
    }

    double a_pos = 0.0;
    for (std::size_t i = 0; i < d; ++i) a_pos += f_u.data[i] * pos.mean.data[i];
    a_pos /= tau;

    PlgclLossResult r;
    r.loss = m + std::log(z) - a_pos;

    // d(exponent)/df = mean/tau + (lambda/tau^2) f (.) var; mix with softmax
    // weights w/Z, then subtract the gradient of the trailing a+ term.
    r.grad_f_u = Tensor::zeros({d});
    const double grad_var_scale = lambda / (tau * tau);
    for (std::size_t i = 0; i < d; ++i) {
        double g = w_pos * (pos.mean.data[i] / tau + grad_var_scale * f_u.data[i] * pos.var.data[i]);
        for (std::size_t k = 0; k < negs.size(); ++k) {
            g += w_neg[k] *
                 (negs[k].mean.data[i] / tau + grad_var_scale * f_u.data[i] * negs[k].var.data[i]);
        }
        r.grad_f_u.data[i] = g / z - pos.mean.data[i] / tau;
    }
    return r;
}

McBoundResult mc_upper_bound_check(const Tensor& f_u, const std::vector<Tensor>& pos_samples,
                                   const std::vector<std::vector<Tensor>>& neg_samples,
                                   double tau, std::size_t trials, Rng& rng) {
    if (trials < 2) throw std::runtime_error("mc_upper_bound_check: need at least 2 trials");
    const GaussianStats pos = gaussian_stats(pos_samples);
    std::vector<GaussianStats> negs;
    negs.reserve(neg_samples.size());
    for (const auto& s : neg_samples) negs.push_back(gaussian_stats(s));

    McBoundResult r;
    r.l_closed = plgcl_loss(f_u, pos, negs, tau, 1.0, 1.0).loss;

    const std::size_t d = f_u.numel();
    std::vector<double> neg_sd(negs.size() * d), pos_sd(d);
    for (std::size_t i = 0; i < d; ++i) pos_sd[i] = std::sqrt(pos.var.data[i]);
    for (std::size_t k = 0; k < negs.size(); ++k) {
        for (std::size_t i = 0; i < d; ++i) neg_sd[k * d + i] = std::sqrt(negs[k].var.data[i]);
    }

    // Draws are raw Gaussian vectors; re-normalizing them would estimate a
    // different expectation than the closed form bounds.
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> neg_dots(negs.size());
    for (std::size_t t = 0; t < trials; ++t) {
        double ap = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            ap += f_u.data[i] * (pos.mean.data[i] + pos_sd[i] * rng.normal());
        }
        ap /= tau;
        double m = ap;
        for (std::size_t k = 0; k < negs.size(); ++k) {
            double an = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                an += f_u.data[i] * (negs[k].mean.data[i] + neg_sd[k * d + i] * rng.normal());
            }
            neg_dots[k] = an / tau;
            m = std::max(m, neg_dots[k]);
        }
        double z = std::exp(ap - m);
        for (double an : neg_dots) z += std::exp(an - m);
        const double loss = m + std::log(z) - ap;
        sum += loss;
        sum_sq += loss * loss;
    }
    const double n = static_cast<double>(trials);
    r.l_mc = sum / n;
    const double var = std::max(0.0, sum_sq / n - r.l_mc * r.l_mc);
    r.se = std::sqrt(var / n);
    r.gap = r.l_closed - r.l_mc;
    return r;
}

}  // namespace synthgen::plgcl
