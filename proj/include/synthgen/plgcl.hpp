#pragma once

#include <cstdint>
#include <vector>

#include "synthgen/model.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace synthgen::plgcl {

// Per-pixel per-class probabilities (softmax of teacher logits over the
// class axis). Each pixel's column sums to 1.
Tensor confidence_maps(const Tensor& teacher_logits);

// I'(ch,i,j) = I(ch,i,j) * conf(i,j): one class's confidence map broadcast
// over the RGB channels.
Tensor attended_image(const Tensor& image, const Tensor& conf_k);

// Binary entropy F(x) = -x ln x - (1-x) ln(1-x), x clamped to
// [1e-7, 1-1e-7] before the logs. Throws if x is outside [0,1].
double entropy_fn(double x);

// Rec. 601 luma; maps an RGB pixel in [0,1]^3 to a scalar in [0,1].
inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// One grid-aligned p x p patch of a class's attended image: where it sits,
// its mean confidence, the mean binary entropy of its luma, and its pixels
// (payload for the embedding network).
struct PatchRecord {
    int cls = -1;
    std::size_t row = 0, col = 0;  // top-left corner
    std::size_t size = 0;          // p
    double avg_confidence = 0.0;
    double avg_entropy = 0.0;
    Tensor pixels;  // [3,p,p] from the attended image
};

// Statistics of every patch on the non-overlapping p-grid. Throws
// "patch grid misalignment" unless p divides both sides.
std::vector<PatchRecord> patch_statistics(const Tensor& conf_k, const Tensor& attended,
                                          std::size_t p, int cls = -1);

struct PlgclConfig {
    double temperature = 0.07;       // tau
    double zeta = 1.0;               // negative-sum scale
    std::size_t patch = 8;           // p
    std::size_t cap = 8;             // J: candidate patches per class
    std::size_t n_nearest = 2;       // n: positives per anchor
    std::size_t embed_dim = 32;      // D
    double presence_threshold = 0.5; // class counts as present iff max Avg >= this
    bool lambda_ramp = true;         // lambda: 0 -> 1 over adaptation; else fixed 1
};

// A present class's contrastive cast. The anchor maximizes Avg (ties go to
// the top-left-most patch); candidates are the next <= J patches by Avg;
// positives are the n candidates whose Ent lies nearest the anchor's. For
// class k the negatives are the anchors and candidates of every OTHER
// entry in the sampled set.
struct ClassPatchSet {
    int cls = -1;
    PatchRecord anchor;
    std::vector<PatchRecord> candidates;
    std::vector<PatchRecord> positives;
};

// Builds the per-class patch sets for every class whose best patch clears
// the presence threshold. An empty result is the skip signal: fewer than
// two classes are present, so the contrastive term has no negatives and
// must be skipped this step.
std::vector<ClassPatchSet> sample_patches(const Tensor& image, const Tensor& conf,
                                          const PlgclConfig& cfg);

// Flattened negative pool for sets[idx]: anchor + candidates of every other
// class, in set order.
std::vector<const PatchRecord*> negatives_for(const std::vector<ClassPatchSet>& sets,
                                              std::size_t idx);

// Unit-norm embeddings of each patch payload through the encoder + head.
std::vector<Tensor> embed_patches(const model::SegNetParams& params,
                                  const std::vector<PatchRecord>& patches);

// Eq.-9-style InfoNCE: mean over positives of
//   -ln( exp(f_u.f+/tau) / (exp(f_u.f+/tau) + sum_neg exp(f_u.f-/tau)) ).
// Throws on an empty positive or negative set.
double infonce_loss(const Tensor& f_u, const std::vector<Tensor>& positives,
                    const std::vector<Tensor>& negatives, double tau);

// Diagonal Gaussian fitted to a set of embeddings: elementwise mean and
// population variance (zero for singletons). Throws on an empty set.
struct GaussianStats {
    Tensor mean;  // [D]
    Tensor var;   // [D], >= 0
};

GaussianStats gaussian_stats(const std::vector<Tensor>& embeddings);

// Closed-form contrastive loss over fitted Gaussians:
//   L = ln( exp(a+ + q+) + zeta * sum_k exp(a-_k + q-_k) ) - a+
// with a = f_u.mean/tau and q = (lambda/(2 tau^2)) * sum_d f_u_d^2 var_d.
// The log-sum-exp is max-shifted. Returns the analytic gradient w.r.t. f_u
// (treating all Gaussian statistics as constants).
struct PlgclLossResult {
    double loss = 0.0;
    Tensor grad_f_u;
};

PlgclLossResult plgcl_loss(const Tensor& f_u, const GaussianStats& pos,
                           const std::vector<GaussianStats>& negs, double tau, double zeta,
                           double lambda);

// Monte-Carlo audit of the closed form: fits Gaussians to the given sample
// sets, estimates the expected sampled InfoNCE by drawing raw (not
// re-normalized) Gaussian embeddings, and compares against the closed form
// at lambda=1, zeta=1. gap = l_closed - l_mc; se is the MC standard error.
struct McBoundResult {
    double l_mc = 0.0;
    double l_closed = 0.0;
    double gap = 0.0;
    double se = 0.0;
};

McBoundResult mc_upper_bound_check(const Tensor& f_u, const std::vector<Tensor>& pos_samples,
                                   const std::vector<std::vector<Tensor>>& neg_samples,
                                   double tau, std::size_t trials, Rng& rng);

}  // namespace synthgen::plgcl
