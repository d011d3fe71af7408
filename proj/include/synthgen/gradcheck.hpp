#pragma once

#include <string>
#include <vector>

#include "synthgen/tensor.hpp"

namespace synthgen::gradcheck {

// Length-normalized relative error ||a - b|| / (||a|| + ||b||), computed
// over the flattened tensors; 0 when both are zero.
double rel_err(const Tensor& a, const Tensor& b);
double rel_err(const std::vector<double>& a, const std::vector<double>& b);

struct PathResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
    std::size_t coords_skipped = 0;  // finite-difference window crossed a ReLU kink
    bool pass = false;
};

struct SuiteResult {
    std::vector<PathResult> paths;
    double tolerance = 0.0;
    bool pass = false;
};

// Verifies every analytic gradient path against central finite differences
// on random 8x8 inputs: segmentation cross-entropy through the full
// network, the masked-consistency loss, the contrastive loss w.r.t. the
// anchor embedding, and the contrastive loss w.r.t. the projection head.
// Large weight tensors are checked on a deterministic random subset of
// coordinates; coordinates whose probe window flips a ReLU sign are skipped
// (the loss is not differentiable there) and counted.
SuiteResult run_suite(std::size_t seeds, double tolerance = 1e-5);

}  // namespace synthgen::gradcheck
