#pragma once

// Shared helpers for the unit tests: tiny tensor builders, relative error,
// and scratch directories that clean up after themselves.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "synthgen/rng.hpp"
#include "synthgen/tensor.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
    const double denom = std::max({std::fabs(got), std::fabs(want), 1e-12});
    return std::fabs(got - want) / denom;
}

inline synthgen::Tensor random_tensor(std::vector<std::size_t> shape, synthgen::Rng& rng,
                                      double lo = -1.0, double hi = 1.0) {
    synthgen::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline synthgen::LabelMap random_labels(std::size_t rows, std::size_t cols, int classes,
                                        synthgen::Rng& rng) {
    synthgen::LabelMap y(rows, cols);
    for (auto& v : y.v) v = static_cast<std::uint8_t>(rng.uniform_index(classes));
    return y;
}

// Unique scratch directory under the system temp dir, removed on destruction.
struct ScratchDir {
    std::filesystem::path path;

    explicit ScratchDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("synthgen_test_" + tag + "_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
