#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace synthgen {

// Dense row-major tensor of 64-bit floats. Shape is explicit; no implicit
// broadcasting. Doubles throughout: the gradient checks need the precision
// and everything here runs at desk scale.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);

    static Tensor zeros(std::vector<std::size_t> s);
    static Tensor full(std::vector<std::size_t> s, double value);
    static Tensor from(std::vector<std::size_t> s, std::vector<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t dim(std::size_t i) const;

    double operator[](std::size_t i) const { return data[i]; }
    double& operator[](std::size_t i) { return data[i]; }

    // Indexed access for 2-d/3-d/4-d tensors; kernels on hot paths compute
    // offsets directly.
    double& at2(std::size_t a, std::size_t b);
    double at2(std::size_t a, std::size_t b) const;
    double& at3(std::size_t a, std::size_t b, std::size_t c);
    double at3(std::size_t a, std::size_t b, std::size_t c) const;
    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d);
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const;

    void fill(double value);
};

bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_str(const Tensor& t);

// dst += src elementwise; throws on shape mismatch.
void accumulate(Tensor& dst, const Tensor& src);

// Throws std::runtime_error naming `what` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

// Per-pixel class-index map. 255 is the ignore sentinel (cropped borders,
// pixels excluded from losses and metrics).
inline constexpr std::uint8_t kIgnoreLabel = 255;

struct LabelMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> v;

    LabelMap() = default;
    LabelMap(std::size_t r, std::size_t c, std::uint8_t value = 0)
        : rows(r), cols(c), v(r * c, value) {}

    std::uint8_t operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::uint8_t& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    std::size_t size() const { return v.size(); }
};

bool same_shape(const LabelMap& a, const LabelMap& b);

}  // namespace synthgen
