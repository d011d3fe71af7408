#include "synthgen/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace synthgen {

namespace {
std::size_t product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(product(shape), 0.0) {}

Tensor Tensor::zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<std::size_t> s, double value) {
    Tensor t(std::move(s));
    t.fill(value);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> s, std::vector<double> values) {
    if (product(s) != values.size()) {
        throw std::runtime_error("Tensor::from: shape/data size mismatch");
    }
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(values);
    return t;
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape.size()) throw std::runtime_error("Tensor::dim: axis out of range");
    return shape[i];
}

double& Tensor::at2(std::size_t a, std::size_t b) { return data[a * shape[1] + b]; }
double Tensor::at2(std::size_t a, std::size_t b) const { return data[a * shape[1] + b]; }

double& Tensor::at3(std::size_t a, std::size_t b, std::size_t c) {
    return data[(a * shape[1] + b) * shape[2] + c];
}
double Tensor::at3(std::size_t a, std::size_t b, std::size_t c) const {
    return data[(a * shape[1] + b) * shape[2] + c];
}

double& Tensor::at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
}
double Tensor::at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
}

void Tensor::fill(double value) {
    for (double& x : data) x = value;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << ",";
        os << t.shape[i];
    }
    os << "]";
    return os.str();
}

void accumulate(Tensor& dst, const Tensor& src) {
    if (!same_shape(dst, src)) {
        throw std::runtime_error("accumulate: shape mismatch " + shape_str(dst) + " vs " +
                                 shape_str(src));
    }
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double x : t.data) {
        if (!std::isfinite(x)) {
            throw std::runtime_error("non-finite value in " + what);
        }
    }
}

bool same_shape(const LabelMap& a, const LabelMap& b) {
    return a.rows == b.rows && a.cols == b.cols;
}

}  // namespace synthgen
