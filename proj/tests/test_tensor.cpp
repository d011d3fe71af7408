#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "synthgen/tensor.hpp"

using namespace synthgen;

TEST_CASE("construction and element access") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.ndim() == 2);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

    t.at2(1, 2) = 7.5;
    CHECK(t[5] == 7.5);  // row-major: (1,2) -> 1*3 + 2
    CHECK(t.at2(1, 2) == 7.5);
}

TEST_CASE("factories") {
    const Tensor z = Tensor::zeros({4});
    for (auto v : z.data) CHECK(v == 0.0);

    const Tensor f = Tensor::full({2, 2}, 3.25);
    for (auto v : f.data) CHECK(v == 3.25);

    const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(m.at2(0, 0) == 1);
    CHECK(m.at2(0, 1) == 2);
    CHECK(m.at2(1, 0) == 3);
    CHECK(m.at2(1, 1) == 4);
    CHECK_THROWS(Tensor::from({2, 2}, {1, 2, 3}));  // value count must match shape
}

TEST_CASE("row-major layout for 3-d and 4-d access") {
    Tensor t({2, 3, 4});
    t.at3(1, 2, 3) = 9.0;
    CHECK(t[1 * 12 + 2 * 4 + 3] == 9.0);

    Tensor u({2, 2, 2, 2});
    u.at4(1, 0, 1, 0) = 5.0;
    CHECK(u[1 * 8 + 0 * 4 + 1 * 2 + 0] == 5.0);
}

TEST_CASE("fill overwrites everything") {
    Tensor t = Tensor::from({3}, {1, 2, 3});
    t.fill(-2.0);
    for (auto v : t.data) CHECK(v == -2.0);
}

TEST_CASE("same_shape") {
    CHECK(same_shape(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})));
    CHECK_FALSE(same_shape(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})));
    CHECK_FALSE(same_shape(Tensor::zeros({6}), Tensor::zeros({2, 3})));
}

TEST_CASE("accumulate adds elementwise and validates shape") {
    Tensor dst = Tensor::from({2}, {1, 2});
    accumulate(dst, Tensor::from({2}, {10, 20}));
    CHECK(dst[0] == 11);
    CHECK(dst[1] == 22);
    Tensor wrong = Tensor::zeros({3});
    CHECK_THROWS(accumulate(dst, wrong));
}

TEST_CASE("check_finite flags NaN and infinity by name") {
    Tensor ok = Tensor::from({2}, {1.0, -2.0});
    CHECK_NOTHROW(check_finite(ok, "ok"));

    Tensor bad = Tensor::from({2}, {1.0, std::nan("")});
    CHECK_THROWS_WITH_AS(check_finite(bad, "gradient"),
                         doctest::Contains("gradient"), std::runtime_error);

    Tensor inf = Tensor::from({1}, {std::numeric_limits<double>::infinity()});
    CHECK_THROWS(check_finite(inf, "x"));
}

TEST_CASE("label map basics and ignore sentinel") {
    CHECK(kIgnoreLabel == 255);
    LabelMap y(2, 3, 7);
    CHECK(y.rows == 2);
    CHECK(y.cols == 3);
    CHECK(y.size() == 6);
    for (auto v : y.v) CHECK(v == 7);
    y(1, 2) = 4;
    CHECK(y.v[5] == 4);
    CHECK(same_shape(y, LabelMap(2, 3)));
    CHECK_FALSE(same_shape(y, LabelMap(3, 2)));
}
