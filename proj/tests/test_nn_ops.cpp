#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "synthgen/nn_ops.hpp"
#include "synthgen/rng.hpp"
#include "test_util.hpp"

using namespace synthgen;
using testutil::rel_err;

TEST_CASE("softmax hand values") {
    const Tensor two = softmax(Tensor::from({1, 2}, {0.0, 0.0}), 1);
    CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(0.5).epsilon(1e-12));

    const Tensor skew = softmax(Tensor::from({1, 2}, {std::log(2.0), 0.0}), 1);
    CHECK(skew[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(skew[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and normalized") {
    Rng rng(11);
    Tensor x = testutil::random_tensor({4, 6}, rng, -5, 5);
    Tensor shifted = x;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 6; ++c) shifted.at2(r, c) += 123.0;

    const Tensor a = softmax(x, 1);
    const Tensor b = softmax(shifted, 1);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 6; ++c) s += a.at2(r, c);
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax along axis 0") {
    const Tensor x = Tensor::from({2, 1}, {0.0, std::log(3.0)});
    const Tensor p = softmax(x, 0);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("cross entropy hand values") {
    SUBCASE("confident correct prediction costs ~0") {
        const Tensor logits = Tensor::from({1, 2}, {50.0, 0.0});
        const auto r = cross_entropy(logits, {0});
        CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("uniform logits over K=4 cost ln 4") {
        const Tensor logits = Tensor::zeros({1, 4});
        const auto r = cross_entropy(logits, {2});
        CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("loss is never negative") {
        Rng rng(7);
        for (int trial = 0; trial < 20; ++trial) {
            const Tensor logits = testutil::random_tensor({3, 5}, rng, -4, 4);
            std::vector<int> labels{int(rng.uniform_index(5)), int(rng.uniform_index(5)),
                                    int(rng.uniform_index(5))};
            CHECK(cross_entropy(logits, labels).loss >= 0.0);
        }
    }
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(21);
    const std::vector<int> labels{1, 4, 0};
    Tensor logits = testutil::random_tensor({3, 5}, rng, -2, 2);
    const auto analytic = cross_entropy(logits, labels);

    const Tensor fd = finite_difference_gradient(
        [&](const Tensor& t) { return cross_entropy(t, labels).loss; }, logits);
    for (std::size_t i = 0; i < fd.numel(); ++i)
        CHECK(rel_err(analytic.grad_logits[i], fd[i]) < 1e-6);
}

TEST_CASE("cross entropy ignore handling") {
    Rng rng(33);
    Tensor logits = testutil::random_tensor({3, 4}, rng, -1, 1);

    SUBCASE("ignored rows contribute nothing and get zero gradient") {
        const auto r = cross_entropy(logits, {2, -1, 1}, -1);
        // Equivalent two-row problem.
        Tensor two = Tensor::zeros({2, 4});
        for (std::size_t c = 0; c < 4; ++c) {
            two.at2(0, c) = logits.at2(0, c);
            two.at2(1, c) = logits.at2(2, c);
        }
        const auto r2 = cross_entropy(two, {2, 1}, -1);
        CHECK(r.loss == doctest::Approx(r2.loss).epsilon(1e-12));
        for (std::size_t c = 0; c < 4; ++c) CHECK(r.grad_logits.at2(1, c) == 0.0);
    }
    SUBCASE("all rows ignored throws") {
        CHECK_THROWS(cross_entropy(logits, {-1, -1, -1}, -1));
    }
    SUBCASE("out-of-range label throws") {
        CHECK_THROWS(cross_entropy(logits, {0, 4, 1}, -1));
    }
}

TEST_CASE("seg cross entropy equals flattened row problem") {
    Rng rng(44);
    const Tensor logits = testutil::random_tensor({3, 2, 2}, rng, -2, 2);
    LabelMap y(2, 2);
    y(0, 0) = 1;
    y(0, 1) = 2;
    y(1, 0) = kIgnoreLabel;
    y(1, 1) = 0;

    const auto seg = seg_cross_entropy(logits, y);

    Tensor rows = Tensor::zeros({4, 3});
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) rows.at2(i * 2 + j, k) = logits.at3(k, i, j);
    const auto flat = cross_entropy(rows, {1, 2, -1, 0}, -1);

    CHECK(seg.loss == doctest::Approx(flat.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(seg.grad_logits.at3(k, i, j) ==
                      doctest::Approx(flat.grad_logits.at2(i * 2 + j, k)).epsilon(1e-12));
}

TEST_CASE("conv2d identity and bias behavior") {
    Rng rng(9);
    const Tensor x = testutil::random_tensor({1, 3, 3}, rng);

    SUBCASE("1x1 unit kernel reproduces the input") {
        const Tensor w = Tensor::from({1, 1, 1, 1}, {1.0});
        const Tensor b = Tensor::zeros({1});
        const Tensor y = conv2d(x, w, b, 1, 0);
        REQUIRE(y.shape == std::vector<std::size_t>{1, 3, 3});
        for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
    }
    SUBCASE("zero weights give the bias everywhere") {
        const Tensor w = Tensor::zeros({2, 1, 3, 3});
        const Tensor b = Tensor::from({2}, {0.5, -1.5});
        const Tensor y = conv2d(x, w, b, 1, 1);
        REQUIRE(y.shape == std::vector<std::size_t>{2, 3, 3});
        for (std::size_t i = 0; i < 9; ++i) CHECK(y[i] == 0.5);
        for (std::size_t i = 9; i < 18; ++i) CHECK(y[i] == -1.5);
    }
}

TEST_CASE("conv2d output size follows the floor formula") {
    const Tensor x = Tensor::zeros({1, 5, 5});
    const Tensor w = Tensor::zeros({1, 1, 3, 3});
    const Tensor b = Tensor::zeros({1});
    // floor((5 + 2*1 - 3)/2) + 1 = 3
    CHECK(conv2d(x, w, b, 2, 1).shape == std::vector<std::size_t>{1, 3, 3});
    // floor((5 - 3)/1) + 1 = 3
    CHECK(conv2d(x, w, b, 1, 0).shape == std::vector<std::size_t>{1, 3, 3});
    // floor((5 - 3)/2) + 1 = 2: stride 2 without padding drops the last column
    CHECK(conv2d(x, w, b, 2, 0).shape == std::vector<std::size_t>{1, 2, 2});
}

TEST_CASE("conv2d hand-computed 2x2 example") {
    //  x = [[1,2],[3,4]], w = [[1,0],[0,1]] (trace kernel), stride 1, no pad
    const Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    const Tensor w = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
    const Tensor b = Tensor::from({1}, {10.0});
    const Tensor y = conv2d(x, w, b, 1, 0);
    REQUIRE(y.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(y[0] == doctest::Approx(1 + 4 + 10));
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(61);
    const Tensor x = testutil::random_tensor({1, 5, 5}, rng);
    const Tensor w = testutil::random_tensor({2, 1, 3, 3}, rng);
    const Tensor b = testutil::random_tensor({2}, rng);
    const std::size_t stride = 2, padding = 1;

    // Scalar head: sum of conv output with fixed random coefficients.
    const Tensor y0 = conv2d(x, w, b, stride, padding);
    const Tensor coeff = testutil::random_tensor(y0.shape, rng);
    auto head = [&](const Tensor& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += coeff[i] * y[i];
        return s;
    };

    const auto grads = conv2d_backward(x, w, stride, padding, coeff);

    const Tensor fd_x = finite_difference_gradient(
        [&](const Tensor& t) { return head(conv2d(t, w, b, stride, padding)); }, x);
    const Tensor fd_w = finite_difference_gradient(
        [&](const Tensor& t) { return head(conv2d(x, t, b, stride, padding)); }, w);
    const Tensor fd_b = finite_difference_gradient(
        [&](const Tensor& t) { return head(conv2d(x, w, t, stride, padding)); }, b);

    for (std::size_t i = 0; i < fd_x.numel(); ++i) CHECK(rel_err(grads.dx[i], fd_x[i]) < 1e-5);
    for (std::size_t i = 0; i < fd_w.numel(); ++i) CHECK(rel_err(grads.dw[i], fd_w[i]) < 1e-5);
    for (std::size_t i = 0; i < fd_b.numel(); ++i) CHECK(rel_err(grads.db[i], fd_b[i]) < 1e-5);
}

TEST_CASE("relu clamps negatives and gates gradients") {
    const Tensor x = Tensor::from({4}, {-1.0, 2.0, 0.0, -0.5});
    const Tensor y = relu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 2.0);
    CHECK(y[2] == 0.0);
    CHECK(y[3] == 0.0);

    const Tensor dy = Tensor::from({4}, {5.0, 5.0, 5.0, 5.0});
    const Tensor dx = relu_backward(x, dy);
    CHECK(dx[0] == 0.0);
    CHECK(dx[1] == 5.0);
    CHECK(dx[3] == 0.0);
}

TEST_CASE("upsample_nearest_2x replicates pixels; backward sums blocks") {
    const Tensor one = Tensor::from({1, 1, 1}, {3.0});
    const Tensor up = upsample_nearest_2x(one);
    REQUIRE(up.shape == std::vector<std::size_t>{1, 2, 2});
    for (auto v : up.data) CHECK(v == 3.0);

    const Tensor dy = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    const Tensor dx = upsample_nearest_2x_backward(dy);
    REQUIRE(dx.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(dx[0] == 10.0);

    Rng rng(3);
    const Tensor x = testutil::random_tensor({2, 3, 4}, rng);
    const Tensor y = upsample_nearest_2x(x);
    REQUIRE(y.shape == std::vector<std::size_t>{2, 6, 8});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 8; ++j)
                CHECK(y.at3(c, i, j) == x.at3(c, i / 2, j / 2));
}

TEST_CASE("l2_normalize hand value, zero guard, gradient") {
    const Tensor v = Tensor::from({2}, {3.0, 4.0});
    const Tensor u = l2_normalize(v);
    CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-12));

    CHECK_THROWS(l2_normalize(Tensor::zeros({3})));

    Rng rng(77);
    const Tensor x = testutil::random_tensor({6}, rng, 0.5, 1.5);
    const Tensor coeff = testutil::random_tensor({6}, rng);
    auto head = [&](const Tensor& t) {
        const Tensor n = l2_normalize(t);
        double s = 0.0;
        for (std::size_t i = 0; i < n.numel(); ++i) s += coeff[i] * n[i];
        return s;
    };
    const Tensor analytic = l2_normalize_backward(x, coeff);
    const Tensor fd = finite_difference_gradient(head, x);
    for (std::size_t i = 0; i < fd.numel(); ++i) CHECK(rel_err(analytic[i], fd[i]) < 1e-6);
}

TEST_CASE("finite_difference_gradient on closed forms") {
    SUBCASE("d/dx x^2 at 3 is 6") {
        const Tensor x = Tensor::from({1}, {3.0});
        const Tensor g =
            finite_difference_gradient([](const Tensor& t) { return t[0] * t[0]; }, x);
        CHECK(std::fabs(g[0] - 6.0) < 1e-8);
    }
    SUBCASE("constant function has zero gradient") {
        const Tensor x = Tensor::from({3}, {1, 2, 3});
        const Tensor g = finite_difference_gradient([](const Tensor&) { return 4.2; }, x);
        for (auto v : g.data) CHECK(v == 0.0);
    }
    SUBCASE("sum of squares gives 2x") {
        Rng rng(15);
        const Tensor x = testutil::random_tensor({5}, rng, -2, 2);
        const Tensor g = finite_difference_gradient(
            [](const Tensor& t) {
                double s = 0.0;
                for (auto v : t.data) s += v * v;
                return s;
            },
            x);
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(g[i] - 2 * x[i]) < 1e-7);
    }
}
