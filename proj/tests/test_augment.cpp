#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "synthgen/augment.hpp"
#include "synthgen/rng.hpp"
#include "test_util.hpp"

using namespace synthgen;

TEST_CASE("resize_bilinear identity when sizes match") {
    Rng rng(5);
    const Tensor img = testutil::random_tensor({3, 6, 7}, rng, 0.0, 1.0);
    const Tensor out = aug::resize_bilinear(img, 6, 7);
    REQUIRE(out.shape == img.shape);
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-12));
}

TEST_CASE("resize_bilinear preserves constant images at any size") {
    const Tensor img = Tensor::full({3, 4, 4}, 0.37);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {2, 2}, {5, 3}, {1, 9}}) {
        const Tensor out = aug::resize_bilinear(img, h, w);
        REQUIRE(out.shape == std::vector<std::size_t>{3, h, w});
        for (auto v : out.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("resize_bilinear 2x upscale of a 2x1 gradient interpolates midpoints") {
    // Half-pixel centers: out row o maps to (o + .5)/2 - .5 = {-.25, .25, .75, 1.25},
    // clamped at the ends, so values are {0, 0.25, 0.75, 1} for a [0,1] column.
    const Tensor img = Tensor::from({1, 2, 1}, {0.0, 1.0});
    const Tensor out = aug::resize_bilinear(img, 4, 1);
    REQUIRE(out.shape == std::vector<std::size_t>{1, 4, 1});
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(0.25));
    CHECK(out[2] == doctest::Approx(0.75));
    CHECK(out[3] == doctest::Approx(1.0));
}

TEST_CASE("resize_nearest never invents class ids") {
    Rng rng(9);
    LabelMap y(5, 5);
    for (auto& v : y.v) v = std::uint8_t(rng.uniform_index(4) * 3);  // ids {0,3,6,9}
    std::set<int> allowed(y.v.begin(), y.v.end());

    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{10, 10}, {3, 3}, {7, 2}}) {
        const LabelMap out = aug::resize_nearest(y, h, w);
        REQUIRE(out.rows == h);
        REQUIRE(out.cols == w);
        for (auto v : out.v) CHECK(allowed.count(v) == 1);
    }

    // Identity size reproduces the map exactly.
    CHECK(aug::resize_nearest(y, 5, 5).v == y.v);
}

TEST_CASE("random_crop takes the same window from image and labels") {
    Rng rng(21);
    io::LabeledImage s;
    s.image = Tensor::zeros({3, 8, 8});
    s.labels = LabelMap(8, 8);
    // Tag every pixel with its coordinates so the window can be recovered.
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            s.image.at3(0, i, j) = double(i * 8 + j) / 64.0;
            s.labels(i, j) = std::uint8_t(i * 8 + j);
        }
    s.domain = "toy";

    for (int trial = 0; trial < 20; ++trial) {
        const io::LabeledImage c = aug::random_crop(s, 3, 5, rng);
        REQUIRE(c.image.shape == std::vector<std::size_t>{3, 3, 5});
        REQUIRE(c.labels.rows == 3);
        REQUIRE(c.labels.cols == 5);
        CHECK(c.domain == "toy");
        // The label at (0,0) reveals the offset; image must agree everywhere.
        const int base = c.labels(0, 0);
        const int oi = base / 8, oj = base % 8;
        CHECK(oi + 3 <= 8);
        CHECK(oj + 5 <= 8);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                CHECK(c.labels(i, j) == std::uint8_t((oi + i) * 8 + (oj + j)));
                CHECK(c.image.at3(0, i, j) ==
                      doctest::Approx(double((oi + i) * 8 + (oj + j)) / 64.0));
            }
    }
}

TEST_CASE("random_crop at full size is the identity; oversize throws") {
    Rng rng(2);
    io::LabeledImage s;
    s.image = testutil::random_tensor({3, 4, 4}, rng, 0, 1);
    s.labels = testutil::random_labels(4, 4, 5, rng);

    const io::LabeledImage c = aug::random_crop(s, 4, 4, rng);
    CHECK(c.image.data == s.image.data);
    CHECK(c.labels.v == s.labels.v);

    CHECK_THROWS(aug::random_crop(s, 5, 4, rng));
    CHECK_THROWS(aug::random_crop(s, 4, 9, rng));
}

TEST_CASE("color_jitter with unit ranges is the identity on in-range images") {
    Rng rng(8);
    const Tensor img = testutil::random_tensor({3, 5, 5}, rng, 0.1, 0.9);
    const Tensor out = aug::color_jitter(img, 1.0, 1.0, 1.0, 1.0, rng);
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-12));
}

TEST_CASE("color_jitter clamps to [0,1]") {
    Rng rng(13);
    const Tensor img = Tensor::full({3, 4, 4}, 0.9);
    for (int trial = 0; trial < 30; ++trial) {
        const Tensor out = aug::color_jitter(img, 1.5, 2.0, 0.5, 1.5, rng);
        for (auto v : out.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("color_jitter brightness scales pixels") {
    Rng rng(4);
    const Tensor img = Tensor::full({3, 2, 2}, 0.4);
    // Degenerate ranges pin the factors: brightness exactly 1.25, contrast 1.
    const Tensor out = aug::color_jitter(img, 1.25, 1.25, 1.0, 1.0, rng);
    for (auto v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("gaussian_blur keeps constants and stays in range") {
    const Tensor img = Tensor::full({3, 6, 6}, 0.42);
    const Tensor out = aug::gaussian_blur(img, 0.8);
    REQUIRE(out.shape == img.shape);
    for (auto v : out.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

    Rng rng(30);
    const Tensor noisy = testutil::random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    const Tensor smooth = aug::gaussian_blur(noisy, 1.0);
    for (auto v : smooth.data) {
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("gaussian_blur reduces high-frequency energy") {
    Rng rng(31);
    const Tensor noisy = testutil::random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    const Tensor smooth = aug::gaussian_blur(noisy, 1.0);
    auto tv = [](const Tensor& t) {  // total variation along rows
        double s = 0.0;
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t j = 0; j + 1 < 16; ++j)
                s += std::fabs(t.at3(0, i, j + 1) - t.at3(0, i, j));
        return s;
    };
    CHECK(tv(smooth) < tv(noisy));
}
