#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "synthgen/rng.hpp"

using namespace synthgen;

TEST_CASE("same seed, same sequence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("derived streams are independent of each other and the parent") {
    Rng parent(7);
    Rng s0 = Rng::derive(7, 0);
    Rng s1 = Rng::derive(7, 1);
    CHECK(s0.next_u64() != s1.next_u64());

    // Deriving must not depend on parent consumption: repeat derivation gives
    // a fresh identical stream.
    Rng s0_again = Rng::derive(7, 0);
    Rng s0_fresh = Rng::derive(7, 0);
    for (int i = 0; i < 16; ++i) CHECK(s0_again.next_u64() == s0_fresh.next_u64());
    (void)parent;
}

TEST_CASE("uniform lands in [0,1) with mean 1/2") {
    Rng rng(123);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    // Monte-Carlo check: sd of the mean is 1/sqrt(12 n) ~ 0.0009, so 0.005
    // is over five sigmas.
    CHECK(std::fabs(sum / n - 0.5) < 0.005);
}

TEST_CASE("ranged uniform respects bounds") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("normal matches standard moments") {
    Rng rng(99);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("uniform_index covers [0,n) evenly") {
    Rng rng(17);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = rng.uniform_index(5);
        REQUIRE(k < 5);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::fabs(c / double(n) - 0.2) < 0.01);
    // n = 1 is the degenerate-but-legal case.
    for (int i = 0; i < 10; ++i) CHECK(rng.uniform_index(1) == 0);
}

TEST_CASE("choose_subset returns ascending subsets and validates m") {
    Rng rng(3);
    const std::vector<int> set{4, 1, 7, 2};

    SUBCASE("full-size subset is the whole set, sorted") {
        const auto s = rng.choose_subset(set, 4);
        CHECK(s == std::vector<int>{1, 2, 4, 7});
    }
    SUBCASE("oversized request throws") { CHECK_THROWS(rng.choose_subset(set, 5)); }
    SUBCASE("empty subset is allowed") { CHECK(rng.choose_subset(set, 0).empty()); }
    SUBCASE("subsets are ascending and drawn from the set") {
        for (int i = 0; i < 200; ++i) {
            const auto s = rng.choose_subset(set, 2);
            REQUIRE(s.size() == 2);
            CHECK(s[0] < s[1]);
            for (int v : s)
                CHECK(std::find(set.begin(), set.end(), v) != set.end());
        }
    }
}

TEST_CASE("choose_subset is uniform over elements") {
    // Drawing 2 of 5 elements 10^4 times: each element should appear with
    // frequency 2/5 within a tolerance of a few sigmas.
    Rng rng(31);
    const std::vector<int> set{0, 1, 2, 3, 4};
    std::map<int, int> hits;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        for (int v : rng.choose_subset(set, 2)) ++hits[v];
    for (int v : set) CHECK(std::fabs(hits[v] / double(n) - 0.4) < 0.02);
}
