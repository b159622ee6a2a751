#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "asme/rng.hpp"

using namespace asme;

TEST_CASE("xoshiro sequences are seed-deterministic", "[rng]") {
    Xoshiro256StarStar a(42), b(42), c(43);
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        all_equal &= x == b();
        any_diff |= x != c();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("run-seed derivation separates runs and bases", "[rng]") {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t base : {0ULL, 1ULL, 42ULL})
        for (std::uint64_t run = 0; run < 100; ++run) seeds.insert(derive_run_seed(base, run));
    CHECK(seeds.size() == 300);
    CHECK(derive_run_seed(5, 7) == derive_run_seed(5, 7));
}

TEST_CASE("uniform01 stays in [0,1) and looks uniform", "[rng]") {
    Xoshiro256StarStar rng(7);
    double sum = 0.0;
    double lo = 1.0, hi = -1.0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        sum += u;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(std::fabs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_below respects the bound and is roughly flat", "[rng]") {
    Xoshiro256StarStar rng(11);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100'000; ++i) {
        const auto v = rng.uniform_below(10);
        REQUIRE(v < 10);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) CHECK(std::fabs(c - 10'000) < 600);
}

TEST_CASE("shuffle produces a permutation", "[rng]") {
    Xoshiro256StarStar rng(3);
    std::vector<int> values(257);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<int>(i);
    shuffle(values, rng);
    std::set<int> seen(values.begin(), values.end());
    CHECK(seen.size() == values.size());
}

TEST_CASE("normal deviates have the requested moments", "[rng]") {
    Xoshiro256StarStar rng(19);
    const int n = 200'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(3.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean - 3.0) < 0.02);
    CHECK(std::fabs(var - 4.0) < 0.08);
}
