#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "asme/dynamics.hpp"
#include "asme/rng.hpp"

using namespace asme;
using namespace asme::dynamics;
using Catch::Approx;

namespace {

std::vector<double> logistic_map(std::size_t n, double x0 = 0.123456) {
    std::vector<double> x(n);
    x[0] = x0;
    for (std::size_t i = 1; i < n; ++i) x[i] = 4.0 * x[i - 1] * (1.0 - x[i - 1]);
    return x;
}

std::vector<double> uniform_noise(std::size_t n, std::uint64_t seed) {
    Xoshiro256StarStar rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform01();
    return x;
}

}  // namespace

TEST_CASE("delay embedding lays out lagged coordinates", "[dynamics]") {
    const std::vector<double> series{1, 2, 3, 4, 5};
    SECTION("m=2 tau=1") {
        const auto emb = delay_embed(series, {2, 1});
        REQUIRE(emb.count == 4);
        CHECK(emb.point(0)[0] == 1.0);
        CHECK(emb.point(0)[1] == 2.0);
        CHECK(emb.point(3)[0] == 4.0);
        CHECK(emb.point(3)[1] == 5.0);
    }
    SECTION("m=2 tau=2") {
        const auto emb = delay_embed(series, {2, 2});
        REQUIRE(emb.count == 3);
        CHECK(emb.point(0)[0] == 1.0);
        CHECK(emb.point(0)[1] == 3.0);
        CHECK(emb.point(2)[0] == 3.0);
        CHECK(emb.point(2)[1] == 5.0);
    }
    SECTION("m=1 is the identity for any delay") {
        const auto emb = delay_embed(series, {1, 3});
        REQUIRE(emb.count == 5);
        for (std::size_t i = 0; i < 5; ++i) CHECK(emb.point(i)[0] == series[i]);
    }
    SECTION("too-short series throws") {
        CHECK_THROWS_AS(delay_embed(std::vector<double>{1, 2, 3}, {4, 1}), SeriesTooShort);
    }
}

TEST_CASE("poincare projections cover every coordinate pair", "[dynamics]") {
    const auto series = uniform_noise(300, 3);
    CHECK(poincare_points(series, 2, 5).size() == 1);
    const auto sets = poincare_points(series, 4, 5);
    CHECK(sets.size() == 6);  // C(4,2)
    for (const auto& proj : sets) {
        CHECK(proj.coord_a < proj.coord_b);
        CHECK(proj.points.size() == 300 - 3 * 5);
    }
    SECTION("a constant series projects to one repeated point") {
        const std::vector<double> flat(100, 2.5);
        const auto p = poincare_points(flat, 2, 3);
        for (const auto& [x, y] : p[0].points) {
            CHECK(x == 2.5);
            CHECK(y == 2.5);
        }
    }
}

TEST_CASE("correlation dimension recovers known set dimensions", "[dynamics]") {
    SECTION("evenly spaced points on a line have dimension 1") {
        std::vector<double> line(2000);
        for (std::size_t i = 0; i < line.size(); ++i) line[i] = 0.01 * static_cast<double>(i);
        const auto curve = correlation_dimension(line, {2, 1});
        REQUIRE(curve.fitted_slope.has_value());
        CHECK(*curve.fitted_slope == Approx(1.0).margin(0.1));
    }
    SECTION("iid noise fills the m=2 embedding") {
        const auto curve = correlation_dimension(uniform_noise(2000, 77), {2, 1});
        REQUIRE(curve.fitted_slope.has_value());
        CHECK(*curve.fitted_slope == Approx(2.0).margin(0.2));
    }
}

TEST_CASE("correlation sum is monotone and saturates at one", "[dynamics]") {
    const auto series = uniform_noise(500, 12);
    std::vector<double> radii;
    for (int i = 0; i < 20; ++i) radii.push_back(0.01 * std::pow(1.5, i));
    const auto curve = correlation_dimension(series, {2, 1}, radii);
    for (std::size_t i = 1; i < curve.c_values.size(); ++i)
        CHECK(curve.c_values[i] >= curve.c_values[i - 1]);
    CHECK(curve.c_values.back() == Approx(1.0));
    for (double c : curve.c_values) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("correlation dimension is affine invariant", "[dynamics]") {
    const auto base = uniform_noise(1200, 9);
    std::vector<double> mapped(base);
    for (double& v : mapped) v = 3.0 * v - 7.0;
    const auto c1 = correlation_dimension(base, {2, 1});
    const auto c2 = correlation_dimension(mapped, {2, 1});
    REQUIRE(c1.fitted_slope.has_value());
    REQUIRE(c2.fitted_slope.has_value());
    CHECK(*c1.fitted_slope == Approx(*c2.fitted_slope).epsilon(1e-6));
}

TEST_CASE("correlation dimension degenerate cases", "[dynamics]") {
    SECTION("constant series") {
        CHECK_THROWS_AS(correlation_dimension(std::vector<double>(200, 1.0), {2, 1}),
                        DegenerateInput);
    }
    SECTION("two-cluster staircase has no scaling region") {
        std::vector<double> stair(400);
        for (std::size_t i = 0; i < stair.size(); ++i)
            stair[i] = static_cast<double>(i % 2) * 100.0 + 0.001 * static_cast<double>(i % 7);
        const auto curve = correlation_dimension(stair, {2, 1});
        CHECK_FALSE(curve.fitted_slope.has_value());
        CHECK_FALSE(curve.c_values.empty());  // the curve itself is still returned
    }
}

TEST_CASE("approximate entropy separates regular from irregular series", "[dynamics]") {
    SECTION("constant series is perfectly regular") {
        CHECK(approx_entropy(std::vector<double>(500, 3.3), 2) == 0.0);
    }
    SECTION("iid noise is irregular") {
        CHECK(approx_entropy(uniform_noise(2000, 5), 2) > 1.0);
    }
    SECTION("affine maps leave the std-relative default unchanged") {
        const auto x = uniform_noise(400, 6);
        std::vector<double> y(x);
        for (double& v : y) v = 2.0 * v + 5.0;  // exact in binary arithmetic
        CHECK(approx_entropy(x, 2) == Approx(approx_entropy(y, 2)).margin(1e-9));
    }
}

TEST_CASE("sample entropy matches its defining cases", "[dynamics]") {
    SECTION("constant series") {
        const auto s = sample_entropy(std::vector<double>(300, 1.0), 2);
        REQUIRE(s.has_value());
        CHECK(*s == 0.0);
    }
    SECTION("strict 2-periodic series: every match extends") {
        std::vector<double> periodic(400);
        for (std::size_t i = 0; i < periodic.size(); ++i)
            periodic[i] = static_cast<double>(i % 2);
        const auto s = sample_entropy(periodic, 2, 0.1);
        REQUIRE(s.has_value());
        CHECK(*s == Approx(0.0).margin(1e-12));
    }
    SECTION("iid noise") {
        const auto s = sample_entropy(uniform_noise(2000, 15), 2);
        REQUIRE(s.has_value());
        CHECK(*s > 1.0);
    }
    SECTION("no matches yields an absent value, not infinity") {
        std::vector<double> spread(50);
        for (std::size_t i = 0; i < spread.size(); ++i)
            spread[i] = static_cast<double>(i) * static_cast<double>(i);
        CHECK_FALSE(sample_entropy(spread, 2, 1e-6).has_value());
    }
    SECTION("KS estimate equals sample entropy exactly") {
        const auto series = uniform_noise(800, 4);
        CHECK(ks_entropy_estimate(series, 2) == sample_entropy(series, 2));
    }
}

TEST_CASE("rosenstein exponent recovers the logistic-map rate", "[dynamics]") {
    const auto x = logistic_map(5000);
    // dense attractor: nearest neighbors saturate within ~7 steps, so fit the
    // pre-saturation segment
    const auto res = lyapunov_rosenstein(x, {2, 1}, std::nullopt,
                                         std::pair<std::size_t, std::size_t>{0, 6});
    CHECK(res.lambda == Approx(std::log(2.0)).margin(0.1));
    CHECK(res.divergence_curve.size() >= 8);
}

TEST_CASE("rosenstein exponent of a pure oscillation is near zero", "[dynamics]") {
    std::vector<double> sine(2000);
    for (std::size_t i = 0; i < sine.size(); ++i)
        sine[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 100.0);
    const auto res = lyapunov_rosenstein(sine, {2, 25});
    CHECK(std::fabs(res.lambda) < 0.01);
}

TEST_CASE("time reversal flips the divergence slope of a damped oscillation", "[dynamics]") {
    // e^{-rate t} sin(wt): neighbors converge forward, diverge when the
    // series is reversed; the slopes mirror within 50%
    const double rate = 0.002;
    std::vector<double> damped(2000);
    for (std::size_t i = 0; i < damped.size(); ++i)
        damped[i] = std::exp(-rate * static_cast<double>(i)) *
                    std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 80.0);
    std::vector<double> reversed(damped.rbegin(), damped.rend());
    const auto fwd = lyapunov_rosenstein(damped, {2, 20});
    const auto rev = lyapunov_rosenstein(reversed, {2, 20});
    CHECK(fwd.lambda < 0.0);
    CHECK(rev.lambda > 0.0);
    CHECK(std::fabs(rev.lambda + fwd.lambda) <= 0.5 * std::fabs(fwd.lambda));
}

TEST_CASE("rosenstein error paths", "[dynamics]") {
    CHECK_THROWS_AS(lyapunov_rosenstein(uniform_noise(50, 1), {2, 1}), SeriesTooShort);
    // a mean period wider than the embedding leaves no admissible neighbors
    CHECK_THROWS_AS(
        lyapunov_rosenstein(uniform_noise(150, 2), {2, 1}, std::size_t{500}),
        NoValidNeighbors);
}
