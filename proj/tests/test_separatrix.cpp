#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "asme/separatrix.hpp"

using namespace asme;
using namespace asme::separatrix;
using Catch::Approx;

namespace {

SeparatrixInput two_cluster_input() {
    SeparatrixInput input;
    input.values_at_tc = {1.0, 2.0, 5.0, 6.0};
    input.labels = {Group::Zero, Group::Zero, Group::Positive, Group::Positive};
    input.t_c = 2500;
    return input;
}

}  // namespace

TEST_CASE("comparison time is half the median length, floored", "[separatrix]") {
    CHECK(comparison_time(std::vector<std::size_t>{5000, 5000, 5000}) == 2500);
    CHECK(comparison_time(std::vector<std::size_t>{4000, 5000, 6000}) == 2500);
    CHECK(comparison_time(std::vector<std::size_t>{7}) == 3);
    CHECK(comparison_time(std::vector<std::size_t>{4000, 5000}) == 2250);
    CHECK_THROWS_AS(comparison_time(std::vector<std::size_t>{}), EmptyInput);
}

TEST_CASE("classification-error separatrix minimizes over midpoints", "[separatrix]") {
    SECTION("separable clusters split at the central midpoint") {
        const auto est = separatrix_classification(two_cluster_input());
        CHECK(est.value == Approx(3.5));
        CHECK(est.diagnostics.at("min_error") == 0.0);
    }
    SECTION("perfectly interleaved values floor at the minority fraction") {
        SeparatrixInput input;
        input.values_at_tc = {1.0, 2.0, 3.0, 4.0};
        input.labels = {Group::Zero, Group::Positive, Group::Zero, Group::Positive};
        const auto est = separatrix_classification(input);
        CHECK(est.diagnostics.at("min_error") == Approx(0.25));
    }
    SECTION("one class only is rejected") {
        SeparatrixInput input;
        input.values_at_tc = {1.0, 2.0};
        input.labels = {Group::Zero, Group::Zero};
        CHECK_THROWS_AS(separatrix_classification(input), OneClassOnly);
    }
}

TEST_CASE("classification estimate is optimal on its candidate set", "[separatrix]") {
    SeparatrixInput input;
    input.values_at_tc = {0.3, 1.2, 2.4, 2.9, 3.6, 4.4, 5.0, 6.1};
    input.labels = {Group::Zero, Group::Zero, Group::Positive, Group::Zero,
                    Group::Positive, Group::Zero, Group::Positive, Group::Positive};
    const auto est = separatrix_classification(input);
    const double best = est.diagnostics.at("min_error");
    // exhaustive re-check over every midpoint
    std::vector<double> sorted(input.values_at_tc);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j + 1 < sorted.size(); ++j) {
        const double s = (sorted[j] + sorted[j + 1]) / 2.0;
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < input.values_at_tc.size(); ++i) {
            const bool below = input.values_at_tc[i] <= s;
            if (below && input.labels[i] == Group::Positive) ++wrong;
            if (!below && input.labels[i] == Group::Zero) ++wrong;
        }
        CHECK(best <= static_cast<double>(wrong) / 8.0 + 1e-12);
    }
}

TEST_CASE("entropy-median separatrix", "[separatrix]") {
    SECTION("median of the labeled values") {
        const auto est = separatrix_entropy(two_cluster_input());
        CHECK(est.value == Approx(3.5));
        CHECK(est.diagnostics.at("entropy_bits") > 0.0);
    }
    SECTION("degenerate distribution has zero entropy") {
        SeparatrixInput input;
        input.values_at_tc = {2.0, 2.0, 2.0};
        input.labels = {Group::Zero, Group::Zero, Group::Zero};
        const auto est = separatrix_entropy(input);
        CHECK(est.diagnostics.at("entropy_bits") == 0.0);
        CHECK(est.value == Approx(2.0));
    }
    SECTION("empty input throws") {
        SeparatrixInput input;
        CHECK_THROWS_AS(separatrix_entropy(input), EmptyInput);
    }
}

TEST_CASE("hinge separatrix finds the zero-cost interval midpoint", "[separatrix]") {
    SECTION("separable case with margin 0.5") {
        const auto est = separatrix_hinge(two_cluster_input(), 0.5);
        CHECK(est.value == Approx(3.5));
        CHECK(est.diagnostics.at("min_cost") == Approx(0.0).margin(1e-12));
    }
    SECTION("margin wider than the gap forces positive cost") {
        const auto est = separatrix_hinge(two_cluster_input(), 2.0);
        CHECK(est.diagnostics.at("min_cost") > 0.0);
    }
    SECTION("one class only is rejected") {
        SeparatrixInput input;
        input.values_at_tc = {1.0, 2.0};
        input.labels = {Group::Positive, Group::Positive};
        CHECK_THROWS_AS(separatrix_hinge(input), OneClassOnly);
    }
}

TEST_CASE("separable hinge cost vanishes with the estimate inside the gap", "[separatrix]") {
    SeparatrixInput input;
    input.values_at_tc = {0.5, 0.9, 1.4, 4.2, 4.9, 5.5};
    input.labels = {Group::Zero, Group::Zero, Group::Zero,
                    Group::Positive, Group::Positive, Group::Positive};
    const double delta = 0.7;  // gap 2.8 > 2 * delta
    const auto est = separatrix_hinge(input, delta);
    CHECK(est.diagnostics.at("min_cost") == Approx(0.0).margin(1e-12));
    CHECK(est.value > 1.4);
    CHECK(est.value < 4.2);
}

TEST_CASE("all three estimators are affine equivariant", "[separatrix]") {
    SeparatrixInput input;
    input.values_at_tc = {0.4, 1.1, 2.2, 3.0, 4.7, 5.3, 6.0};
    input.labels = {Group::Zero, Group::Zero, Group::Zero, Group::Positive,
                    Group::Positive, Group::Zero, Group::Positive};
    const double a = 2.5;
    const double b = -4.0;
    SeparatrixInput mapped = input;
    for (double& v : mapped.values_at_tc) v = a * v + b;

    const auto c1 = separatrix_classification(input);
    const auto c2 = separatrix_classification(mapped);
    CHECK(c2.value == Approx(a * c1.value + b));

    const auto e1 = separatrix_entropy(input);
    const auto e2 = separatrix_entropy(mapped);
    CHECK(e2.value == Approx(a * e1.value + b));

    const double delta = 0.3;
    const auto h1 = separatrix_hinge(input, delta);
    const auto h2 = separatrix_hinge(mapped, a * delta);
    CHECK(h2.value == Approx(a * h1.value + b).margin(1e-6));
}

TEST_CASE("estimates stay within the observed value range", "[separatrix]") {
    const auto input = two_cluster_input();
    for (const auto& est : {separatrix_classification(input), separatrix_entropy(input),
                            separatrix_hinge(input, 0.4)}) {
        CHECK(est.value >= 1.0);
        CHECK(est.value <= 6.0);
    }
}
