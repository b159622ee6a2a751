#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asme/errors.hpp"

namespace asme::separatrix {

enum class Method { ClassificationError, EntropyMedian, HingeMargin };

inline const char* to_string(Method method) {
    switch (method) {
        case Method::ClassificationError: return "classification_error";
        case Method::EntropyMedian: return "entropy_median";
        default: return "hinge_margin";
    }
}

enum class Group : std::uint8_t { Zero, Positive };

struct SeparatrixInput {
    std::vector<double> values_at_tc;  // one price per labeled trajectory at t_c
    std::vector<Group> labels;
    std::size_t t_c = 0;
};

struct SeparatrixEstimate {
    double value = 0.0;
    Method method = Method::ClassificationError;
    std::map<std::string, double> diagnostics;
};

/// Comparison time: floor of half the median trajectory length.
inline std::size_t comparison_time(std::span<const std::size_t> lengths) {
    if (lengths.empty()) throw EmptyInput("comparison_time: no lengths");
    std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double median;
    if (n % 2 == 1)
        median = static_cast<double>(sorted[n / 2]);
    else
        median = (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
    return static_cast<std::size_t>(std::floor(median / 2.0));
}

namespace detail {

inline void require_both_classes(const SeparatrixInput& input) {
    if (input.values_at_tc.size() != input.labels.size())
        throw DegenerateInput("separatrix: values and labels differ in length");
    bool has_zero = false, has_positive = false;
    for (Group g : input.labels) {
        has_zero |= g == Group::Zero;
        has_positive |= g == Group::Positive;
    }
    if (!has_zero || !has_positive) throw OneClassOnly("separatrix: both classes required");
}

inline double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace detail

/// Candidate thresholds are midpoints of consecutive sorted unique values;
/// the estimate minimizes the misclassification fraction (Zero below the
/// threshold, Positive above), ties broken toward the smallest threshold.
inline SeparatrixEstimate separatrix_classification(const SeparatrixInput& input) {
    detail::require_both_classes(input);
    std::vector<double> unique_vals(input.values_at_tc);
    std::sort(unique_vals.begin(), unique_vals.end());
    unique_vals.erase(std::unique(unique_vals.begin(), unique_vals.end()), unique_vals.end());
    if (unique_vals.size() < 2)
        throw DegenerateInput("separatrix_classification: all values identical");

    const double total = static_cast<double>(input.values_at_tc.size());
    double best_error = std::numeric_limits<double>::infinity();
    double best_s = unique_vals.front();
    for (std::size_t j = 0; j + 1 < unique_vals.size(); ++j) {
        const double s = (unique_vals[j] + unique_vals[j + 1]) / 2.0;
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < input.values_at_tc.size(); ++i) {
            const bool below = input.values_at_tc[i] <= s;
            if (below && input.labels[i] == Group::Positive) ++wrong;
            if (!below && input.labels[i] == Group::Zero) ++wrong;
        }
        const double error = static_cast<double>(wrong) / total;
        if (error < best_error) {
            best_error = error;
            best_s = s;
        }
    }
    SeparatrixEstimate est;
    est.value = best_s;
    est.method = Method::ClassificationError;
    est.diagnostics["min_error"] = best_error;
    return est;
}

/// Median of the labeled values at t_c; the Shannon entropy (bits) of their
/// equal-width histogram is reported as a diagnostic only.
inline SeparatrixEstimate separatrix_entropy(const SeparatrixInput& input,
                                             std::size_t num_bins = 20) {
    std::vector<double> finite;
    for (double v : input.values_at_tc)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) throw EmptyInput("separatrix_entropy: no finite values");
    if (num_bins == 0) throw DegenerateInput("separatrix_entropy: num_bins must be positive");

    const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> histogram(num_bins, 0.0);
    if (hi > lo) {
        const double width = (hi - lo) / static_cast<double>(num_bins);
        for (double v : finite) {
            std::size_t bin = static_cast<std::size_t>((v - lo) / width);
            if (bin >= num_bins) bin = num_bins - 1;  // closed last bin
            histogram[bin] += 1.0;
        }
    } else {
        histogram[0] = static_cast<double>(finite.size());
    }
    double entropy_bits = 0.0;
    const double n = static_cast<double>(finite.size());
    for (double h : histogram) {
        if (h <= 0.0) continue;  // 0 log 0 = 0
        const double p = h / n;
        entropy_bits -= p * std::log2(p);
    }

    SeparatrixEstimate est;
    est.value = detail::median_of(std::move(finite));
    est.method = Method::EntropyMedian;
    est.diagnostics["entropy_bits"] = entropy_bits;
    est.diagnostics["num_bins"] = static_cast<double>(num_bins);
    return est;
}

/// Hinge-margin estimate: minimizes
///   C(s) = sum_{Zero} max(0, p_i - s + delta) + sum_{Pos} max(0, s - p_i + delta)
/// over [min - delta, max + delta]. The cost is convex piecewise linear, so
/// the grid search is refined with every kink p_i +- delta and the estimate
/// is the midpoint of the minimizing interval.
inline SeparatrixEstimate separatrix_hinge(const SeparatrixInput& input, double delta = 0.1,
                                           std::size_t grid_size = 10'001) {
    detail::require_both_classes(input);
    if (delta <= 0.0) throw DegenerateInput("separatrix_hinge: delta must be positive");
    if (grid_size < 2) throw DegenerateInput("separatrix_hinge: grid_size must be >= 2");

    const auto [lo_it, hi_it] =
        std::minmax_element(input.values_at_tc.begin(), input.values_at_tc.end());
    const double lo = *lo_it - delta;
    const double hi = *hi_it + delta;

    auto cost = [&](double s) {
        double c = 0.0;
        for (std::size_t i = 0; i < input.values_at_tc.size(); ++i) {
            const double p = input.values_at_tc[i];
            if (input.labels[i] == Group::Zero)
                c += std::max(0.0, p - s + delta);
            else
                c += std::max(0.0, s - p + delta);
        }
        return c;
    };

    std::vector<double> candidates;
    candidates.reserve(grid_size + 2 * input.values_at_tc.size());
    const double step = (hi - lo) / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i)
        candidates.push_back(lo + step * static_cast<double>(i));
    for (double p : input.values_at_tc) {
        for (double kink : {p - delta, p + delta})
            if (kink >= lo && kink <= hi) candidates.push_back(kink);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double min_cost = std::numeric_limits<double>::infinity();
    for (double s : candidates) min_cost = std::min(min_cost, cost(s));

    // the minimizing set of a convex piecewise-linear function is one interval
    const double tol = 1e-9 * std::max(1.0, std::fabs(min_cost));
    double interval_lo = 0.0, interval_hi = 0.0;
    bool started = false;
    for (double s : candidates) {
        if (cost(s) <= min_cost + tol) {
            if (!started) {
                interval_lo = s;
                started = true;
            }
            interval_hi = s;
        } else if (started) {
            break;
        }
    }

    SeparatrixEstimate est;
    est.value = (interval_lo + interval_hi) / 2.0;
    est.method = Method::HingeMargin;
    est.diagnostics["min_cost"] = min_cost;
    est.diagnostics["delta"] = delta;
    return est;
}

}  // namespace asme::separatrix
