#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "asme/errors.hpp"
#include "asme/market.hpp"

namespace asme {

enum class TerminalKind : std::uint8_t { ReachedZero, Positive, Undetermined };

inline const char* to_string(TerminalKind kind) {
    switch (kind) {
        case TerminalKind::ReachedZero: return "zero";
        case TerminalKind::Positive: return "positive";
        default: return "undetermined";
    }
}

struct TerminalLabel {
    TerminalKind value = TerminalKind::Undetermined;
    double tail_mean = 0.0;
};

struct LabelSpec {
    double eps0 = 0.5;       // |tail mean| below this => ReachedZero
    double eps1 = 2.0;       // tail mean above this => Positive
    std::size_t window = 100;  // L, number of closing prices averaged
};

/// Three-way terminal classification from the mean of the last L closes.
inline TerminalLabel classify_terminal(std::span<const double> closes, double eps0, double eps1,
                                       std::size_t window) {
    if (window == 0 || window > closes.size())
        throw DegenerateInput("classify_terminal: window must be in [1, length]");
    if (!(eps0 < eps1)) throw DegenerateInput("classify_terminal: need eps0 < eps1");
    double tail = 0.0;
    for (std::size_t i = closes.size() - window; i < closes.size(); ++i) tail += closes[i];
    tail /= static_cast<double>(window);
    TerminalLabel label;
    label.tail_mean = tail;
    if (std::fabs(tail) < eps0)
        label.value = TerminalKind::ReachedZero;
    else if (tail > eps1)
        label.value = TerminalKind::Positive;
    else
        label.value = TerminalKind::Undetermined;
    return label;
}

inline TerminalLabel classify_terminal(const Trajectory& traj, const LabelSpec& spec = {}) {
    return classify_terminal(traj.closes(), spec.eps0, spec.eps1, spec.window);
}

/// Earliest 0-based index with close <= eps, if any.
inline std::optional<std::size_t> time_to_zero(std::span<const double> closes, double eps) {
    for (std::size_t i = 0; i < closes.size(); ++i)
        if (closes[i] <= eps) return i;
    return std::nullopt;
}

struct Ensemble {
    MarketConfig config;
    std::uint64_t base_seed = 0;
    std::vector<Trajectory> trajectories;
    std::vector<TerminalLabel> labels;

    std::size_t size() const { return trajectories.size(); }

    std::vector<std::size_t> indices_with(TerminalKind kind) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i].value == kind) out.push_back(i);
        return out;
    }
};

/// R independent runs; run i uses seed derive_run_seed(base_seed, i). Runs
/// may execute on several threads, results are ordered by run index either
/// way.
inline Ensemble run_ensemble(const MarketConfig& config, std::size_t runs,
                             std::uint64_t base_seed, const LabelSpec& spec = {},
                             unsigned max_threads = 0) {
    if (runs == 0) throw DegenerateInput("run_ensemble: need at least one run");
    config.validate();

    Ensemble ens;
    ens.config = config;
    ens.base_seed = base_seed;
    ens.trajectories.resize(runs);

    unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, runs));

    auto work = [&](unsigned worker) {
        for (std::size_t i = worker; i < runs; i += workers) {
            MarketConfig run_config = config;
            run_config.seed = derive_run_seed(base_seed, i);
            ens.trajectories[i] = run_simulation(run_config);
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    ens.labels.reserve(runs);
    for (const auto& traj : ens.trajectories) ens.labels.push_back(classify_terminal(traj, spec));
    return ens;
}

struct SummaryStats {
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    double std = 0.0;
    double cv = 0.0;
    double skew = 0.0;
    double excess_kurtosis = 0.0;
    double p5 = 0.0;
    double p95 = 0.0;
    double iqr = 0.0;
    std::size_t n = 0;
};

namespace detail {

/// Linearly interpolated quantile (type 7) on sorted data, q in [0, 1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

/// Sample statistics of a collection of times (or any reals): adjusted
/// Fisher-Pearson skewness, bias-corrected excess kurtosis, type-7
/// quantiles.
inline SummaryStats summarize(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw DegenerateInput("summarize: need n >= 2");
    SummaryStats s;
    s.n = n;
    const double nd = static_cast<double>(n);
    for (double v : values) s.mean += v;
    s.mean /= nd;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    s.std = std::sqrt(m2 * nd / (nd - 1.0));
    s.cv = s.mean != 0.0 ? s.std / s.mean : std::numeric_limits<double>::quiet_NaN();
    if (m2 > 0.0) {
        const double g1 = m3 / std::pow(m2, 1.5);
        if (n > 2) s.skew = g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
        const double g2 = m4 / (m2 * m2) - 3.0;
        if (n > 3)
            s.excess_kurtosis =
                ((nd + 1.0) * g2 + 6.0) * (nd - 1.0) / ((nd - 2.0) * (nd - 3.0));
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = detail::quantile_sorted(sorted, 0.5);
    s.p5 = detail::quantile_sorted(sorted, 0.05);
    s.p95 = detail::quantile_sorted(sorted, 0.95);
    s.iqr = detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
    return s;
}

inline SummaryStats time_to_zero_summary(std::span<const double> times) {
    return summarize(times);
}

enum class LabelFilter { All, ReachedZero, Positive };

struct EnsembleMoments {
    std::vector<double> mean;  // per step
    std::vector<double> std;   // per step, unbiased; NaN when the group has one member
};

/// Per-step mean and unbiased standard deviation over the trajectories
/// selected by the label filter.
inline EnsembleMoments ensemble_moments(const Ensemble& ens, LabelFilter filter) {
    std::vector<const Trajectory*> group;
    for (std::size_t i = 0; i < ens.trajectories.size(); ++i) {
        const bool take = filter == LabelFilter::All ||
                          (filter == LabelFilter::ReachedZero &&
                           ens.labels[i].value == TerminalKind::ReachedZero) ||
                          (filter == LabelFilter::Positive &&
                           ens.labels[i].value == TerminalKind::Positive);
        if (take) group.push_back(&ens.trajectories[i]);
    }
    if (group.empty()) throw EmptyInput("ensemble_moments: empty group");
    const std::size_t steps = group.front()->steps.size();
    EnsembleMoments moments;
    moments.mean.assign(steps, 0.0);
    moments.std.assign(steps, std::numeric_limits<double>::quiet_NaN());
    const double r = static_cast<double>(group.size());
    for (std::size_t t = 0; t < steps; ++t) {
        double mean = 0.0;
        for (const auto* traj : group) mean += traj->steps[t].close_price;
        mean /= r;
        moments.mean[t] = mean;
        if (group.size() >= 2) {
            double ss = 0.0;
            for (const auto* traj : group) {
                const double d = traj->steps[t].close_price - mean;
                ss += d * d;
            }
            moments.std[t] = std::sqrt(ss / (r - 1.0));
        }
    }
    return moments;
}

}  // namespace asme
