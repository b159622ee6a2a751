#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "asme/errors.hpp"

namespace asme::dynamics {

struct EmbeddingSpec {
    int dimension = 2;  // m
    int delay = 1;      // tau
};

/// Delay-coordinate embedding, newest-last orientation: component k of
/// point i is series[i + k*delay]. Point count n - (m-1)*tau.
struct EmbeddedSeries {
    std::size_t dimension = 0;
    std::size_t count = 0;
    std::vector<double> data;  // row-major, count x dimension

    std::span<const double> point(std::size_t i) const {
        return {data.data() + i * dimension, dimension};
    }
};

inline EmbeddedSeries delay_embed(std::span<const double> series, const EmbeddingSpec& spec) {
    if (spec.dimension < 1 || spec.delay < 1)
        throw DegenerateInput("delay_embed: dimension and delay must be >= 1");
    const std::int64_t n_pts = static_cast<std::int64_t>(series.size()) -
                               static_cast<std::int64_t>(spec.dimension - 1) * spec.delay;
    if (n_pts < 2) throw SeriesTooShort("delay_embed: fewer than 2 embedded points");
    EmbeddedSeries emb;
    emb.dimension = static_cast<std::size_t>(spec.dimension);
    emb.count = static_cast<std::size_t>(n_pts);
    emb.data.resize(emb.count * emb.dimension);
    for (std::size_t i = 0; i < emb.count; ++i)
        for (std::size_t k = 0; k < emb.dimension; ++k)
            emb.data[i * emb.dimension + k] = series[i + k * static_cast<std::size_t>(spec.delay)];
    return emb;
}

struct PoincareProjection {
    int coord_a = 0;
    int coord_b = 0;
    std::vector<std::pair<double, double>> points;
};

/// 2-D projections of the embedded cloud for every coordinate pair
/// (j, k), j < k < m - the plot-ready delay-map point sets. No
/// section-crossing detection is performed.
inline std::vector<PoincareProjection> poincare_points(std::span<const double> series, int m,
                                                       int tau) {
    const EmbeddedSeries emb = delay_embed(series, {m, tau});
    std::vector<PoincareProjection> out;
    for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k) {
            PoincareProjection proj;
            proj.coord_a = j;
            proj.coord_b = k;
            proj.points.reserve(emb.count);
            for (std::size_t i = 0; i < emb.count; ++i)
                proj.points.emplace_back(emb.data[i * emb.dimension + static_cast<std::size_t>(j)],
                                         emb.data[i * emb.dimension + static_cast<std::size_t>(k)]);
            out.push_back(std::move(proj));
        }
    return out;
}

struct CorrelationCurve {
    std::vector<double> radii;
    std::vector<double> c_values;           // C(r), non-decreasing, in [0, 1]
    std::optional<double> fitted_slope;     // D2; absent when no scaling region
    std::pair<std::size_t, std::size_t> fit_range{0, 0};  // inclusive radius indices
};

namespace detail {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        ss += d * d;
    }
    return std::sqrt(ss);
}

/// Least-squares slope of y against x.
inline double slope_of(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

}  // namespace detail

/// Grassberger-Procaccia correlation sum and dimension. Pairs closer than
/// the Theiler window in time are excluded (default window = delay).
/// Default radii: 24 log-spaced values between the 1st and 99th percentile
/// of the included pairwise distances. The scaling region is the longest
/// run of >= 6 consecutive radii whose local log-log slopes stay within
/// 20% of their mean; D2 is the least-squares slope over that run.
inline CorrelationCurve correlation_dimension(std::span<const double> series,
                                              const EmbeddingSpec& spec,
                                              std::optional<std::vector<double>> radii = std::nullopt,
                                              std::optional<int> theiler_window = std::nullopt,
                                              std::optional<std::pair<std::size_t, std::size_t>>
                                                  fit_override = std::nullopt) {
    const EmbeddedSeries emb = delay_embed(series, spec);
    const std::size_t window =
        static_cast<std::size_t>(theiler_window.value_or(spec.delay) < 0
                                     ? spec.delay
                                     : theiler_window.value_or(spec.delay));

    std::vector<double> distances;
    distances.reserve(emb.count * (emb.count - 1) / 2);
    for (std::size_t i = 0; i < emb.count; ++i)
        for (std::size_t j = i + window + 1; j < emb.count; ++j)
            distances.push_back(detail::euclidean(emb.point(i), emb.point(j)));
    if (distances.empty())
        throw DegenerateInput("correlation_dimension: no pairs outside the Theiler window");
    std::sort(distances.begin(), distances.end());
    if (distances.back() == 0.0)
        throw DegenerateInput("correlation_dimension: constant series");

    CorrelationCurve curve;
    if (radii) {
        curve.radii = std::move(*radii);
        std::sort(curve.radii.begin(), curve.radii.end());
    } else {
        const auto pct = [&](double q) {
            const double pos = q * static_cast<double>(distances.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(lo);
            const std::size_t hi = std::min(lo + 1, distances.size() - 1);
            return distances[lo] * (1.0 - frac) + distances[hi] * frac;
        };
        double r_lo = pct(0.01);
        const double r_hi = pct(0.99);
        if (r_lo <= 0.0) {
            // duplicate points collapse the low percentile; start at the
            // smallest positive distance instead
            const auto first_pos = std::upper_bound(distances.begin(), distances.end(), 0.0);
            r_lo = first_pos == distances.end() ? r_hi : *first_pos;
        }
        constexpr std::size_t kRadiusCount = 24;
        curve.radii.resize(kRadiusCount);
        const double ln_lo = std::log(r_lo);
        const double step = (std::log(r_hi) - ln_lo) / static_cast<double>(kRadiusCount - 1);
        for (std::size_t i = 0; i < kRadiusCount; ++i)
            curve.radii[i] = std::exp(ln_lo + step * static_cast<double>(i));
    }

    const double total = static_cast<double>(distances.size());
    curve.c_values.reserve(curve.radii.size());
    for (double r : curve.radii) {
        const auto it = std::upper_bound(distances.begin(), distances.end(), r);
        curve.c_values.push_back(static_cast<double>(it - distances.begin()) / total);
    }

    // log-log slopes over the sub-range where C > 0
    std::size_t first_valid = 0;
    while (first_valid < curve.c_values.size() && curve.c_values[first_valid] <= 0.0)
        ++first_valid;
    const std::size_t m = curve.c_values.size();
    std::vector<double> ln_r(m, 0.0), ln_c(m, 0.0);
    for (std::size_t i = first_valid; i < m; ++i) {
        ln_r[i] = std::log(curve.radii[i]);
        ln_c[i] = std::log(curve.c_values[i]);
    }

    auto fit_slope = [&](std::size_t a, std::size_t b) {
        std::vector<double> xs(ln_r.begin() + static_cast<std::ptrdiff_t>(a),
                               ln_r.begin() + static_cast<std::ptrdiff_t>(b) + 1);
        std::vector<double> ys(ln_c.begin() + static_cast<std::ptrdiff_t>(a),
                               ln_c.begin() + static_cast<std::ptrdiff_t>(b) + 1);
        return detail::slope_of(xs, ys);
    };

    if (fit_override) {
        curve.fit_range = *fit_override;
        curve.fitted_slope = fit_slope(fit_override->first, fit_override->second);
        return curve;
    }

    constexpr std::size_t kMinRun = 6;  // radii per qualifying run
    std::size_t best_a = 0, best_b = 0, best_len = 0;
    if (m >= first_valid + kMinRun) {
        std::vector<double> local(m - 1, 0.0);
        for (std::size_t i = first_valid; i + 1 < m; ++i)
            local[i] = (ln_c[i + 1] - ln_c[i]) / (ln_r[i + 1] - ln_r[i]);
        for (std::size_t a = first_valid; a + kMinRun - 1 < m; ++a) {
            for (std::size_t b = a + kMinRun - 1; b < m; ++b) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                double sum = 0.0;
                for (std::size_t i = a; i < b; ++i) {
                    lo = std::min(lo, local[i]);
                    hi = std::max(hi, local[i]);
                    sum += local[i];
                }
                const double mean = sum / static_cast<double>(b - a);
                if (mean <= 0.0 || (hi - lo) >= 0.2 * mean) continue;
                if (b - a + 1 > best_len) {
                    best_len = b - a + 1;
                    best_a = a;
                    best_b = b;
                }
            }
        }
    }
    if (best_len >= kMinRun) {
        curve.fit_range = {best_a, best_b};
        curve.fitted_slope = fit_slope(best_a, best_b);
    }
    return curve;
}

namespace detail {

inline double series_std(std::span<const double> series) {
    const double mean =
        std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    double ss = 0.0;
    for (double v : series) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(series.size()));  // population std
}

}  // namespace detail

/// Approximate entropy: Phi_m - Phi_{m+1} with Chebyshev distance and
/// self-matches included. r <= 0 selects the 0.2 * std(series) default.
/// A constant series is perfectly regular and returns 0 by definition.
inline double approx_entropy(std::span<const double> series, int m = 2, double r = -1.0) {
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(m) + 2) throw SeriesTooShort("approx_entropy: series too short");
    if (r <= 0.0) {
        const double sd = detail::series_std(series);
        if (sd == 0.0) return 0.0;
        r = 0.2 * sd;
    }

    auto phi = [&](int mm) {
        const std::size_t count = n - static_cast<std::size_t>(mm) + 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t matches = 0;
            for (std::size_t j = 0; j < count; ++j) {
                bool ok = true;
                for (int k = 0; k < mm; ++k) {
                    if (std::fabs(series[i + static_cast<std::size_t>(k)] -
                                  series[j + static_cast<std::size_t>(k)]) > r) {
                        ok = false;
                        break;
                    }
                }
                if (ok) ++matches;
            }
            acc += std::log(static_cast<double>(matches) / static_cast<double>(count));
        }
        return acc / static_cast<double>(count);
    };
    return phi(m) - phi(m + 1);
}

/// Sample entropy: -ln(A/B) with self-matches excluded, Chebyshev distance.
/// Returns nullopt when no template pair matches at length m (or none of
/// the matches extends), where the estimator is undefined.
inline std::optional<double> sample_entropy(std::span<const double> series, int m = 2,
                                            double r = -1.0) {
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(m) + 2) throw SeriesTooShort("sample_entropy: series too short");
    if (r <= 0.0) {
        const double sd = detail::series_std(series);
        if (sd == 0.0) return 0.0;  // constant series: A = B
        r = 0.2 * sd;
    }
    const std::size_t count = n - static_cast<std::size_t>(m);  // templates usable at both lengths
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = i + 1; j < count; ++j) {
            bool ok = true;
            for (int k = 0; k < m; ++k) {
                if (std::fabs(series[i + static_cast<std::size_t>(k)] -
                              series[j + static_cast<std::size_t>(k)]) > r) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            b += 1.0;
            if (std::fabs(series[i + static_cast<std::size_t>(m)] -
                          series[j + static_cast<std::size_t>(m)]) <= r)
                a += 1.0;
        }
    }
    if (b == 0.0 || a == 0.0) return std::nullopt;
    return -std::log(a / b);
}

/// Kolmogorov-Sinai entropy estimate: numerically the sample entropy per
/// time step.
inline std::optional<double> ks_entropy_estimate(std::span<const double> series, int m = 2,
                                                 double r = -1.0) {
    return sample_entropy(series, m, r);
}

namespace detail {

/// Iterative radix-2 FFT, in-place, size must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

/// Mean period of the series: reciprocal of the power-weighted mean
/// frequency of the periodogram (mean removed, zero-padded to a power of
/// two). Returns 0 when the spectrum is degenerate.
inline std::size_t mean_period(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 4) return 0;
    std::size_t padded = 1;
    while (padded < n) padded <<= 1;
    const double mean =
        std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    std::vector<std::complex<double>> buf(padded, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = series[i] - mean;
    fft_pow2(buf);
    double power_sum = 0.0;
    double freq_weighted = 0.0;
    for (std::size_t k = 1; k <= padded / 2; ++k) {
        const double p = std::norm(buf[k]);
        const double f = static_cast<double>(k) / static_cast<double>(padded);
        power_sum += p;
        freq_weighted += f * p;
    }
    if (power_sum <= 0.0 || freq_weighted <= 0.0) return 0;
    const double mean_freq = freq_weighted / power_sum;
    const double period = 1.0 / mean_freq;
    return static_cast<std::size_t>(std::llround(std::clamp(period, 1.0, static_cast<double>(n))));
}

}  // namespace detail

struct LyapunovResult {
    double lambda = 0.0;                    // per time step
    std::vector<double> divergence_curve;   // <ln d(k)>, k = 0..k_max
    std::pair<std::size_t, std::size_t> fit_window{0, 0};
    std::size_t mean_period = 0;
};

/// Rosenstein largest-Lyapunov-exponent estimator: embed, find each point's
/// nearest neighbor with temporal separation greater than the mean period
/// (power-spectrum estimate, falling back to the embedding delay), track
/// the mean log divergence over k steps, fit a line over the fit window
/// (default: first third of the curve).
inline LyapunovResult lyapunov_rosenstein(std::span<const double> series,
                                          const EmbeddingSpec& spec,
                                          std::optional<std::size_t> mean_period = std::nullopt,
                                          std::optional<std::pair<std::size_t, std::size_t>>
                                              fit_window = std::nullopt) {
    const EmbeddedSeries emb = delay_embed(series, spec);
    if (emb.count < 100) throw SeriesTooShort("lyapunov_rosenstein: need >= 100 embedded points");

    std::size_t period = mean_period.value_or(0);
    if (period == 0) {
        period = detail::mean_period(series);
        if (period == 0) period = static_cast<std::size_t>(spec.delay);
    }
    if (period >= emb.count - 1)
        throw NoValidNeighbors("lyapunov_rosenstein: mean period exceeds the embedding");

    // nearest neighbor outside the temporal exclusion zone
    std::vector<std::size_t> neighbor(emb.count, 0);
    std::vector<bool> has_neighbor(emb.count, false);
    for (std::size_t i = 0; i < emb.count; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < emb.count; ++j) {
            const std::size_t sep = i > j ? i - j : j - i;
            if (sep <= period) continue;
            const double d = detail::euclidean(emb.point(i), emb.point(j));
            if (d < best) {
                best = d;
                neighbor[i] = j;
                has_neighbor[i] = true;
            }
        }
    }
    if (std::none_of(has_neighbor.begin(), has_neighbor.end(), [](bool b) { return b; }))
        throw NoValidNeighbors("lyapunov_rosenstein: no admissible neighbor pairs");

    const std::size_t k_max = std::min<std::size_t>(500, emb.count / 10);
    LyapunovResult result;
    result.mean_period = period;
    result.divergence_curve.reserve(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) {
        double acc = 0.0;
        std::size_t terms = 0;
        for (std::size_t i = 0; i < emb.count; ++i) {
            if (!has_neighbor[i]) continue;
            const std::size_t j = neighbor[i];
            if (i + k >= emb.count || j + k >= emb.count) continue;
            const double d = detail::euclidean(emb.point(i + k), emb.point(j + k));
            if (d <= 0.0) continue;  // coincident points carry no log distance
            acc += std::log(d);
            ++terms;
        }
        if (terms == 0) break;
        result.divergence_curve.push_back(acc / static_cast<double>(terms));
    }
    if (result.divergence_curve.size() < 2)
        throw NoValidNeighbors("lyapunov_rosenstein: divergence curve too short");

    std::pair<std::size_t, std::size_t> window =
        fit_window.value_or(std::pair<std::size_t, std::size_t>{
            0, std::max<std::size_t>(1, (result.divergence_curve.size() - 1) / 3)});
    window.second = std::min(window.second, result.divergence_curve.size() - 1);
    if (window.first >= window.second)
        throw DegenerateInput("lyapunov_rosenstein: empty fit window");
    std::vector<double> ks(window.second - window.first + 1);
    std::vector<double> ys(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        ks[i] = static_cast<double>(window.first + i);
        ys[i] = result.divergence_curve[window.first + i];
    }
    result.lambda = detail::slope_of(ks, ys);
    result.fit_window = window;
    return result;
}

}  // namespace asme::dynamics
