#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asme/errors.hpp"

namespace asme::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::map<std::string, double> extra;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    const double x = df / (df + t * t);
    return incbeta(df / 2.0, 0.5, x);
}

struct OlsFit {
    std::vector<double> beta;
    std::vector<double> se;
    double ssr = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
};

/// Least squares via Householder QR on a column-major design matrix.
/// Throws SingularDesign when a pivot collapses.
inline OlsFit ols(std::vector<std::vector<double>> columns, std::vector<double> y) {
    const std::size_t k = columns.size();
    const std::size_t n = y.size();
    if (k == 0 || n < k) throw SingularDesign("ols: need more rows than columns");

    // R is built in place over the column block; qty accumulates Q^T y.
    for (std::size_t j = 0; j < k; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < n; ++i) norm += columns[j][i] * columns[j][i];
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw SingularDesign("ols: rank-deficient design");
        double alpha = columns[j][j] > 0 ? -norm : norm;
        // Householder vector v stored in the lower part of column j
        double vjj = columns[j][j] - alpha;
        std::vector<double> v(n - j);
        v[0] = vjj;
        for (std::size_t i = j + 1; i < n; ++i) v[i - j] = columns[j][i];
        double vnorm2 = 0.0;
        for (double w : v) vnorm2 += w * w;
        if (vnorm2 < 1e-300) throw SingularDesign("ols: rank-deficient design");
        columns[j][j] = alpha;
        for (std::size_t i = j + 1; i < n; ++i) columns[j][i] = 0.0;
        // apply reflector to later columns and to y
        for (std::size_t c = j + 1; c < k; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < n; ++i) dot += v[i - j] * columns[c][i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = j; i < n; ++i) columns[c][i] -= f * v[i - j];
        }
        double doty = 0.0;
        for (std::size_t i = j; i < n; ++i) doty += v[i - j] * y[i];
        const double fy = 2.0 * doty / vnorm2;
        for (std::size_t i = j; i < n; ++i) y[i] -= fy * v[i - j];
    }

    // back substitution on R beta = (Q^T y)[0..k)
    OlsFit fit;
    fit.n = n;
    fit.k = k;
    fit.beta.assign(k, 0.0);
    for (std::size_t jj = k; jj-- > 0;) {
        double s = y[jj];
        for (std::size_t c = jj + 1; c < k; ++c) s -= columns[c][jj] * fit.beta[c];
        fit.beta[jj] = s / columns[jj][jj];
    }
    for (std::size_t i = k; i < n; ++i) fit.ssr += y[i] * y[i];

    // standard errors: sigma^2 diag((R^T R)^-1); invert the triangular R
    const double sigma2 = fit.ssr / static_cast<double>(n - k);
    std::vector<std::vector<double>> rinv(k, std::vector<double>(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) {
        rinv[j][j] = 1.0 / columns[j][j];
        for (std::size_t i = j; i-- > 0;) {
            double s = 0.0;
            for (std::size_t c = i + 1; c <= j; ++c) s += columns[c][i] * rinv[j][c];
            rinv[j][i] = -s / columns[i][i];
        }
    }
    fit.se.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t j = i; j < k; ++j) s += rinv[j][i] * rinv[j][i];
        fit.se[i] = std::sqrt(sigma2 * s);
    }
    return fit;
}

// MacKinnon (1994, 2010) response-surface constants for the ADF tau
// distribution, single series (N=1). Outside [tau_min, tau_max] the p-value
// saturates at 0 or 1; otherwise a polynomial in tau maps to a normal
// quantile, p = Phi(poly(tau)). Values as tabulated in statsmodels'
// adfvalues (regression "c" and "ct").
struct MacKinnonTable {
    double tau_star, tau_min, tau_max;
    std::vector<double> small_p;  // used when tau <= tau_star
    std::vector<double> large_p;
};

inline const MacKinnonTable& mackinnon_constant() {
    static const MacKinnonTable table{
        -1.61, -18.83, 2.74, {2.1659, 1.4412, 0.038269}, {1.7339, 0.93202, -0.12745, -0.010368}};
    return table;
}

inline const MacKinnonTable& mackinnon_constant_trend() {
    static const MacKinnonTable table{
        -2.89, -16.18, 0.7, {3.2512, 1.6047, 0.049588}, {2.5261, 0.61654, -0.37956, -0.060285}};
    return table;
}

inline double polyval(const std::vector<double>& coeffs, double x) {
    double acc = 0.0;
    double pow = 1.0;
    for (double c : coeffs) {
        acc += c * pow;
        pow *= x;
    }
    return acc;
}

inline double mackinnon_p(double tau, const MacKinnonTable& table) {
    if (tau <= table.tau_min) return 0.0;
    if (tau >= table.tau_max) return 1.0;
    const auto& coeffs = tau <= table.tau_star ? table.small_p : table.large_p;
    return normal_cdf(polyval(coeffs, tau));
}

inline double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x, double mean) {
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

}  // namespace detail

enum class AdfRegression { Constant, ConstantTrend };

/// Augmented Dickey-Fuller unit-root test. Fits
///   dy_t = alpha [+ beta t] + gamma y_{t-1} + sum_i delta_i dy_{t-i} + e_t,
/// reports the t-ratio of gamma and the MacKinnon approximate p-value.
/// Lag order is chosen by AIC over 0..max_lag on a common sample aligned at
/// max_lag, then the chosen model is refit on its full sample (default
/// max_lag = floor(12*(T/100)^0.25)).
inline TestResult adf_test(std::span<const double> series,
                           std::optional<std::size_t> max_lag = std::nullopt,
                           AdfRegression regression = AdfRegression::ConstantTrend) {
    const std::size_t n = series.size();
    if (n >= 2) {
        const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
        if (*lo == *hi) throw DegenerateInput("adf_test: constant series");
    }
    const std::size_t ntrend = regression == AdfRegression::ConstantTrend ? 2 : 1;
    std::size_t maxlag =
        max_lag.value_or(static_cast<std::size_t>(std::floor(
            12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25))));
    if (n < 20 + maxlag) {
        if (!max_lag && n > 20) {
            maxlag = n - 20;  // shrink the automatic default for short series
        } else {
            throw DegenerateInput("adf_test: series too short");
        }
    }
    maxlag = std::min(maxlag, (n - 1) / 2 > ntrend + 1 ? (n - 1) / 2 - ntrend - 1 : 0);

    std::vector<double> diff(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) diff[i] = series[i + 1] - series[i];

    // rows for lag p start at index `start` of diff: dy_t regressed on
    // y_{t-1}, dy_{t-1}..dy_{t-p}, deterministic terms
    auto fit_for = [&](std::size_t p, std::size_t start) {
        const std::size_t rows = diff.size() - start;
        std::vector<std::vector<double>> cols;
        std::vector<double> y(rows);
        for (std::size_t r = 0; r < rows; ++r) y[r] = diff[start + r];
        std::vector<double> level(rows);
        for (std::size_t r = 0; r < rows; ++r) level[r] = series[start + r];
        cols.push_back(std::move(level));
        for (std::size_t l = 1; l <= p; ++l) {
            std::vector<double> lagcol(rows);
            for (std::size_t r = 0; r < rows; ++r) lagcol[r] = diff[start + r - l];
            cols.push_back(std::move(lagcol));
        }
        cols.emplace_back(rows, 1.0);
        if (regression == AdfRegression::ConstantTrend) {
            std::vector<double> trend(rows);
            for (std::size_t r = 0; r < rows; ++r) trend[r] = static_cast<double>(r + 1);
            cols.push_back(std::move(trend));
        }
        return detail::ols(std::move(cols), std::move(y));
    };

    std::size_t best_lag = 0;
    if (maxlag > 0) {
        double best_aic = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p <= maxlag; ++p) {
            const auto fit = fit_for(p, maxlag);
            const double rows = static_cast<double>(fit.n);
            const double aic = rows * std::log(fit.ssr / rows) +
                               2.0 * static_cast<double>(fit.k);
            if (aic < best_aic) {
                best_aic = aic;
                best_lag = p;
            }
        }
    }

    const auto fit = fit_for(best_lag, best_lag);
    const double tau = fit.beta[0] / fit.se[0];
    const auto& table = regression == AdfRegression::ConstantTrend
                            ? detail::mackinnon_constant_trend()
                            : detail::mackinnon_constant();
    TestResult result;
    result.statistic = tau;
    result.p_value = detail::mackinnon_p(tau, table);
    result.extra["lag"] = static_cast<double>(best_lag);
    result.extra["nobs"] = static_cast<double>(fit.n);
    return result;
}

/// Welch two-sample t-test (unequal variances), two-sided.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DegenerateInput("welch_t_test: need >= 2 per sample");
    const double ma = detail::mean_of(a);
    const double mb = detail::mean_of(b);
    const double va = detail::sample_variance(a, ma);
    const double vb = detail::sample_variance(b, mb);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) {
        if (ma == mb) throw DegenerateInput("welch_t_test: both samples constant and equal");
        TestResult degenerate;
        degenerate.statistic = ma > mb ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
        degenerate.p_value = 0.0;
        return degenerate;
    }
    const double t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 /
                      (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    TestResult result;
    result.statistic = t;
    result.p_value = detail::student_t_two_sided(t, df);
    result.extra["df"] = df;
    return result;
}

namespace detail {

/// Midranks of the pooled sample, plus the tie-correction term sum(t^3 - t).
inline std::pair<std::vector<double>, double> midranks(std::span<const double> pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        return pooled[i] < pooled[j];
    });
    std::vector<double> ranks(n, 0.0);
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t kk = i; kk <= j; ++kk) ranks[idx[kk]] = rank;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return {std::move(ranks), tie_term};
}

/// P(U <= u) for the exact null distribution of the Mann-Whitney U with
/// sample sizes m and n (no ties), by the counting recurrence
/// c(i, j, v) = c(i-1, j, v-j) + c(i, j-1, v), c(0, j, 0) = c(i, 0, 0) = 1.
inline double mw_exact_cdf(std::size_t m, std::size_t n, double u) {
    const std::size_t umax = m * n;
    std::vector<std::vector<double>> prev(n + 1, std::vector<double>(umax + 1, 0.0));
    for (std::size_t j = 0; j <= n; ++j) prev[j][0] = 1.0;  // i = 0
    for (std::size_t i = 1; i <= m; ++i) {
        std::vector<std::vector<double>> cur(n + 1, std::vector<double>(umax + 1, 0.0));
        cur[0][0] = 1.0;  // j = 0
        for (std::size_t j = 1; j <= n; ++j)
            for (std::size_t v = 0; v <= umax; ++v)
                cur[j][v] = (v >= j ? prev[j][v - j] : 0.0) + cur[j - 1][v];
        prev = std::move(cur);
    }
    double total = 0.0;
    double below = 0.0;
    for (std::size_t v = 0; v <= umax; ++v) {
        total += prev[n][v];
        if (static_cast<double>(v) <= u + 1e-12) below += prev[n][v];
    }
    return below / total;
}

}  // namespace detail

/// Mann-Whitney U test with midrank tie handling; exact enumeration when
/// |a|*|b| <= 400 and no ties are present, otherwise normal approximation
/// with tie and continuity corrections. Two-sided. The statistic is the U
/// of the first sample.
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw EmptyInput("mann_whitney_u: empty sample");
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto [ranks, tie_term] = detail::midranks(pooled);
    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < m; ++i) rank_sum_a += ranks[i];
    const double ua = rank_sum_a - static_cast<double>(m) * (static_cast<double>(m) + 1.0) / 2.0;
    const double ub = static_cast<double>(m) * static_cast<double>(n) - ua;

    TestResult result;
    result.statistic = ua;
    result.extra["u_b"] = ub;

    const bool no_ties = tie_term == 0.0;
    if (no_ties && m * n <= 400) {
        const double umin = std::min(ua, ub);
        result.p_value = std::min(1.0, 2.0 * detail::mw_exact_cdf(m, n, umin));
        result.extra["method"] = 0.0;  // exact
        return result;
    }
    const double mn = static_cast<double>(m) * static_cast<double>(n);
    const double big_n = static_cast<double>(m + n);
    const double sigma2 =
        mn / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if (sigma2 <= 0.0) {
        result.p_value = 1.0;  // all values tied
        result.extra["method"] = 1.0;
        return result;
    }
    const double z = (std::max(ua, ub) - mn / 2.0 - 0.5) / std::sqrt(sigma2);
    result.p_value = std::min(1.0, 2.0 * (1.0 - detail::normal_cdf(z)));
    result.extra["method"] = 1.0;  // normal approximation
    return result;
}

/// Anderson-Darling test of composite normality (mean and variance
/// estimated). statistic holds the raw A^2; extra carries the small-sample
/// adjusted A*^2 = A^2 (1 + 0.75/n + 2.25/n^2) that the p-value and the
/// 5% decision (A*^2 > 0.752) are based on.
inline TestResult anderson_darling_normal(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 8) throw DegenerateInput("anderson_darling_normal: need n >= 8");
    const double mean = detail::mean_of(x);
    const double var = detail::sample_variance(x, mean);
    if (var <= 0.0) throw DegenerateInput("anderson_darling_normal: zero variance");
    const double sd = std::sqrt(var);

    std::vector<double> z(x.begin(), x.end());
    std::sort(z.begin(), z.end());
    double a2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double zi = (z[i] - mean) / sd;
        const double zr = (z[n - 1 - i] - mean) / sd;
        double phi_lo = detail::normal_cdf(zi);
        double phi_hi = detail::normal_cdf(zr);
        phi_lo = std::clamp(phi_lo, 1e-300, 1.0 - 1e-16);
        phi_hi = std::clamp(phi_hi, 1e-300, 1.0 - 1e-16);
        a2 += (2.0 * static_cast<double>(i) + 1.0) * (std::log(phi_lo) + std::log1p(-phi_hi));
    }
    a2 = -static_cast<double>(n) - a2 / static_cast<double>(n);
    const double nd = static_cast<double>(n);
    const double adj = a2 * (1.0 + 0.75 / nd + 2.25 / (nd * nd));

    // D'Agostino & Stephens case-3 p-value segments on the adjusted statistic
    double p;
    if (adj < 0.2)
        p = 1.0 - std::exp(-13.436 + 101.14 * adj - 223.73 * adj * adj);
    else if (adj < 0.34)
        p = 1.0 - std::exp(-8.318 + 42.796 * adj - 59.938 * adj * adj);
    else if (adj < 0.6)
        p = std::exp(0.9177 - 4.279 * adj - 1.38 * adj * adj);
    else if (adj < 10.0)
        p = std::exp(1.2937 - 5.709 * adj + 0.0186 * adj * adj);
    else
        p = 0.0;

    TestResult result;
    result.statistic = a2;
    result.p_value = std::clamp(p, 0.0, 1.0);
    result.extra["adjusted"] = adj;
    result.extra["critical_5pct"] = 0.752;
    return result;
}

/// Trailing-window means: output[t] = mean(series[t .. t+window-1]) shifted
/// so that entry i corresponds to source position i + window - 1.
inline std::vector<double> trailing_mean(std::span<const double> series, std::size_t window) {
    if (window == 0 || window > series.size())
        throw DegenerateInput("trailing_mean: window must be in [1, length]");
    std::vector<double> out;
    out.reserve(series.size() - window + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i + 1 >= window) {
            out.push_back(acc / static_cast<double>(window));
            acc -= series[i + 1 - window];
        }
    }
    return out;
}

}  // namespace asme::stats
