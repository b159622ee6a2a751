#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "asme/errors.hpp"
#include "asme/rng.hpp"

namespace asme::hmm {

// Two-variable hidden Markov model with diagonal-Gaussian emissions over
// (price change, bid-ask imbalance).

struct HmmObservation {
    double delta_price = 0.0;
    double imbalance = 0.0;

    double operator[](std::size_t k) const { return k == 0 ? delta_price : imbalance; }
};

inline constexpr double kVarianceFloor = 1e-10;

struct HmmParams {
    std::vector<std::vector<double>> transition;     // row-stochastic
    std::vector<std::array<double, 2>> means;        // per state
    std::vector<std::array<double, 2>> variances;    // per state, diagonal, >= floor
    std::vector<double> initial;

    std::size_t n_states() const { return initial.size(); }

    void validate() const {
        const std::size_t n = n_states();
        if (n == 0 || transition.size() != n || means.size() != n || variances.size() != n)
            throw DegenerateInput("HmmParams: inconsistent sizes");
        double pi_sum = 0.0;
        for (double p : initial) pi_sum += p;
        if (std::fabs(pi_sum - 1.0) > 1e-9) throw DegenerateInput("HmmParams: initial not normalized");
        for (const auto& row : transition) {
            if (row.size() != n) throw DegenerateInput("HmmParams: transition not square");
            double s = 0.0;
            for (double a : row) {
                if (a < 0.0) throw DegenerateInput("HmmParams: negative transition");
                s += a;
            }
            if (std::fabs(s - 1.0) > 1e-9) throw DegenerateInput("HmmParams: row not stochastic");
        }
        for (const auto& v : variances)
            if (v[0] < kVarianceFloor || v[1] < kVarianceFloor)
                throw DegenerateInput("HmmParams: variance below floor");
    }
};

/// Log density of one observation under state j: the sum of the two
/// univariate Gaussian log pdfs (diagonal covariance).
inline double emission_logpdf(const HmmParams& params, std::size_t state,
                              const HmmObservation& obs) {
    double lp = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        const double var = params.variances[state][k];
        const double d = obs[k] - params.means[state][k];
        lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
    }
    return lp;
}

struct FitOptions {
    std::size_t n_states = 2;
    std::size_t max_iters = 500;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::size_t n_restarts = 5;
};

struct FitResult {
    HmmParams params;
    std::vector<double> log_likelihood_trace;  // per EM iteration of the best restart
};

namespace detail {

struct ForwardBackward {
    // gamma[t][i] posteriors, xi_sum[i][j] accumulated pair posteriors,
    // log-likelihood of the sequence
    std::vector<std::vector<double>> gamma;
    std::vector<std::vector<double>> xi_sum;
    double log_likelihood = 0.0;
};

/// Scaled forward-backward. Emission rows are exponentiated after a
/// per-step max shift, so near-degenerate variances neither overflow nor
/// zero out the recursion.
inline ForwardBackward forward_backward(const HmmParams& params,
                                        std::span<const HmmObservation> obs) {
    const std::size_t n = params.n_states();
    const std::size_t T = obs.size();
    ForwardBackward fb;
    fb.gamma.assign(T, std::vector<double>(n, 0.0));
    fb.xi_sum.assign(n, std::vector<double>(n, 0.0));

    std::vector<std::vector<double>> emis(T, std::vector<double>(n, 0.0));
    std::vector<double> shift(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> logb(n);
        for (std::size_t i = 0; i < n; ++i) {
            logb[i] = emission_logpdf(params, i, obs[t]);
            mx = std::max(mx, logb[i]);
        }
        shift[t] = mx;
        for (std::size_t i = 0; i < n; ++i) emis[t][i] = std::exp(logb[i] - mx);
    }

    std::vector<std::vector<double>> alpha(T, std::vector<double>(n, 0.0));
    std::vector<double> scale(T, 0.0);
    for (std::size_t i = 0; i < n; ++i) alpha[0][i] = params.initial[i] * emis[0][i];
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += alpha[t - 1][i] * params.transition[i][j];
                alpha[t][j] = s * emis[t][j];
            }
        }
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += alpha[t][i];
        if (c <= 0.0) {
            // every state assigns vanishing likelihood; fall back to uniform
            for (std::size_t i = 0; i < n; ++i) alpha[t][i] = 1.0 / static_cast<double>(n);
            c = 1e-300;
        } else {
            for (std::size_t i = 0; i < n; ++i) alpha[t][i] /= c;
        }
        scale[t] = c;
        fb.log_likelihood += std::log(c) + shift[t];
    }

    std::vector<std::vector<double>> beta(T, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) beta[T - 1][i] = 1.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += params.transition[i][j] * emis[t + 1][j] * beta[t + 1][j];
            beta[t][i] = s / scale[t + 1];
        }
    }

    for (std::size_t t = 0; t < T; ++t) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            fb.gamma[t][i] = alpha[t][i] * beta[t][i];
            norm += fb.gamma[t][i];
        }
        if (norm > 0.0)
            for (std::size_t i = 0; i < n; ++i) fb.gamma[t][i] /= norm;
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                fb.xi_sum[i][j] += alpha[t][i] * params.transition[i][j] * emis[t + 1][j] *
                                   beta[t + 1][j] / scale[t + 1];
    }
    return fb;
}

/// Seeded 2-means-style split used to initialize the EM restarts.
inline HmmParams kmeans_init(std::span<const std::span<const HmmObservation>> sequences,
                             std::size_t n_states, Xoshiro256StarStar& rng) {
    std::vector<const HmmObservation*> all;
    for (const auto& seq : sequences)
        for (const auto& o : seq) all.push_back(&o);
    const std::size_t n_obs = all.size();

    std::vector<std::array<double, 2>> centers(n_states);
    for (auto& c : centers) {
        const auto& o = *all[rng.uniform_below(n_obs)];
        c = {o.delta_price, o.imbalance};
    }
    std::vector<std::size_t> assign(n_obs, 0);
    for (int pass = 0; pass < 20; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < n_obs; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < n_states; ++c) {
                const double d0 = (*all[i])[0] - centers[c][0];
                const double d1 = (*all[i])[1] - centers[c][1];
                const double d = d0 * d0 + d1 * d1;
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            if (assign[i] != arg) {
                assign[i] = arg;
                changed = true;
            }
        }
        std::vector<std::array<double, 2>> sums(n_states, {0.0, 0.0});
        std::vector<std::size_t> counts(n_states, 0);
        for (std::size_t i = 0; i < n_obs; ++i) {
            sums[assign[i]][0] += (*all[i])[0];
            sums[assign[i]][1] += (*all[i])[1];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < n_states; ++c) {
            if (counts[c] == 0) {  // respawn an empty cluster
                const auto& o = *all[rng.uniform_below(n_obs)];
                centers[c] = {o.delta_price, o.imbalance};
                continue;
            }
            centers[c] = {sums[c][0] / static_cast<double>(counts[c]),
                          sums[c][1] / static_cast<double>(counts[c])};
        }
        if (!changed) break;
    }

    HmmParams params;
    params.means.resize(n_states);
    params.variances.assign(n_states, {1.0, 1.0});
    params.initial.assign(n_states, 1.0 / static_cast<double>(n_states));
    params.transition.assign(n_states, std::vector<double>(n_states, 0.0));
    std::vector<std::size_t> counts(n_states, 0);
    std::vector<std::array<double, 2>> ss(n_states, {0.0, 0.0});
    for (std::size_t i = 0; i < n_obs; ++i) ++counts[assign[i]];
    for (std::size_t c = 0; c < n_states; ++c) params.means[c] = centers[c];
    for (std::size_t i = 0; i < n_obs; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            const double d = (*all[i])[k] - centers[assign[i]][k];
            ss[assign[i]][k] += d * d;
        }
    }
    for (std::size_t c = 0; c < n_states; ++c)
        for (std::size_t k = 0; k < 2; ++k)
            params.variances[c][k] =
                std::max(counts[c] > 1 ? ss[c][k] / static_cast<double>(counts[c]) : 1.0,
                         kVarianceFloor);

    // transition counts from the per-sequence assignment bigrams, add-one smoothed
    std::size_t offset = 0;
    std::vector<std::vector<double>> bigram(n_states, std::vector<double>(n_states, 1.0));
    std::vector<double> first_counts(n_states, 1.0);
    for (const auto& seq : sequences) {
        if (!seq.empty()) first_counts[assign[offset]] += 1.0;
        for (std::size_t t = 0; t + 1 < seq.size(); ++t)
            bigram[assign[offset + t]][assign[offset + t + 1]] += 1.0;
        offset += seq.size();
    }
    for (std::size_t i = 0; i < n_states; ++i) {
        double s = 0.0;
        for (double v : bigram[i]) s += v;
        for (std::size_t j = 0; j < n_states; ++j) params.transition[i][j] = bigram[i][j] / s;
    }
    double fs = 0.0;
    for (double v : first_counts) fs += v;
    for (std::size_t i = 0; i < n_states; ++i) params.initial[i] = first_counts[i] / fs;
    return params;
}

}  // namespace detail

/// Baum-Welch over one or more observation sequences (per-sequence
/// forward-backward, pooled M-step; pi from the averaged first-step
/// posteriors). Initialization is a seeded k-means split; n_restarts keep
/// the best final log-likelihood. The log-likelihood trace of the winning
/// restart is returned and is non-decreasing up to arithmetic noise.
inline FitResult fit_baum_welch(const std::vector<std::vector<HmmObservation>>& sequences,
                                const FitOptions& options = {}) {
    std::size_t total = 0;
    for (const auto& seq : sequences) total += seq.size();
    if (sequences.empty() || total < 2) throw DegenerateInput("fit_baum_welch: too few observations");
    {
        bool distinct = false;
        const HmmObservation* first = nullptr;
        for (const auto& seq : sequences)
            for (const auto& o : seq) {
                if (!first) first = &o;
                else if (o.delta_price != first->delta_price || o.imbalance != first->imbalance)
                    distinct = true;
            }
        if (!distinct) throw DegenerateInput("fit_baum_welch: fewer than 2 distinct observations");
    }

    std::vector<std::span<const HmmObservation>> views;
    views.reserve(sequences.size());
    for (const auto& seq : sequences) views.emplace_back(seq);

    FitResult best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < std::max<std::size_t>(1, options.n_restarts); ++restart) {
        Xoshiro256StarStar rng(derive_run_seed(options.seed, restart));
        HmmParams params = detail::kmeans_init(views, options.n_states, rng);
        std::vector<double> trace;
        double prev_ll = -std::numeric_limits<double>::infinity();

        for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
            const std::size_t n = options.n_states;
            std::vector<std::vector<double>> xi_sum(n, std::vector<double>(n, 0.0));
            std::vector<double> gamma_sum(n, 0.0);          // over t = 0..T-2 per sequence
            std::vector<double> gamma_total(n, 0.0);        // over all t
            std::vector<std::array<double, 2>> wsum(n, {0.0, 0.0});
            std::vector<std::array<double, 2>> wsq(n, {0.0, 0.0});
            std::vector<double> pi_acc(n, 0.0);
            double ll = 0.0;

            for (const auto& seq : views) {
                if (seq.empty()) continue;
                const auto fb = detail::forward_backward(params, seq);
                ll += fb.log_likelihood;
                for (std::size_t i = 0; i < n; ++i) {
                    pi_acc[i] += fb.gamma[0][i];
                    for (std::size_t j = 0; j < n; ++j) xi_sum[i][j] += fb.xi_sum[i][j];
                }
                for (std::size_t t = 0; t < seq.size(); ++t)
                    for (std::size_t i = 0; i < n; ++i) {
                        const double g = fb.gamma[t][i];
                        gamma_total[i] += g;
                        if (t + 1 < seq.size()) gamma_sum[i] += g;
                        wsum[i][0] += g * seq[t].delta_price;
                        wsum[i][1] += g * seq[t].imbalance;
                    }
                for (std::size_t t = 0; t < seq.size(); ++t)
                    for (std::size_t i = 0; i < n; ++i) {
                        const double g = fb.gamma[t][i];
                        const double d0 = seq[t].delta_price;
                        const double d1 = seq[t].imbalance;
                        wsq[i][0] += g * d0 * d0;
                        wsq[i][1] += g * d1 * d1;
                    }
            }

            trace.push_back(ll);

            // M step
            for (std::size_t i = 0; i < n; ++i) {
                if (gamma_total[i] > 0.0) {
                    for (std::size_t k = 0; k < 2; ++k) {
                        const double mean = wsum[i][k] / gamma_total[i];
                        const double var = wsq[i][k] / gamma_total[i] - mean * mean;
                        params.means[i][k] = mean;
                        params.variances[i][k] = std::max(var, kVarianceFloor);
                    }
                }
                if (gamma_sum[i] > 0.0) {
                    for (std::size_t j = 0; j < n; ++j)
                        params.transition[i][j] = xi_sum[i][j] / gamma_sum[i];
                    double s = 0.0;
                    for (double v : params.transition[i]) s += v;
                    if (s > 0.0)
                        for (double& v : params.transition[i]) v /= s;
                }
            }
            double pi_total = 0.0;
            for (double v : pi_acc) pi_total += v;
            if (pi_total > 0.0)
                for (std::size_t i = 0; i < n; ++i) params.initial[i] = pi_acc[i] / pi_total;

            if (iter > 0 && std::fabs(ll - prev_ll) < options.tol) break;
            prev_ll = ll;
        }

        if (!trace.empty() && trace.back() > best_ll) {
            best_ll = trace.back();
            best.params = params;
            best.log_likelihood_trace = std::move(trace);
        }
    }
    return best;
}

struct ViterbiResult {
    std::vector<std::size_t> states;
    double log_probability = 0.0;
};

/// Maximum-probability state path in log space; ties resolve toward the
/// lower state index.
inline ViterbiResult viterbi(const HmmParams& params, std::span<const HmmObservation> obs) {
    const std::size_t n = params.n_states();
    const std::size_t T = obs.size();
    ViterbiResult result;
    if (T == 0) return result;

    std::vector<std::vector<double>> delta(T, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::size_t>> back(T, std::vector<std::size_t>(n, 0));
    const double neg_inf = -std::numeric_limits<double>::infinity();
    auto safe_log = [&](double p) { return p > 0.0 ? std::log(p) : neg_inf; };

    for (std::size_t i = 0; i < n; ++i)
        delta[0][i] = safe_log(params.initial[i]) + emission_logpdf(params, i, obs[0]);
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            double best = neg_inf;
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double cand = delta[t - 1][i] + safe_log(params.transition[i][j]);
                if (cand > best) {
                    best = cand;
                    arg = i;
                }
            }
            delta[t][j] = best + emission_logpdf(params, j, obs[t]);
            back[t][j] = arg;
        }

    std::size_t last = 0;
    double best = neg_inf;
    for (std::size_t i = 0; i < n; ++i)
        if (delta[T - 1][i] > best) {
            best = delta[T - 1][i];
            last = i;
        }
    result.log_probability = best;
    result.states.resize(T);
    result.states[T - 1] = last;
    for (std::size_t t = T - 1; t-- > 0;) result.states[t] = back[t + 1][result.states[t + 1]];
    return result;
}

struct SampleResult {
    std::vector<std::size_t> states;
    std::vector<HmmObservation> observations;
};

/// Generative direction: q_1 ~ pi, q_{t+1} ~ A[q_t], o_t ~ N(mu, diag var).
inline SampleResult sample(const HmmParams& params, std::size_t length, Xoshiro256StarStar& rng) {
    params.validate();
    SampleResult out;
    out.states.resize(length);
    out.observations.resize(length);
    auto draw_from = [&](std::span<const double> probs) {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    };
    for (std::size_t t = 0; t < length; ++t) {
        const std::size_t q = t == 0 ? draw_from(params.initial)
                                     : draw_from(params.transition[out.states[t - 1]]);
        out.states[t] = q;
        out.observations[t].delta_price =
            rng.normal(params.means[q][0], std::sqrt(params.variances[q][0]));
        out.observations[t].imbalance =
            rng.normal(params.means[q][1], std::sqrt(params.variances[q][1]));
    }
    return out;
}

}  // namespace asme::hmm
