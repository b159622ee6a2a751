#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "asme/classify.hpp"
#include "asme/dynamics.hpp"
#include "asme/ensemble.hpp"
#include "asme/hmm.hpp"
#include "asme/io.hpp"
#include "asme/market.hpp"
#include "asme/separatrix.hpp"
#include "asme/stats.hpp"

namespace asme::cli {

using io::json;

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPipeline = 3;

struct CommonOptions {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::size_t runs = 50;
    std::string out_dir = "out";
    std::size_t stride = 10;
    std::vector<int> taus = {50, 250, 1000};
    int embed_dim = 4;
    std::size_t bins = 20;
    double delta = 0.1;
    std::size_t trees = 100;
    double learning_rate = 0.1;
    std::size_t max_iters = 500;
    std::string model = "both";  // logistic | gbm | both
    std::uint64_t split_seed = 7;
    std::string adf_regression = "ct";
    bool acf_delay = false;
    double eps0 = 0.5;
    double eps1 = 2.0;
    std::size_t label_window = 100;
};

namespace detail {

inline MarketConfig resolve_config(const CommonOptions& options) {
    MarketConfig config =
        options.config_path ? io::load_config(*options.config_path) : MarketConfig{};
    if (options.seed) config.seed = *options.seed;
    config.validate();
    return config;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::vector<std::vector<double>> group_closes(const Ensemble& ens, TerminalKind kind) {
    std::vector<std::vector<double>> out;
    for (std::size_t i : ens.indices_with(kind)) out.push_back(ens.trajectories[i].closes());
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Analysis stages. Each returns a JSON fragment for report.json and writes
// any plot-ready CSVs into `out`; they throw on unusable inputs.

/// Stationarity, terminal-price and divergence-time statistics.
inline json stage_analyze(const Ensemble& ens, const CommonOptions& options,
                          const std::filesystem::path& out, io::ManifestWriter* manifest) {
    json report;

    const auto positive = ens.indices_with(TerminalKind::Positive);
    const auto zero = ens.indices_with(TerminalKind::ReachedZero);
    report["groups"] = {{"positive", positive.size()},
                        {"zero", zero.size()},
                        {"undetermined",
                         ens.size() - positive.size() - zero.size()}};

    const auto regression = options.adf_regression == "c" ? stats::AdfRegression::Constant
                                                          : stats::AdfRegression::ConstantTrend;

    // unit-root tests on the positive branch
    if (!positive.empty()) {
        std::vector<double> adf_stats, adf_ps;
        for (std::size_t i : positive) {
            const auto closes = ens.trajectories[i].closes();
            const auto res = stats::adf_test(closes, std::nullopt, regression);
            adf_stats.push_back(res.statistic);
            adf_ps.push_back(res.p_value);
        }
        auto agg = [](std::span<const double> v) {
            json j;
            const auto s = summarize(v);
            j["avg"] = s.mean;
            j["min"] = s.min;
            j["max"] = s.max;
            j["std"] = s.std;
            j["n"] = v.size();
            return j;
        };
        if (adf_stats.size() >= 2) {
            report["adf_positive"] = {{"statistic", agg(adf_stats)}, {"p_value", agg(adf_ps)}};
        } else {
            report["adf_positive"] = {{"statistic", adf_stats.front()},
                                      {"p_value", adf_ps.front()},
                                      {"n", 1}};
        }
    }

    // time to zero (earliest step at or below zero_threshold)
    std::vector<double> t2z;
    for (std::size_t i : zero) {
        const auto closes = ens.trajectories[i].closes();
        if (const auto t = time_to_zero(closes, ens.config.zero_threshold))
            t2z.push_back(static_cast<double>(*t));
    }
    if (t2z.size() >= 2) {
        const auto s = time_to_zero_summary(t2z);
        report["time_to_zero"] = {{"mean", s.mean},     {"median", s.median},
                                  {"min", s.min},       {"max", s.max},
                                  {"std", s.std},       {"cv", s.cv},
                                  {"skew", s.skew},     {"excess_kurtosis", s.excess_kurtosis},
                                  {"p5", s.p5},         {"p95", s.p95},
                                  {"iqr", s.iqr},       {"n", s.n}};
    }

    // terminal prices of the positive branch
    if (positive.size() >= 2) {
        std::vector<double> terminals;
        for (std::size_t i : positive) terminals.push_back(ens.trajectories[i].closes().back());
        const auto s = summarize(terminals);
        json block{{"mean", s.mean}, {"median", s.median}, {"std", s.std},
                   {"min", s.min},   {"max", s.max},       {"n", s.n}};
        if (terminals.size() >= 8) {
            const auto ad = stats::anderson_darling_normal(terminals);
            block["anderson_darling"] = {{"statistic", ad.statistic},
                                         {"adjusted", ad.extra.at("adjusted")},
                                         {"p_value", ad.p_value},
                                         {"rejected_5pct", ad.extra.at("adjusted") > 0.752}};
        }
        report["terminal_prices"] = block;
    }

    // group divergence timing over 10-step trailing means
    if (positive.size() >= 2 && zero.size() >= 2) {
        constexpr std::size_t kWindow = 10;
        const std::size_t horizon = ens.trajectories.front().steps.size();
        std::vector<std::vector<double>> pos_means, zero_means;
        for (std::size_t i : positive)
            pos_means.push_back(stats::trailing_mean(ens.trajectories[i].closes(), kWindow));
        for (std::size_t i : zero)
            zero_means.push_back(stats::trailing_mean(ens.trajectories[i].closes(), kWindow));

        std::vector<std::vector<double>> rows;
        long long first_welch = -1;
        long long first_mw = -1;
        int welch_streak = 0, mw_streak = 0;
        for (std::size_t t = kWindow; t <= horizon; t += 10) {
            const std::size_t idx = t - kWindow;
            std::vector<double> a, b;
            for (const auto& m : pos_means) a.push_back(m[idx]);
            for (const auto& m : zero_means) b.push_back(m[idx]);
            double welch_p = 1.0, mw_p = 1.0, welch_stat = 0.0, mw_stat = 0.0;
            try {
                const auto w = stats::welch_t_test(b, a);  // zero minus positive, paper sign
                welch_p = w.p_value;
                welch_stat = w.statistic;
            } catch (const DegenerateInput&) {
            }
            const auto mw = stats::mann_whitney_u(b, a);
            mw_p = mw.p_value;
            mw_stat = mw.statistic;
            rows.push_back({static_cast<double>(t), welch_stat, welch_p, mw_stat, mw_p});
            // first step where three consecutive grid points reject at 5%
            welch_streak = welch_p < 0.05 ? welch_streak + 1 : 0;
            mw_streak = mw_p < 0.05 ? mw_streak + 1 : 0;
            if (first_welch < 0 && welch_streak >= 3)
                first_welch = static_cast<long long>(t) - 20;
            if (first_mw < 0 && mw_streak >= 3) first_mw = static_cast<long long>(t) - 20;
        }
        io::write_csv(out / "divergence_tests.csv", "step,welch_t,welch_p,mw_u,mw_p", rows);
        if (manifest) manifest->declare("divergence_tests.csv");
        report["divergence_tests"] = {
            {"first_significant_welch", first_welch},
            {"first_significant_mann_whitney", first_mw},
            {"trailing_window", kWindow},
            {"file", "divergence_tests.csv"}};
    }

    // conditional ensemble moments (plot-ready)
    {
        std::vector<std::vector<double>> rows;
        const std::size_t horizon = ens.trajectories.front().steps.size();
        auto safe_moments = [&](LabelFilter f) -> std::optional<EnsembleMoments> {
            try {
                return ensemble_moments(ens, f);
            } catch (const EmptyInput&) {
                return std::nullopt;
            }
        };
        const auto all = safe_moments(LabelFilter::All);
        const auto pos = safe_moments(LabelFilter::Positive);
        const auto zer = safe_moments(LabelFilter::ReachedZero);
        for (std::size_t t = 0; t < horizon; ++t) {
            std::vector<double> row{static_cast<double>(t + 1)};
            auto push = [&](const std::optional<EnsembleMoments>& m) {
                row.push_back(m ? m->mean[t] : std::numeric_limits<double>::quiet_NaN());
                row.push_back(m ? m->std[t] : std::numeric_limits<double>::quiet_NaN());
            };
            push(all);
            push(pos);
            push(zer);
            rows.push_back(std::move(row));
        }
        io::write_csv(out / "ensemble_moments.csv",
                      "step,mean_all,std_all,mean_positive,std_positive,mean_zero,std_zero", rows);
        if (manifest) manifest->declare("ensemble_moments.csv");
    }
    return report;
}

/// Separatrix estimates via the three estimators.
inline json stage_separatrix(const Ensemble& ens, const CommonOptions& options) {
    std::vector<std::size_t> lengths;
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        if (ens.labels[i].value == TerminalKind::Undetermined) continue;
        labeled.push_back(i);
        lengths.push_back(ens.trajectories[i].steps.size());
    }
    if (labeled.empty()) throw OneClassOnly("separatrix: no determinate trajectories");
    const std::size_t t_c = std::max<std::size_t>(1, separatrix::comparison_time(lengths));

    separatrix::SeparatrixInput input;
    input.t_c = t_c;
    for (std::size_t i : labeled) {
        input.values_at_tc.push_back(ens.trajectories[i].steps[t_c - 1].close_price);
        input.labels.push_back(ens.labels[i].value == TerminalKind::ReachedZero
                                   ? separatrix::Group::Zero
                                   : separatrix::Group::Positive);
    }

    auto to_json = [&](const separatrix::SeparatrixEstimate& est) {
        json diag;
        for (const auto& [k, v] : est.diagnostics) diag[k] = v;
        return json{{"method", separatrix::to_string(est.method)},
                    {"t_c", t_c},
                    {"estimate", est.value},
                    {"diagnostics", diag}};
    };

    json out = json::array();
    out.push_back(to_json(separatrix::separatrix_classification(input)));
    out.push_back(to_json(separatrix::separatrix_entropy(input, options.bins)));
    out.push_back(to_json(separatrix::separatrix_hinge(input, options.delta)));
    return out;
}

namespace detail {

/// Delay at which the autocorrelation first drops below 1/e.
inline int acf_first_crossing_delay(std::span<const double> series) {
    const std::size_t n = series.size();
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : series) denom += (v - mean) * (v - mean);
    if (denom <= 0.0) return 1;
    for (std::size_t lag = 1; lag < n - 1; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i)
            acc += (series[i] - mean) * (series[i + lag] - mean);
        if (acc / denom < 1.0 / std::numbers::e) return static_cast<int>(lag);
    }
    return static_cast<int>(n / 2);
}

}  // namespace detail

/// Chaos diagnostics: correlation dimension, entropies, largest Lyapunov
/// exponent per trajectory; Poincare projections and curves for the first
/// trajectory.
inline json stage_dynamics(const Ensemble& ens, const CommonOptions& options,
                           const std::filesystem::path& out, io::ManifestWriter* manifest) {
    json report;
    const int m = options.embed_dim;
    constexpr int kDimensionTau = 500;  // delay with the most stable dimension estimates
    constexpr int kLyapunovTau = 250;

    json per_traj = json::array();
    std::vector<double> d2s, apens, sampens, lambdas, lambdas_acf;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const auto closes = ens.trajectories[i].closes();
        json row{{"run_index", i}, {"label", to_string(ens.labels[i].value)}};
        try {
            const auto curve =
                dynamics::correlation_dimension(closes, {m, kDimensionTau});
            if (curve.fitted_slope) {
                row["d2"] = *curve.fitted_slope;
                d2s.push_back(*curve.fitted_slope);
            }
        } catch (const std::exception& e) {
            row["d2_error"] = e.what();
        }
        try {
            const double apen = dynamics::approx_entropy(closes, 2);
            row["apen"] = apen;
            apens.push_back(apen);
            const auto sampen = dynamics::sample_entropy(closes, 2);
            if (sampen) {
                row["sampen"] = *sampen;
                row["ks_entropy"] = *sampen;
                sampens.push_back(*sampen);
            }
        } catch (const std::exception& e) {
            row["entropy_error"] = e.what();
        }
        try {
            const auto lle = dynamics::lyapunov_rosenstein(closes, {m, kLyapunovTau});
            row["lambda"] = lle.lambda;
            lambdas.push_back(lle.lambda);
        } catch (const std::exception& e) {
            row["lambda_error"] = e.what();
        }
        if (options.acf_delay) {
            try {
                const int tau_acf = detail::acf_first_crossing_delay(closes);
                const auto lle = dynamics::lyapunov_rosenstein(closes, {m, tau_acf});
                row["lambda_acf"] = lle.lambda;
                row["tau_acf"] = tau_acf;
                lambdas_acf.push_back(lle.lambda);
            } catch (const std::exception& e) {
                row["lambda_acf_error"] = e.what();
            }
        }
        per_traj.push_back(std::move(row));
    }

    auto agg = [](std::span<const double> v) -> json {
        if (v.size() < 2) return nullptr;
        const auto s = summarize(v);
        return json{{"avg", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"n", s.n}};
    };
    report["fractal_dimension"] = {{"tau", kDimensionTau}, {"m", m}, {"summary", agg(d2s)}};
    report["entropy"] = {{"apen", agg(apens)}, {"sampen", agg(sampens)}, {"ks", agg(sampens)}};
    report["lyapunov"] = {{"tau", kLyapunovTau}, {"summary", agg(lambdas)}};
    if (options.acf_delay) report["lyapunov"]["acf_summary"] = agg(lambdas_acf);
    report["per_trajectory"] = std::move(per_traj);

    // plot-ready artifacts from the first trajectory
    if (!ens.trajectories.empty()) {
        const auto closes = ens.trajectories.front().closes();
        for (int tau : options.taus) {
            try {
                const auto projections = dynamics::poincare_points(closes, m, tau);
                for (const auto& proj : projections) {
                    char name[64];
                    std::snprintf(name, sizeof name, "poincare_tau%d_c%d_c%d.csv", tau,
                                  proj.coord_a, proj.coord_b);
                    std::vector<std::vector<double>> rows;
                    rows.reserve(proj.points.size());
                    for (const auto& [x, y] : proj.points) rows.push_back({x, y});
                    io::write_csv(out / name, "x,y", rows);
                    if (manifest) manifest->declare(name);
                }
            } catch (const std::exception&) {
                // series too short for this delay; skip the projection set
            }
        }
        try {
            const auto curve = dynamics::correlation_dimension(closes, {m, kDimensionTau});
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < curve.radii.size(); ++i)
                rows.push_back({curve.radii[i], curve.c_values[i]});
            io::write_csv(out / "correlation_curve.csv", "r,C", rows);
            if (manifest) manifest->declare("correlation_curve.csv");
        } catch (const std::exception&) {
        }
        try {
            const auto lle = dynamics::lyapunov_rosenstein(closes, {m, kLyapunovTau});
            std::vector<std::vector<double>> rows;
            for (std::size_t k = 0; k < lle.divergence_curve.size(); ++k)
                rows.push_back({static_cast<double>(k), lle.divergence_curve[k]});
            io::write_csv(out / "divergence_curve.csv", "k,mean_log_divergence", rows);
            if (manifest) manifest->declare("divergence_curve.csv");
        } catch (const std::exception&) {
        }
    }
    return report;
}

/// Absorption-probability classifiers on a trajectory-level 70/30 split.
inline json stage_predict(const Ensemble& ens, const CommonOptions& options) {
    const auto split = classify::split_trajectories(ens, 0.7, options.split_seed);
    if (split.train.empty() || split.test.empty())
        throw DegenerateInput("predict: split produced an empty side");
    const auto train = classify::dataset_from(ens, split.train, options.stride);
    const auto test = classify::dataset_from(ens, split.test, options.stride);
    if (train.empty() || test.empty())
        throw DegenerateInput("predict: empty dataset after striding");

    std::vector<int> truth;
    truth.reserve(test.size());
    for (const auto& pt : test) truth.push_back(pt.label);

    auto metrics_json = [&](const classify::Metrics& m) {
        json j{{"accuracy", m.accuracy},
               {"confusion",
                {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}}};
        auto opt = [](const std::optional<double>& v) {
            return v ? json(*v) : json(nullptr);
        };
        j["precision_rz"] = opt(m.precision[0]);
        j["recall_rz"] = opt(m.recall[0]);
        j["precision_nrz"] = opt(m.precision[1]);
        j["recall_nrz"] = opt(m.recall[1]);
        return j;
    };

    json report{{"split_seed", options.split_seed},
                {"stride", options.stride},
                {"train_trajectories", split.train.size()},
                {"test_trajectories", split.test.size()},
                {"train_points", train.size()},
                {"test_points", test.size()}};

    if (options.model == "logistic" || options.model == "both") {
        classify::LogisticFitOptions fit_options;
        if (options.max_iters) fit_options.max_iters = std::max<std::size_t>(options.max_iters, 1000);
        const auto model = classify::logistic_fit(train, fit_options);
        std::vector<double> probs;
        probs.reserve(test.size());
        for (const auto& pt : test) probs.push_back(classify::logistic_predict(model, pt).p_positive);
        report["logistic"] = {{"coefficients",
                               {{"bias", model.bias},
                                {"price", model.w_price},
                                {"time_norm", model.w_time}}},
                              {"metrics", metrics_json(classify::evaluate(probs, truth))}};
    }
    if (options.model == "gbm" || options.model == "both") {
        classify::GbmFitOptions fit_options;
        fit_options.n_trees = options.trees;
        fit_options.learning_rate = options.learning_rate;
        const auto model = classify::gbm_fit(train, fit_options);
        std::vector<double> probs;
        probs.reserve(test.size());
        for (const auto& pt : test) probs.push_back(classify::gbm_predict(model, pt).p_positive);
        report["gbm"] = {{"n_trees", options.trees},
                         {"learning_rate", options.learning_rate},
                         {"metrics", metrics_json(classify::evaluate(probs, truth))}};
    }
    return report;
}

/// Observation sequences (price change, bid-ask imbalance) for the HMM.
inline std::vector<std::vector<hmm::HmmObservation>> hmm_observations(const Ensemble& ens) {
    std::vector<std::vector<hmm::HmmObservation>> sequences;
    sequences.reserve(ens.size());
    for (const auto& traj : ens.trajectories) {
        std::vector<hmm::HmmObservation> seq;
        seq.reserve(traj.steps.size());
        double prev = traj.initial_price;
        for (const auto& rec : traj.steps) {
            seq.push_back({rec.close_price - prev, static_cast<double>(rec.imbalance)});
            prev = rec.close_price;
        }
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

/// Two-state regime model over (price change, imbalance).
inline json stage_hmm(const Ensemble& ens, const CommonOptions& options,
                      const std::filesystem::path& out, io::ManifestWriter* manifest) {
    const auto sequences = hmm_observations(ens);
    hmm::FitOptions fit_options;
    fit_options.seed = options.split_seed;
    fit_options.max_iters = options.max_iters;
    const auto fit = hmm::fit_baum_welch(sequences, fit_options);

    json report{{"log_likelihood", fit.log_likelihood_trace.back()},
                {"iterations", fit.log_likelihood_trace.size()},
                {"transition", fit.params.transition},
                {"initial", fit.params.initial}};
    json means = json::array();
    json variances = json::array();
    for (std::size_t s = 0; s < fit.params.n_states(); ++s) {
        means.push_back({{"delta_price", fit.params.means[s][0]},
                         {"imbalance", fit.params.means[s][1]}});
        variances.push_back({{"delta_price", fit.params.variances[s][0]},
                             {"imbalance", fit.params.variances[s][1]}});
    }
    report["means"] = std::move(means);
    report["variances"] = std::move(variances);

    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto path = hmm::viterbi(fit.params, sequences[i]);
        std::vector<std::vector<double>> rows;
        rows.reserve(path.states.size());
        for (std::size_t t = 0; t < path.states.size(); ++t)
            rows.push_back({static_cast<double>(t + 1), static_cast<double>(path.states[t])});
        char name[48];
        std::snprintf(name, sizeof name, "viterbi_%05zu.csv", i);
        io::write_csv(out / name, "step,state", rows);
        if (manifest) manifest->declare(name);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Subcommands.

inline int cmd_simulate(const CommonOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    try {
        const MarketConfig config = detail::resolve_config(options);
        std::filesystem::create_directories(options.out_dir);
        io::ManifestWriter manifest(options.out_dir, "simulate", io::config_to_json(config),
                                    config.seed);
        const Trajectory traj = run_simulation(config);
        io::write_trajectory_csv(std::filesystem::path(options.out_dir) / "trajectory.csv", traj);
        manifest.declare("trajectory.csv");
        manifest.finish(detail::seconds_since(start));
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

inline int cmd_ensemble(const CommonOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    try {
        const MarketConfig config = detail::resolve_config(options);
        const std::uint64_t base_seed = options.seed.value_or(config.seed);
        std::filesystem::create_directories(options.out_dir);
        io::ManifestWriter manifest(options.out_dir, "ensemble", io::config_to_json(config),
                                    base_seed);
        LabelSpec spec{options.eps0, options.eps1, options.label_window};
        const Ensemble ens = run_ensemble(config, options.runs, base_seed, spec);
        io::write_ensemble(options.out_dir, ens);
        manifest.declare("ensemble.json");
        for (std::size_t i = 0; i < ens.size(); ++i) manifest.declare(io::run_filename(i));
        manifest.finish(detail::seconds_since(start));
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

/// Shared wrapper for the single-stage analysis subcommands: loads the
/// ensemble directory, runs one stage into out_dir, writes report + manifest.
template <typename StageFn>
inline int run_stage_command(const std::string& name, const std::string& ensemble_dir,
                             const CommonOptions& options, StageFn&& stage) {
    const auto start = std::chrono::steady_clock::now();
    try {
        const Ensemble ens = io::read_ensemble(ensemble_dir);
        std::filesystem::path out = options.out_dir;
        std::filesystem::create_directories(out);
        io::ManifestWriter manifest(out, name, io::config_to_json(ens.config), ens.base_seed);
        json report = stage(ens, out, &manifest);
        io::write_json(out / (name + ".json"), report);
        manifest.declare(name + ".json");
        manifest.finish(detail::seconds_since(start));
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

inline int cmd_analyze(const std::string& ensemble_dir, const CommonOptions& options) {
    return run_stage_command("analyze", ensemble_dir, options,
                             [&](const Ensemble& ens, const std::filesystem::path& out,
                                 io::ManifestWriter* manifest) {
                                 return stage_analyze(ens, options, out, manifest);
                             });
}

inline int cmd_dynamics(const std::string& ensemble_dir, const CommonOptions& options) {
    return run_stage_command("dynamics", ensemble_dir, options,
                             [&](const Ensemble& ens, const std::filesystem::path& out,
                                 io::ManifestWriter* manifest) {
                                 return stage_dynamics(ens, options, out, manifest);
                             });
}

inline int cmd_separatrix(const std::string& ensemble_dir, const CommonOptions& options) {
    return run_stage_command("separatrix", ensemble_dir, options,
                             [&](const Ensemble& ens, const std::filesystem::path&,
                                 io::ManifestWriter*) { return stage_separatrix(ens, options); });
}

inline int cmd_predict(const std::string& ensemble_dir, const CommonOptions& options) {
    return run_stage_command("predict", ensemble_dir, options,
                             [&](const Ensemble& ens, const std::filesystem::path&,
                                 io::ManifestWriter*) { return stage_predict(ens, options); });
}

inline int cmd_hmm(const std::string& ensemble_dir, const CommonOptions& options) {
    return run_stage_command("hmm", ensemble_dir, options,
                             [&](const Ensemble& ens, const std::filesystem::path& out,
                                 io::ManifestWriter* manifest) {
                                 return stage_hmm(ens, options, out, manifest);
                             });
}

/// Full run: simulate the ensemble, then every analysis stage; stage errors
/// are recorded, not fatal. Exit 0 when the simulation and at least one
/// analysis stage succeed.
inline int cmd_pipeline(const CommonOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    MarketConfig config;
    try {
        config = detail::resolve_config(options);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    const std::uint64_t base_seed = options.seed.value_or(config.seed);
    const std::filesystem::path root = options.out_dir;
    json report{{"config", io::config_to_json(config)},
                {"base_seed", base_seed},
                {"runs", options.runs}};
    json stages;

    Ensemble ens;
    try {
        std::filesystem::create_directories(root / "ensemble");
        io::ManifestWriter manifest(root / "ensemble", "ensemble", io::config_to_json(config),
                                    base_seed);
        LabelSpec spec{options.eps0, options.eps1, options.label_window};
        ens = run_ensemble(config, options.runs, base_seed, spec);
        io::write_ensemble(root / "ensemble", ens);
        manifest.declare("ensemble.json");
        for (std::size_t i = 0; i < ens.size(); ++i) manifest.declare(io::run_filename(i));
        manifest.finish(detail::seconds_since(start));
        stages["ensemble"] = "ok";
    } catch (const std::exception& e) {
        std::cerr << "pipeline: simulation failed: " << e.what() << "\n";
        return kExitPipeline;
    }

    int analysis_ok = 0;
    auto run_stage = [&](const std::string& name, auto&& fn) {
        const auto stage_start = std::chrono::steady_clock::now();
        try {
            const std::filesystem::path out = root / name;
            std::filesystem::create_directories(out);
            io::ManifestWriter manifest(out, name, io::config_to_json(config), base_seed);
            report[name] = fn(out, &manifest);
            manifest.declare(name + ".json");
            io::write_json(out / (name + ".json"), report[name]);
            manifest.finish(detail::seconds_since(stage_start));
            stages[name] = "ok";
            ++analysis_ok;
        } catch (const std::exception& e) {
            stages[name] = std::string("error: ") + e.what();
            report[name] = {{"error", e.what()}};
        }
    };

    run_stage("analyze", [&](const std::filesystem::path& out, io::ManifestWriter* manifest) {
        json block = stage_analyze(ens, options, out, manifest);
        return block;
    });
    run_stage("separatrix", [&](const std::filesystem::path&, io::ManifestWriter*) {
        return stage_separatrix(ens, options);
    });
    run_stage("dynamics", [&](const std::filesystem::path& out, io::ManifestWriter* manifest) {
        return stage_dynamics(ens, options, out, manifest);
    });
    run_stage("predict", [&](const std::filesystem::path&, io::ManifestWriter*) {
        return stage_predict(ens, options);
    });
    run_stage("hmm", [&](const std::filesystem::path& out, io::ManifestWriter* manifest) {
        return stage_hmm(ens, options, out, manifest);
    });

    // rename the analysis table keys onto their report names
    json final_report;
    final_report["config"] = report["config"];
    final_report["base_seed"] = report["base_seed"];
    final_report["runs"] = report["runs"];
    final_report["stages"] = stages;
    if (report.contains("analyze") && !report["analyze"].contains("error")) {
        for (const auto& key :
             {"groups", "adf_positive", "time_to_zero", "terminal_prices", "divergence_tests"})
            if (report["analyze"].contains(key)) final_report[key] = report["analyze"][key];
    } else if (report.contains("analyze")) {
        final_report["analyze_error"] = report["analyze"]["error"];
    }
    if (report.contains("separatrix")) final_report["separatrix"] = report["separatrix"];
    if (report.contains("dynamics") && !report["dynamics"].contains("error")) {
        for (const auto& key : {"fractal_dimension", "entropy", "lyapunov"})
            if (report["dynamics"].contains(key)) final_report[key] = report["dynamics"][key];
    } else if (report.contains("dynamics")) {
        final_report["dynamics_error"] = report["dynamics"]["error"];
    }
    if (report.contains("predict")) final_report["prob_to_zero"] = report["predict"];
    if (report.contains("hmm")) final_report["estimated_hmm"] = report["hmm"];
    final_report["duration_seconds"] = detail::seconds_since(start);

    try {
        std::filesystem::create_directories(root);
        io::ManifestWriter manifest(root, "pipeline", io::config_to_json(config), base_seed);
        io::write_json(root / "report.json", final_report);
        manifest.declare("report.json");
        manifest.finish(detail::seconds_since(start));
    } catch (const std::exception& e) {
        std::cerr << "pipeline: cannot write report: " << e.what() << "\n";
        return kExitIo;
    }

    return analysis_ok >= 1 ? kExitOk : kExitPipeline;
}

}  // namespace asme::cli
