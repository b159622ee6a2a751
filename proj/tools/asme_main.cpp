// asme: agent-based limit-order-book exchange simulator and analysis toolkit.
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asme/cli.hpp"
#include "asme/version.hpp"

namespace {

std::vector<int> parse_tau_list(const std::string& csv) {
    std::vector<int> taus;
    std::size_t at = 0;
    while (at < csv.size()) {
        const std::size_t comma = csv.find(',', at);
        const std::string token = csv.substr(at, comma == std::string::npos ? comma : comma - at);
        if (!token.empty()) taus.push_back(std::stoi(token));
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return taus;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Artificial stock-market exchange: simulator and analysis toolkit"};
    app.set_version_flag("--version", asme::kVersion);
    app.require_subcommand(1);

    asme::cli::CommonOptions options;
    std::string ensemble_dir;
    std::string tau_csv = "50,250,1000";
    std::uint64_t seed_value = 0;
    bool seed_given = false;
    std::string config_value;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config) cmd->add_option("--config", config_value, "JSON config file");
        cmd->add_option("--seed", seed_value, "base seed (overrides the config seed)")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--out", options.out_dir, "output directory");
    };
    auto add_labeling = [&](CLI::App* cmd) {
        cmd->add_option("--eps0", options.eps0, "zero-label threshold");
        cmd->add_option("--eps1", options.eps1, "positive-label threshold");
        cmd->add_option("--label-window", options.label_window, "tail window L for labeling");
    };

    auto* simulate = app.add_subcommand("simulate", "run one simulation, write trajectory CSV");
    add_common(simulate, true);

    auto* ensemble = app.add_subcommand("ensemble", "run R seeded simulations into a directory");
    add_common(ensemble, true);
    ensemble->add_option("--runs", options.runs, "number of runs");
    add_labeling(ensemble);

    auto* analyze = app.add_subcommand("analyze", "stationarity/terminal/divergence statistics");
    analyze->add_option("ensemble_dir", ensemble_dir, "ensemble directory")->required();
    add_common(analyze, false);
    analyze->add_option("--adf-regression", options.adf_regression,
                        "ADF deterministic terms: c or ct");

    auto* dynamics = app.add_subcommand("dynamics", "chaos diagnostics and Poincare point sets");
    dynamics->add_option("ensemble_dir", ensemble_dir, "ensemble directory")->required();
    add_common(dynamics, false);
    dynamics->add_option("--tau", tau_csv, "comma-separated delays for Poincare maps");
    dynamics->add_option("--embed-dim", options.embed_dim, "embedding dimension m");
    dynamics->add_flag("--acf-delay", options.acf_delay,
                       "also report Lyapunov exponents at the ACF 1/e delay");

    auto* separatrix = app.add_subcommand("separatrix", "basin-boundary estimates (3 methods)");
    separatrix->add_option("ensemble_dir", ensemble_dir, "ensemble directory")->required();
    add_common(separatrix, false);
    separatrix->add_option("--bins", options.bins, "histogram bins for the entropy diagnostic");
    separatrix->add_option("--delta", options.delta, "hinge margin");

    auto* predict = app.add_subcommand("predict", "absorption-probability classifiers");
    predict->add_option("ensemble_dir", ensemble_dir, "ensemble directory")->required();
    add_common(predict, false);
    predict->add_option("--model", options.model, "logistic, gbm, or both");
    predict->add_option("--stride", options.stride, "dataset subsampling stride");
    predict->add_option("--trees", options.trees, "boosting rounds");
    predict->add_option("--learning-rate", options.learning_rate, "boosting learning rate");
    predict->add_option("--max-iters", options.max_iters, "logistic gradient-descent iterations");
    predict->add_option("--split-seed", options.split_seed, "trajectory-level split seed");

    auto* hmm = app.add_subcommand("hmm", "two-state regime model over (dP, imbalance)");
    hmm->add_option("ensemble_dir", ensemble_dir, "ensemble directory")->required();
    add_common(hmm, false);
    hmm->add_option("--max-iters", options.max_iters, "EM iteration cap");
    hmm->add_option("--split-seed", options.split_seed, "initialization seed");

    auto* pipeline = app.add_subcommand("pipeline", "ensemble plus every analysis stage");
    add_common(pipeline, true);
    pipeline->add_option("--runs", options.runs, "number of runs");
    pipeline->add_option("--stride", options.stride, "classifier dataset stride");
    pipeline->add_option("--tau", tau_csv, "comma-separated delays for Poincare maps");
    pipeline->add_option("--embed-dim", options.embed_dim, "embedding dimension m");
    pipeline->add_option("--bins", options.bins, "separatrix entropy bins");
    pipeline->add_option("--delta", options.delta, "hinge margin");
    pipeline->add_option("--trees", options.trees, "boosting rounds");
    pipeline->add_option("--learning-rate", options.learning_rate, "boosting learning rate");
    pipeline->add_option("--max-iters", options.max_iters, "EM/logistic iteration cap");
    pipeline->add_option("--split-seed", options.split_seed, "classifier split and HMM init seed");
    add_labeling(pipeline);

    CLI11_PARSE(app, argc, argv);

    if (!config_value.empty()) options.config_path = config_value;
    if (seed_given) options.seed = seed_value;
    options.taus = parse_tau_list(tau_csv);

    if (app.got_subcommand(simulate)) return asme::cli::cmd_simulate(options);
    if (app.got_subcommand(ensemble)) return asme::cli::cmd_ensemble(options);
    if (app.got_subcommand(analyze)) return asme::cli::cmd_analyze(ensemble_dir, options);
    if (app.got_subcommand(dynamics)) return asme::cli::cmd_dynamics(ensemble_dir, options);
    if (app.got_subcommand(separatrix)) return asme::cli::cmd_separatrix(ensemble_dir, options);
    if (app.got_subcommand(predict)) return asme::cli::cmd_predict(ensemble_dir, options);
    if (app.got_subcommand(hmm)) return asme::cli::cmd_hmm(ensemble_dir, options);
    if (app.got_subcommand(pipeline)) return asme::cli::cmd_pipeline(options);
    return asme::cli::kExitConfig;
}
