#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asme/ensemble.hpp"
#include "asme/errors.hpp"
#include "asme/market.hpp"
#include "asme/version.hpp"

namespace asme::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// MarketConfig <-> flat JSON with exactly the config field names; unknown
// keys are a hard error so experiment-file typos cannot pass silently.

inline json config_to_json(const MarketConfig& config) {
    return json{{"n_traders", config.n_traders},
                {"horizon", config.horizon},
                {"initial_price", config.initial_price},
                {"initial_money", config.initial_money},
                {"initial_shares", config.initial_shares},
                {"sigma", config.sigma},
                {"gamma", config.gamma},
                {"price_tick", config.price_tick},
                {"zero_threshold", config.zero_threshold},
                {"variance_window", config.variance_window},
                {"seed", config.seed}};
}

inline MarketConfig config_from_json(const json& j) {
    static const std::vector<std::string> known = {
        "n_traders",  "horizon",        "initial_price",   "initial_money",
        "initial_shares", "sigma",      "gamma",           "price_tick",
        "zero_threshold", "variance_window", "seed"};
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(key, "unknown configuration key");
    }
    MarketConfig config;
    if (j.contains("n_traders")) config.n_traders = j.at("n_traders").get<std::int64_t>();
    if (j.contains("horizon")) config.horizon = j.at("horizon").get<std::int64_t>();
    if (j.contains("initial_price")) config.initial_price = j.at("initial_price").get<double>();
    if (j.contains("initial_money")) config.initial_money = j.at("initial_money").get<double>();
    if (j.contains("initial_shares"))
        config.initial_shares = j.at("initial_shares").get<std::int64_t>();
    if (j.contains("sigma")) config.sigma = j.at("sigma").get<double>();
    if (j.contains("gamma")) config.gamma = j.at("gamma").get<double>();
    if (j.contains("price_tick")) config.price_tick = j.at("price_tick").get<double>();
    if (j.contains("zero_threshold"))
        config.zero_threshold = j.at("zero_threshold").get<double>();
    if (j.contains("variance_window"))
        config.variance_window = j.at("variance_window").get<std::int64_t>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    return config;
}

inline MarketConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Trajectory CSV: header step,close,bids,asks,imbalance,trades,volume with
// two-decimal prices and \n line endings.

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trajectory: " + path.string());
    out << "step,close,bids,asks,imbalance,trades,volume\n";
    char line[160];
    for (const auto& rec : traj.steps) {
        std::snprintf(line, sizeof line, "%lld,%.2f,%d,%d,%d,%d,%d\n",
                      static_cast<long long>(rec.step), rec.close_price, rec.n_bids, rec.n_asks,
                      rec.imbalance, rec.n_trades, rec.volume);
        out << line;
    }
    if (!out) throw IoError("failed while writing trajectory: " + path.string());
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory file: " + path.string());
    Trajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        StepRecord rec;
        long long step = 0;
        if (std::sscanf(line.c_str(), "%lld,%lf,%d,%d,%d,%d,%d", &step, &rec.close_price,
                        &rec.n_bids, &rec.n_asks, &rec.imbalance, &rec.n_trades,
                        &rec.volume) != 7)
            throw IoError("malformed trajectory row in " + path.string() + ": " + line);
        rec.step = step;
        traj.steps.push_back(rec);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Ensemble directory: manifest.json + one trajectory CSV per run.

inline std::string run_filename(std::size_t run_index) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%05zu.csv", run_index);
    return name;
}

inline json ensemble_manifest(const Ensemble& ens) {
    json runs = json::array();
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const auto& traj = ens.trajectories[i];
        const auto closes = traj.closes();
        const auto t2z = time_to_zero(closes, ens.config.zero_threshold);
        json run{{"run_index", i},
                 {"seed", traj.seed},
                 {"label", to_string(ens.labels[i].value)},
                 {"tail_mean", ens.labels[i].tail_mean},
                 {"terminal_price", closes.empty() ? 0.0 : closes.back()},
                 {"file", run_filename(i)}};
        if (t2z)
            run["time_to_zero"] = *t2z;
        else
            run["time_to_zero"] = nullptr;
        runs.push_back(std::move(run));
    }
    return json{{"config", config_to_json(ens.config)},
                {"base_seed", ens.base_seed},
                {"runs", std::move(runs)}};
}

inline void write_ensemble(const std::filesystem::path& dir, const Ensemble& ens) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    for (std::size_t i = 0; i < ens.size(); ++i)
        write_trajectory_csv(dir / run_filename(i), ens.trajectories[i]);
    std::ofstream out(dir / "ensemble.json", std::ios::binary);
    if (!out) throw IoError("cannot write ensemble manifest in " + dir.string());
    out << ensemble_manifest(ens).dump(2) << "\n";
}

inline Ensemble read_ensemble(const std::filesystem::path& dir) {
    std::ifstream in(dir / "ensemble.json");
    if (!in) throw IoError("cannot open ensemble manifest: " + (dir / "ensemble.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("invalid ensemble manifest: ") + e.what());
    }
    Ensemble ens;
    ens.config = config_from_json(j.at("config"));
    ens.base_seed = j.at("base_seed").get<std::uint64_t>();
    for (const auto& run : j.at("runs")) {
        Trajectory traj = read_trajectory_csv(dir / run.at("file").get<std::string>());
        traj.seed = run.at("seed").get<std::uint64_t>();
        traj.price_tick = ens.config.price_tick;
        traj.initial_price = ens.config.initial_price;
        ens.trajectories.push_back(std::move(traj));
        TerminalLabel label;
        const std::string kind = run.at("label").get<std::string>();
        label.value = kind == "zero" ? TerminalKind::ReachedZero
                      : kind == "positive" ? TerminalKind::Positive
                                           : TerminalKind::Undetermined;
        label.tail_mean = run.at("tail_mean").get<double>();
        ens.labels.push_back(label);
    }
    return ens;
}

// ---------------------------------------------------------------------------
// Per-directory run manifest: every file the tool writes is declared here.

class ManifestWriter {
public:
    ManifestWriter(std::filesystem::path dir, std::string subcommand, json config_snapshot,
                   std::uint64_t base_seed)
        : dir_(std::move(dir)), manifest_{{"tool_version", kVersion},
                                          {"subcommand", std::move(subcommand)},
                                          {"config", std::move(config_snapshot)},
                                          {"base_seed", base_seed},
                                          {"outputs", json::array()},
                                          {"duration_seconds", 0.0}} {}

    const std::filesystem::path& dir() const { return dir_; }

    void declare(const std::string& relative_path) {
        manifest_["outputs"].push_back(relative_path);
    }

    void finish(double duration_seconds) {
        manifest_["duration_seconds"] = duration_seconds;
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        if (!out) throw IoError("cannot write manifest in " + dir_.string());
        out << manifest_.dump(2) << "\n";
    }

private:
    std::filesystem::path dir_;
    json manifest_;
};

inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << header << "\n";
    std::ostringstream line;
    line.precision(17);
    for (const auto& row : rows) {
        line.str("");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line << ',';
            line << row[i];
        }
        out << line.str() << "\n";
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

}  // namespace asme::io
