#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "asme/ensemble.hpp"
#include "asme/errors.hpp"
#include "asme/rng.hpp"

namespace asme::classify {

// Absorption-probability models on (price, normalized time) features.
// Label 0 = trajectory reached zero, 1 = it did not; the fitted sigmoid
// gives the probability of class 1 (the footnote-consistent convention:
// positive coefficients raise the odds of NOT reaching zero).

struct LabeledPoint {
    double price = 0.0;
    double time_norm = 0.0;  // t / horizon, in [0, 1]
    int label = 0;           // 0 = reached zero, 1 = did not
};

/// One point per stride-th step of every determinate trajectory.
inline std::vector<LabeledPoint> build_dataset(const Ensemble& ens, std::size_t stride = 1) {
    if (stride == 0) throw DegenerateInput("build_dataset: stride must be positive");
    std::vector<LabeledPoint> data;
    bool any = false;
    const double horizon = static_cast<double>(ens.config.horizon);
    for (std::size_t i = 0; i < ens.trajectories.size(); ++i) {
        if (ens.labels[i].value == TerminalKind::Undetermined) continue;
        any = true;
        const int y = ens.labels[i].value == TerminalKind::Positive ? 1 : 0;
        const auto& steps = ens.trajectories[i].steps;
        for (std::size_t s = 0; s < steps.size(); s += stride)
            data.push_back({steps[s].close_price,
                            static_cast<double>(steps[s].step) / horizon, y});
    }
    if (!any) throw OneClassOnly("build_dataset: no determinate trajectories");
    return data;
}

/// Trajectory-level train/test split: determinate trajectories are shuffled
/// with the given seed and the first `train_fraction` go to training, so no
/// trajectory contributes points to both sides.
struct TrajectorySplit {
    std::vector<std::size_t> train;  // trajectory indices
    std::vector<std::size_t> test;
};

inline TrajectorySplit split_trajectories(const Ensemble& ens, double train_fraction,
                                          std::uint64_t seed) {
    std::vector<std::size_t> determinate;
    for (std::size_t i = 0; i < ens.labels.size(); ++i)
        if (ens.labels[i].value != TerminalKind::Undetermined) determinate.push_back(i);
    Xoshiro256StarStar rng(seed);
    shuffle(determinate, rng);
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(determinate.size())));
    TrajectorySplit split;
    split.train.assign(determinate.begin(), determinate.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(determinate.begin() + static_cast<std::ptrdiff_t>(n_train), determinate.end());
    return split;
}

inline std::vector<LabeledPoint> dataset_from(const Ensemble& ens,
                                              std::span<const std::size_t> trajectory_indices,
                                              std::size_t stride) {
    if (stride == 0) throw DegenerateInput("dataset_from: stride must be positive");
    std::vector<LabeledPoint> data;
    const double horizon = static_cast<double>(ens.config.horizon);
    for (std::size_t i : trajectory_indices) {
        if (ens.labels[i].value == TerminalKind::Undetermined) continue;
        const int y = ens.labels[i].value == TerminalKind::Positive ? 1 : 0;
        const auto& steps = ens.trajectories[i].steps;
        for (std::size_t s = 0; s < steps.size(); s += stride)
            data.push_back({steps[s].close_price,
                            static_cast<double>(steps[s].step) / horizon, y});
    }
    return data;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LogisticModel {
    double w_price = 0.0;  // raw-feature scale
    double w_time = 0.0;
    double bias = 0.0;
    // standardization used during fitting, plus the standardized-scale
    // coefficients it produced
    std::array<double, 2> feature_mean{0.0, 0.0};
    std::array<double, 2> feature_std{1.0, 1.0};
    std::array<double, 2> weights_std{0.0, 0.0};
    double bias_std = 0.0;
};

struct LogisticFitOptions {
    double learning_rate = 0.5;
    std::size_t max_iters = 10'000;
    double tol = 1e-8;
};

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

inline double logistic_loss(std::span<const LabeledPoint> data,
                            const std::array<double, 2>& w, double b,
                            const std::array<double, 2>& mean,
                            const std::array<double, 2>& sd) {
    double loss = 0.0;
    for (const auto& pt : data) {
        const double z1 = (pt.price - mean[0]) / sd[0];
        const double z2 = (pt.time_norm - mean[1]) / sd[1];
        const double p = clamp_prob(sigmoid(w[0] * z1 + w[1] * z2 + b));
        loss -= pt.label == 1 ? std::log(p) : std::log1p(-p);
    }
    return loss / static_cast<double>(data.size());
}

}  // namespace detail

/// Full-batch gradient descent on the binary cross-entropy, features
/// standardized internally; reported coefficients are back-transformed to
/// the raw feature scale. Stops when the relative loss change or the
/// gradient norm drops below tol.
inline LogisticModel logistic_fit(std::span<const LabeledPoint> data,
                                  const LogisticFitOptions& options = {}) {
    if (data.empty()) throw EmptyInput("logistic_fit: empty dataset");
    bool has0 = false, has1 = false;
    for (const auto& pt : data) (pt.label == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw OneClassOnly("logistic_fit: both classes required");

    const double n = static_cast<double>(data.size());
    std::array<double, 2> mean{0.0, 0.0};
    for (const auto& pt : data) {
        mean[0] += pt.price;
        mean[1] += pt.time_norm;
    }
    mean[0] /= n;
    mean[1] /= n;
    std::array<double, 2> sd{0.0, 0.0};
    for (const auto& pt : data) {
        sd[0] += (pt.price - mean[0]) * (pt.price - mean[0]);
        sd[1] += (pt.time_norm - mean[1]) * (pt.time_norm - mean[1]);
    }
    sd[0] = std::sqrt(sd[0] / n);
    sd[1] = std::sqrt(sd[1] / n);
    if (sd[0] <= 0.0) sd[0] = 1.0;
    if (sd[1] <= 0.0) sd[1] = 1.0;

    std::array<double, 2> w{0.0, 0.0};
    double b = 0.0;
    double prev_loss = detail::logistic_loss(data, w, b, mean, sd);
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        double g0 = 0.0, g1 = 0.0, gb = 0.0;
        for (const auto& pt : data) {
            const double z1 = (pt.price - mean[0]) / sd[0];
            const double z2 = (pt.time_norm - mean[1]) / sd[1];
            const double err = sigmoid(w[0] * z1 + w[1] * z2 + b) - static_cast<double>(pt.label);
            g0 += err * z1;
            g1 += err * z2;
            gb += err;
        }
        g0 /= n;
        g1 /= n;
        gb /= n;
        w[0] -= options.learning_rate * g0;
        w[1] -= options.learning_rate * g1;
        b -= options.learning_rate * gb;

        const double loss = detail::logistic_loss(data, w, b, mean, sd);
        if (!std::isfinite(loss)) throw NonFinite("logistic_fit: loss diverged");
        const double grad_norm = std::sqrt(g0 * g0 + g1 * g1 + gb * gb);
        const double rel_change = std::fabs(prev_loss - loss) / std::max(1e-300, prev_loss);
        prev_loss = loss;
        if (grad_norm < options.tol || rel_change < options.tol) break;
    }

    LogisticModel model;
    model.feature_mean = mean;
    model.feature_std = sd;
    model.weights_std = w;
    model.bias_std = b;
    model.w_price = w[0] / sd[0];
    model.w_time = w[1] / sd[1];
    model.bias = b - w[0] * mean[0] / sd[0] - w[1] * mean[1] / sd[1];
    return model;
}

struct ProbabilityPair {
    double p_zero = 0.5;
    double p_positive = 0.5;
};

inline ProbabilityPair logistic_predict(const LogisticModel& model, const LabeledPoint& point) {
    const double p_positive =
        sigmoid(model.w_price * point.price + model.w_time * point.time_norm + model.bias);
    return {1.0 - p_positive, p_positive};
}

// ---------------------------------------------------------------------------
// Gradient boosting with depth-limited CART regression trees on the logistic
// loss: F0 = clamped base-rate log odds, per round a tree fits the residuals
// y - p and each leaf takes the Newton step sum(g) / sum(p(1-p)).

struct TreeNode {
    bool is_leaf = true;
    int feature = -1;        // 0 = price, 1 = time_norm
    double threshold = 0.0;  // go left when x[feature] <= threshold
    double leaf_value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
};

struct GbmTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double value_at(double price, double time_norm) const {
        std::int32_t at = 0;
        while (!nodes[static_cast<std::size_t>(at)].is_leaf) {
            const auto& node = nodes[static_cast<std::size_t>(at)];
            const double x = node.feature == 0 ? price : time_norm;
            at = x <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(at)].leaf_value;
    }
};

struct BoostedModel {
    double initial_score = 0.0;  // F0, log odds of the base rate
    double learning_rate = 0.1;
    std::vector<GbmTree> trees;

    double score(double price, double time_norm) const {
        double f = initial_score;
        for (const auto& tree : trees) f += learning_rate * tree.value_at(price, time_norm);
        return f;
    }
};

struct GbmFitOptions {
    std::size_t n_trees = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    std::size_t min_leaf = 20;
};

namespace detail {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Exhaustive variance-reduction split search over midpoints of consecutive
/// sorted unique feature values; ties keep the first (lowest feature index,
/// lowest threshold).
inline SplitChoice best_split(std::span<const LabeledPoint> data,
                              std::span<const double> residual,
                              std::span<const std::uint32_t> index, std::size_t min_leaf) {
    const std::size_t n = index.size();
    SplitChoice best;
    if (n < 2 * min_leaf) return best;
    double total = 0.0;
    for (std::uint32_t i : index) total += residual[i];

    std::vector<std::uint32_t> order(index.begin(), index.end());
    for (int feature = 0; feature < 2; ++feature) {
        auto value_of = [&](std::uint32_t i) {
            return feature == 0 ? data[i].price : data[i].time_norm;
        };
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return value_of(a) < value_of(b);
        });
        double left_sum = 0.0;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            left_sum += residual[order[pos]];
            if (value_of(order[pos]) == value_of(order[pos + 1])) continue;  // not a boundary
            const std::size_t left_n = pos + 1;
            const std::size_t right_n = n - left_n;
            if (left_n < min_leaf || right_n < min_leaf) continue;
            const double right_sum = total - left_sum;
            const double gain =
                left_sum * left_sum / static_cast<double>(left_n) +
                right_sum * right_sum / static_cast<double>(right_n) -
                total * total / static_cast<double>(n);
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feature = feature;
                best.threshold = (value_of(order[pos]) + value_of(order[pos + 1])) / 2.0;
                best.gain = gain;
            }
        }
    }
    return best;
}

inline std::int32_t grow_tree(GbmTree& tree, std::span<const LabeledPoint> data,
                              std::span<const double> residual, std::span<const double> weight,
                              std::vector<std::uint32_t> index, int depth,
                              const GbmFitOptions& options) {
    const std::int32_t node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice split;
    if (depth < options.max_depth)
        split = best_split(data, residual, index, options.min_leaf);

    if (!split.found) {
        double g = 0.0, h = 0.0;
        for (std::uint32_t i : index) {
            g += residual[i];
            h += weight[i];
        }
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_value = g / std::max(h, 1e-12);
        return node_id;
    }

    std::vector<std::uint32_t> left_index, right_index;
    left_index.reserve(index.size());
    right_index.reserve(index.size());
    for (std::uint32_t i : index) {
        const double x = split.feature == 0 ? data[i].price : data[i].time_norm;
        (x <= split.threshold ? left_index : right_index).push_back(i);
    }
    index.clear();
    index.shrink_to_fit();

    const std::int32_t left = grow_tree(tree, data, residual, weight, std::move(left_index),
                                        depth + 1, options);
    const std::int32_t right = grow_tree(tree, data, residual, weight, std::move(right_index),
                                         depth + 1, options);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.is_leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
}

}  // namespace detail

inline BoostedModel gbm_fit(std::span<const LabeledPoint> data, const GbmFitOptions& options = {}) {
    if (data.empty()) throw EmptyInput("gbm_fit: empty dataset");
    const double n = static_cast<double>(data.size());
    double positives = 0.0;
    for (const auto& pt : data) positives += pt.label;
    // clamp so a one-class dataset yields a finite saturated score
    const double base_rate = std::clamp(positives / n, 0.5 / n, 1.0 - 0.5 / n);

    BoostedModel model;
    model.initial_score = std::log(base_rate / (1.0 - base_rate));
    model.learning_rate = options.learning_rate;
    if (positives == 0.0 || positives == n) return model;  // nothing left to learn

    std::vector<double> score(data.size(), model.initial_score);
    std::vector<double> residual(data.size());
    std::vector<double> weight(data.size());
    for (std::size_t round = 0; round < options.n_trees; ++round) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double p = sigmoid(score[i]);
            residual[i] = static_cast<double>(data[i].label) - p;
            weight[i] = std::max(p * (1.0 - p), 1e-12);
        }
        std::vector<std::uint32_t> index(data.size());
        std::iota(index.begin(), index.end(), 0);
        GbmTree tree;
        detail::grow_tree(tree, data, residual, weight, std::move(index), 0, options);
        for (std::size_t i = 0; i < data.size(); ++i)
            score[i] += options.learning_rate * tree.value_at(data[i].price, data[i].time_norm);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline ProbabilityPair gbm_predict(const BoostedModel& model, const LabeledPoint& point) {
    const double p_positive = sigmoid(model.score(point.price, point.time_norm));
    return {1.0 - p_positive, p_positive};
}

// ---------------------------------------------------------------------------
// Shared evaluation metrics.

struct Metrics {
    double accuracy = 0.0;
    // confusion[truth][prediction], class order (0, 1)
    std::array<std::array<std::int64_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};
    std::array<std::optional<double>, 2> precision;
    std::array<std::optional<double>, 2> recall;
};

/// Confusion matrix and per-class precision/recall at the given threshold on
/// p_positive; cells with an empty denominator are reported absent.
inline Metrics evaluate(std::span<const double> p_positive, std::span<const int> truth,
                        double threshold = 0.5) {
    if (p_positive.empty() || p_positive.size() != truth.size())
        throw EmptyInput("evaluate: prediction/truth size mismatch");
    Metrics metrics;
    for (std::size_t i = 0; i < p_positive.size(); ++i) {
        const int predicted = p_positive[i] >= threshold ? 1 : 0;
        ++metrics.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted)];
    }
    const double n = static_cast<double>(p_positive.size());
    metrics.accuracy =
        (static_cast<double>(metrics.confusion[0][0]) + static_cast<double>(metrics.confusion[1][1])) / n;
    for (std::size_t c = 0; c < 2; ++c) {
        const double predicted_c =
            static_cast<double>(metrics.confusion[0][c] + metrics.confusion[1][c]);
        const double actual_c =
            static_cast<double>(metrics.confusion[c][0] + metrics.confusion[c][1]);
        if (predicted_c > 0)
            metrics.precision[c] = static_cast<double>(metrics.confusion[c][c]) / predicted_c;
        if (actual_c > 0)
            metrics.recall[c] = static_cast<double>(metrics.confusion[c][c]) / actual_c;
    }
    return metrics;
}

}  // namespace asme::classify
