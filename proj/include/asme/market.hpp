#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asme/errors.hpp"
#include "asme/rng.hpp"

namespace asme {

// Exchange core. Prices and money are held internally as integer multiples
// of the price tick, which keeps the conservation laws exact; public records
// expose currency doubles. Quantization truncates toward zero, so the
// absorbing zero state is exactly reachable: near one tick, ask expectations
// floor to 0 and a matched pair can settle at 0.

struct MarketConfig {
    std::int64_t n_traders = 10'000;
    std::int64_t horizon = 5'000;        // steps per run
    double initial_price = 10.0;
    double initial_money = 174.0;        // per trader
    std::int64_t initial_shares = 20;    // per trader
    double sigma = 0.15;                 // half-width of the uniform expectation noise
    double gamma = 0.0;                  // risk-aversion coefficient
    double price_tick = 0.01;
    double zero_threshold = 0.005;       // absorption detection epsilon
    std::int64_t variance_window = 20;   // rolling window for Var(P) when gamma > 0
    std::uint64_t seed = 0;

    void validate() const {
        if (n_traders < 2) throw ConfigError("n_traders", "must be >= 2");
        if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
        if (!(initial_price > 0.0) || !std::isfinite(initial_price))
            throw ConfigError("initial_price", "must be a positive finite number");
        if (initial_money < 0.0 || !std::isfinite(initial_money))
            throw ConfigError("initial_money", "must be non-negative and finite");
        if (initial_shares < 0) throw ConfigError("initial_shares", "must be non-negative");
        if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("sigma", "must lie in (0, 1)");
        if (gamma < 0.0 || !std::isfinite(gamma)) throw ConfigError("gamma", "must be non-negative");
        if (!(price_tick > 0.0) || !std::isfinite(price_tick))
            throw ConfigError("price_tick", "must be positive");
        if (zero_threshold < 0.0) throw ConfigError("zero_threshold", "must be non-negative");
        if (variance_window < 1) throw ConfigError("variance_window", "must be >= 1");
    }
};

/// Tick quantization: floor(price/tick), computed as floor(price * (1/tick) + 1e-9).
/// The 1e-9 absorbs binary representation error so that exact grid values
/// (e.g. 10.50 at tick 0.01) map onto their own tick.
inline std::int64_t to_ticks(double price, double tick) {
    return static_cast<std::int64_t>(std::floor(price * (1.0 / tick) + 1e-9));
}

inline double from_ticks(std::int64_t ticks, double tick) {
    return static_cast<double>(ticks) * tick;
}

struct TraderState {
    std::int64_t money_ticks = 0;  // monetary holdings in tick units, never negative
    std::int64_t shares = 0;       // never negative, no shorting

    double money(double tick) const { return from_ticks(money_ticks, tick); }
};

enum class Side : std::uint8_t { Bid, Ask };

enum class ActionKind : std::uint8_t { Bid, Ask, Nothing };

struct Action {
    ActionKind kind = ActionKind::Nothing;
    double limit = 0.0;  // tick-quantized limit price; meaningful unless Nothing
};

struct Order {
    Side side;
    std::int64_t price_ticks;   // limit price in ticks; > 0 for bids, >= 0 for asks
    std::int32_t quantity;      // always 1 under this protocol
    std::int32_t trader_id;
    std::int32_t arrival_rank;  // submission position within the step
};

struct Trade {
    std::int32_t bid_trader;
    std::int32_t ask_trader;
    std::int64_t price_ticks;
    double price;  // price_ticks * tick; filled by step(), 0 when unknown
    std::int32_t quantity;
    std::int64_t step;
    std::int32_t intra_step_rank;
};

struct StepRecord {
    std::int64_t step = 0;      // 1-based step number t
    double close_price = 0.0;   // settled price of the last trade, or carried forward
    std::int32_t n_bids = 0;    // bid orders accepted into the book this step
    std::int32_t n_asks = 0;
    std::int32_t imbalance = 0;  // n_bids - n_asks
    std::int32_t n_trades = 0;
    std::int32_t volume = 0;  // shares traded
};

struct Trajectory {
    std::uint64_t seed = 0;
    double price_tick = 0.01;
    double initial_price = 0.0;
    std::vector<StepRecord> steps;

    std::vector<double> closes() const {
        std::vector<double> out;
        out.reserve(steps.size());
        for (const auto& rec : steps) out.push_back(rec.close_price);
        return out;
    }
};

namespace detail {

struct TickAction {
    ActionKind kind = ActionKind::Nothing;
    std::int64_t limit_ticks = 0;
};

// Decision core on the tick grid; inv_tick is hoisted by the step loop.
inline TickAction decide_ticks(const TraderState& trader, double last_close,
                               const MarketConfig& config, double noise_draw,
                               double price_variance, double inv_tick) {
    if (last_close <= 0.0) return {};  // zero price is absorbing: E = 0 = P

    const double expectation = last_close * (1.0 + noise_draw);
    double band = 0.0;
    if (config.gamma > 0.0) {
        const double wealth =
            trader.money(config.price_tick) + static_cast<double>(trader.shares) * last_close;
        if (wealth <= 0.0) return {};
        band = 0.5 * config.gamma * price_variance / wealth;
    }

    if (last_close < expectation - band) {
        const std::int64_t limit_ticks =
            static_cast<std::int64_t>(std::floor(expectation * inv_tick + 1e-9));
        if (limit_ticks < 1) return {};  // a bid must name a positive price
        return {ActionKind::Bid, limit_ticks};
    }
    if (last_close > expectation + band) {
        // ask limits may floor to 0 near the bottom tick (give-away offer)
        const std::int64_t limit_ticks =
            static_cast<std::int64_t>(std::floor(expectation * inv_tick + 1e-9));
        return {ActionKind::Ask, limit_ticks};
    }
    return {};
}

}  // namespace detail

/// Per-step decision rule. The trader forms the private expectation
/// E = last_close * (1 + noise_draw) and bids when the price is expected to
/// rise, asks when it is expected to drop. With gamma > 0 the comparison
/// band widens by (gamma/2) * price_variance / wealth on each side, with
/// wealth marked to market at the last close. The returned limit is E on
/// the tick grid. Feasibility (funds, inventory) is not checked here; see
/// step().
inline Action decide_action(const TraderState& trader, double last_close,
                            const MarketConfig& config, double noise_draw,
                            double price_variance) {
    const detail::TickAction t = detail::decide_ticks(trader, last_close, config, noise_draw,
                                                      price_variance, 1.0 / config.price_tick);
    if (t.kind == ActionKind::Nothing) return {};
    return {t.kind, from_ticks(t.limit_ticks, config.price_tick)};
}

struct MatchResult {
    std::vector<Trade> trades;  // execution order
    std::vector<Order> unmatched_bids;
    std::vector<Order> unmatched_asks;
};

namespace detail {

// Price-time priority sort. Limit prices cluster within the sigma band of
// the close, so a stable counting sort over the tick range beats comparison
// sorting in the step loop; inputs arriving in rank order keep time priority
// through stability. Falls back to std::sort for sparse price ranges or
// rank-shuffled input.
inline void sort_book_side(std::vector<Order>& orders, bool descending_price) {
    const std::size_t n = orders.size();
    bool ranks_ascending = true;
    std::int64_t lo = INT64_MAX;
    std::int64_t hi = INT64_MIN;
    for (std::size_t i = 0; i < n; ++i) {
        lo = std::min(lo, orders[i].price_ticks);
        hi = std::max(hi, orders[i].price_ticks);
        if (i > 0 && orders[i].arrival_rank < orders[i - 1].arrival_rank) ranks_ascending = false;
    }
    const std::int64_t range = (n == 0) ? 0 : hi - lo + 1;
    if (n > 64 && ranks_ascending && range <= static_cast<std::int64_t>(4 * n + 1024)) {
        static thread_local std::vector<std::uint32_t> counts;
        counts.assign(static_cast<std::size_t>(range) + 1, 0);
        auto bucket = [&](const Order& o) {
            return static_cast<std::size_t>(descending_price ? hi - o.price_ticks
                                                             : o.price_ticks - lo);
        };
        for (const auto& o : orders) ++counts[bucket(o) + 1];
        for (std::size_t b = 1; b < counts.size(); ++b) counts[b] += counts[b - 1];
        static thread_local std::vector<Order> sorted;
        sorted.resize(n);
        for (const auto& o : orders) sorted[counts[bucket(o)]++] = o;
        orders.swap(sorted);
        return;
    }
    std::sort(orders.begin(), orders.end(), [descending_price](const Order& a, const Order& b) {
        if (a.price_ticks != b.price_ticks)
            return descending_price ? a.price_ticks > b.price_ticks
                                    : a.price_ticks < b.price_ticks;
        return a.arrival_rank < b.arrival_rank;
    });
}

}  // namespace detail

/// Price-priority matching. Bids are ranked by descending price, asks by
/// ascending price, ties broken by earlier arrival; the k-th best bid and
/// k-th best ask trade at the mid-price (truncated onto the tick grid)
/// while the bid is at or above the ask. Trader identities are not
/// compared: a book holding both sides from one trader will self-match.
inline MatchResult match_orders(std::vector<Order> bids, std::vector<Order> asks,
                                std::int64_t step = 0) {
    detail::sort_book_side(bids, /*descending_price=*/true);
    detail::sort_book_side(asks, /*descending_price=*/false);

    MatchResult result;
    std::size_t bi = 0;
    std::size_t ai = 0;
    while (bi < bids.size() && ai < asks.size() &&
           bids[bi].price_ticks >= asks[ai].price_ticks) {
        const std::int64_t mid_ticks = (bids[bi].price_ticks + asks[ai].price_ticks) / 2;
        const std::int32_t qty = std::min(bids[bi].quantity, asks[ai].quantity);
        result.trades.push_back(Trade{bids[bi].trader_id, asks[ai].trader_id, mid_ticks, 0.0,
                                      qty, step,
                                      static_cast<std::int32_t>(result.trades.size())});
        ++bi;
        ++ai;
    }
    result.unmatched_bids.assign(bids.begin() + static_cast<std::ptrdiff_t>(bi), bids.end());
    result.unmatched_asks.assign(asks.begin() + static_cast<std::ptrdiff_t>(ai), asks.end());
    return result;
}

struct MarketState {
    std::vector<TraderState> traders;
    std::int64_t close_ticks = 0;
    std::int64_t steps_done = 0;
    std::vector<double> close_window;  // last closes for the rolling variance

    // scratch buffers reused across steps
    std::vector<std::int32_t> visit_order;
    std::vector<double> noise_scratch;
    std::vector<Order> bids;
    std::vector<Order> asks;

    static MarketState initial(const MarketConfig& config) {
        MarketState st;
        st.traders.assign(static_cast<std::size_t>(config.n_traders),
                          TraderState{std::llround(config.initial_money / config.price_tick),
                                      config.initial_shares});
        st.close_ticks = std::llround(config.initial_price / config.price_tick);
        st.close_window.push_back(from_ticks(st.close_ticks, config.price_tick));
        st.visit_order.resize(static_cast<std::size_t>(config.n_traders));
        for (std::size_t i = 0; i < st.visit_order.size(); ++i)
            st.visit_order[i] = static_cast<std::int32_t>(i);
        return st;
    }

    double close(double tick) const { return from_ticks(close_ticks, tick); }

    /// Sample variance of the rolling close window (0 when fewer than two).
    double rolling_variance() const {
        const std::size_t n = close_window.size();
        if (n < 2) return 0.0;
        double mean = 0.0;
        for (double c : close_window) mean += c;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double c : close_window) ss += (c - mean) * (c - mean);
        return ss / static_cast<double>(n - 1);
    }
};

namespace detail {

inline void push_close(MarketState& st, const MarketConfig& config) {
    st.close_window.push_back(from_ticks(st.close_ticks, config.price_tick));
    const std::size_t window = static_cast<std::size_t>(config.variance_window);
    if (st.close_window.size() > window)
        st.close_window.erase(st.close_window.begin(),
                              st.close_window.end() - static_cast<std::ptrdiff_t>(window));
}

}  // namespace detail

/// One exchange step with externally supplied visit order and noise draws.
/// `visit_order` is a permutation of the trader indices; `noise_draws[r]`
/// applies to the trader visited at position r, whose arrival rank is r.
/// A bid enters the book only if the trader's money covers the limit, an
/// ask only if the trader holds a share; rejected intents count as Nothing
/// and are excluded from n_bids/n_asks. Residual orders expire at the end
/// of the step.
inline StepRecord step_forced(MarketState& st, const MarketConfig& config,
                              std::span<const std::int32_t> visit_order,
                              std::span<const double> noise_draws,
                              std::vector<Trade>* trades_out = nullptr) {
    assert(visit_order.size() == st.traders.size());
    assert(noise_draws.size() == st.traders.size());

    StepRecord rec;
    rec.step = st.steps_done + 1;

    st.bids.clear();
    st.asks.clear();

    const double last_close = st.close(config.price_tick);
    const double variance = config.gamma > 0.0 ? st.rolling_variance() : 0.0;
    const double inv_tick = 1.0 / config.price_tick;

    for (std::size_t r = 0; r < visit_order.size(); ++r) {
        const std::int32_t id = visit_order[r];
        const TraderState& trader = st.traders[static_cast<std::size_t>(id)];
        const detail::TickAction action =
            detail::decide_ticks(trader, last_close, config, noise_draws[r], variance, inv_tick);
        if (action.kind == ActionKind::Nothing) continue;
        if (action.kind == ActionKind::Bid) {
            if (trader.money_ticks >= action.limit_ticks)
                st.bids.push_back(
                    Order{Side::Bid, action.limit_ticks, 1, id, static_cast<std::int32_t>(r)});
        } else {
            if (trader.shares >= 1)
                st.asks.push_back(
                    Order{Side::Ask, action.limit_ticks, 1, id, static_cast<std::int32_t>(r)});
        }
    }

    rec.n_bids = static_cast<std::int32_t>(st.bids.size());
    rec.n_asks = static_cast<std::int32_t>(st.asks.size());
    rec.imbalance = rec.n_bids - rec.n_asks;

    MatchResult matched = match_orders(std::move(st.bids), std::move(st.asks), rec.step);
    st.bids.clear();
    st.asks.clear();

    for (auto& trade : matched.trades) {
        trade.price = from_ticks(trade.price_ticks, config.price_tick);
        assert(trade.bid_trader != trade.ask_trader);  // one order per trader per step
        TraderState& buyer = st.traders[static_cast<std::size_t>(trade.bid_trader)];
        TraderState& seller = st.traders[static_cast<std::size_t>(trade.ask_trader)];
        buyer.money_ticks -= trade.price_ticks * trade.quantity;
        buyer.shares += trade.quantity;
        seller.money_ticks += trade.price_ticks * trade.quantity;
        seller.shares -= trade.quantity;
        assert(buyer.money_ticks >= 0);
        assert(seller.shares >= 0);
    }

    if (!matched.trades.empty()) st.close_ticks = matched.trades.back().price_ticks;

    rec.n_trades = static_cast<std::int32_t>(matched.trades.size());
    for (const auto& trade : matched.trades) rec.volume += trade.quantity;
    rec.close_price = st.close(config.price_tick);

    if (trades_out) *trades_out = std::move(matched.trades);

    detail::push_close(st, config);
    ++st.steps_done;
    return rec;
}

/// One exchange step: draws the visit permutation, then one expectation-noise
/// value per trader (consumed in visit order), and delegates to step_forced.
/// At an absorbed close of zero no trader can act, so the step is emitted
/// without consuming any randomness.
inline StepRecord step(MarketState& st, const MarketConfig& config, Xoshiro256StarStar& rng,
                       std::vector<Trade>* trades_out = nullptr) {
    if (st.close_ticks == 0) {
        StepRecord rec;
        rec.step = ++st.steps_done;
        rec.close_price = 0.0;
        detail::push_close(st, config);
        if (trades_out) trades_out->clear();
        return rec;
    }

    shuffle(st.visit_order, rng);
    st.noise_scratch.resize(st.traders.size());
    for (auto& d : st.noise_scratch) d = rng.uniform(-config.sigma, config.sigma);
    return step_forced(st, config, st.visit_order, st.noise_scratch, trades_out);
}

/// Full run: every trader starts with (initial_money, initial_shares), the
/// close starts at initial_price, and step() is applied horizon times.
/// Identical configs (including seed) produce bit-identical trajectories.
inline Trajectory run_simulation(const MarketConfig& config) {
    config.validate();
    Xoshiro256StarStar rng(config.seed);
    MarketState st = MarketState::initial(config);

    Trajectory traj;
    traj.seed = config.seed;
    traj.price_tick = config.price_tick;
    traj.initial_price = from_ticks(st.close_ticks, config.price_tick);
    traj.steps.reserve(static_cast<std::size_t>(config.horizon));
    for (std::int64_t t = 1; t <= config.horizon; ++t)
        traj.steps.push_back(step(st, config, rng));
    return traj;
}

/// Expected single-step price change for a fixed price and forced counts of
/// askers and bidders: (sigma/2) * P * (1/(N_A+1) - 1/(N_B+1)). This is the
/// expected displacement of the best-pair settlement, used as the analytic
/// drift oracle.
inline double expected_price_change(double price, std::int64_t n_asks, std::int64_t n_bids,
                                    double sigma) {
    if (price <= 0.0) return 0.0;
    return 0.5 * sigma * price *
           (1.0 / static_cast<double>(n_asks + 1) - 1.0 / static_cast<double>(n_bids + 1));
}

}  // namespace asme
