#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "asme/market.hpp"
#include "asme/rng.hpp"

using namespace asme;
using Catch::Approx;

namespace {

MarketConfig small_config() {
    MarketConfig config;
    config.n_traders = 2;
    config.horizon = 10;
    return config;
}

Order bid(double price, int trader = 0, int rank = 0) {
    return Order{Side::Bid, to_ticks(price, 0.01), 1, trader, rank};
}
Order ask(double price, int trader = 1, int rank = 0) {
    return Order{Side::Ask, to_ticks(price, 0.01), 1, trader, rank};
}

}  // namespace

TEST_CASE("decide_action follows the expectation sign", "[market]") {
    MarketConfig config;
    TraderState trader{17'400, 20};

    SECTION("expected rise submits a bid at the expectation") {
        const Action a = decide_action(trader, 10.0, config, 0.05, 0.0);
        CHECK(a.kind == ActionKind::Bid);
        CHECK(a.limit == Approx(10.50));
    }
    SECTION("zero draw is the boundary case: do nothing") {
        const Action a = decide_action(trader, 10.0, config, 0.0, 0.0);
        CHECK(a.kind == ActionKind::Nothing);
    }
    SECTION("expected drop submits an ask") {
        const Action a = decide_action(trader, 10.0, config, -0.05, 0.0);
        CHECK(a.kind == ActionKind::Ask);
        CHECK(a.limit == Approx(9.50));
    }
    SECTION("zero price is absorbing") {
        CHECK(decide_action(trader, 0.0, config, 0.1, 0.0).kind == ActionKind::Nothing);
        CHECK(decide_action(trader, 0.0, config, -0.1, 0.0).kind == ActionKind::Nothing);
    }
    SECTION("limits quantize onto the tick grid toward zero") {
        const Action a = decide_action(trader, 10.0, config, 0.0001, 0.0);
        CHECK(a.kind == ActionKind::Bid);
        CHECK(a.limit == Approx(10.00));  // E = 10.001 floors to the 10.00 tick
    }
    SECTION("risk band suppresses marginal trades when gamma > 0") {
        MarketConfig risky = config;
        risky.gamma = 2.0;
        // wealth = 174 + 20*10 = 374; band = 0.5*2*3.74/374 = 0.01
        CHECK(decide_action(trader, 10.0, risky, 0.0005, 3.74).kind == ActionKind::Nothing);
        CHECK(decide_action(trader, 10.0, risky, 0.05, 3.74).kind == ActionKind::Bid);
    }
}

TEST_CASE("match_orders pairs best bid with best ask at the mid", "[market]") {
    SECTION("single crossing pair settles at the mid-price") {
        auto result = match_orders({bid(10.0)}, {ask(9.0)});
        REQUIRE(result.trades.size() == 1);
        CHECK(result.trades[0].price_ticks == 950);
        CHECK(result.unmatched_bids.empty());
        CHECK(result.unmatched_asks.empty());
    }
    SECTION("non-crossing book trades nothing") {
        auto result = match_orders({bid(9.0)}, {ask(10.0)});
        CHECK(result.trades.empty());
        CHECK(result.unmatched_bids.size() == 1);
        CHECK(result.unmatched_asks.size() == 1);
    }
    SECTION("matching stops at the first non-crossing pair") {
        auto result = match_orders({bid(10.0, 0, 0), bid(9.8, 1, 1)},
                                   {ask(9.6, 2, 2), ask(9.9, 3, 3)});
        REQUIRE(result.trades.size() == 1);
        CHECK(result.trades[0].price_ticks == 980);  // (10.0 + 9.6) / 2
        CHECK(result.trades[0].bid_trader == 0);
        CHECK(result.trades[0].ask_trader == 2);
        CHECK(result.unmatched_bids.size() == 1);
        CHECK(result.unmatched_asks.size() == 1);
    }
    SECTION("price ties break by arrival rank") {
        auto result = match_orders({bid(10.0, 5, 3), bid(10.0, 6, 1)}, {ask(9.0, 7, 0)});
        REQUIRE(result.trades.size() == 1);
        CHECK(result.trades[0].bid_trader == 6);  // earlier arrival wins
    }
    SECTION("mid truncates toward zero on the tick grid") {
        auto result = match_orders({bid(10.01)}, {ask(10.00)});
        REQUIRE(result.trades.size() == 1);
        CHECK(result.trades[0].price_ticks == 1000);  // mid 10.005 floors to 10.00
    }
    SECTION("self-matching is executed, not rejected") {
        auto result = match_orders({bid(10.0, 4)}, {ask(9.0, 4)});
        REQUIRE(result.trades.size() == 1);
        CHECK(result.trades[0].bid_trader == result.trades[0].ask_trader);
    }
}

TEST_CASE("step applies decisions, feasibility gates and settlement", "[market]") {
    SECTION("two traders trade at the mid of their expectations") {
        MarketConfig config = small_config();
        MarketState st = MarketState::initial(config);
        const std::vector<std::int32_t> order{0, 1};
        const std::vector<double> draws{0.1, -0.1};
        std::vector<Trade> trades;
        const StepRecord rec = step_forced(st, config, order, draws, &trades);
        REQUIRE(trades.size() == 1);
        CHECK(rec.close_price == Approx(10.00));
        CHECK(rec.n_bids == 1);
        CHECK(rec.n_asks == 1);
        CHECK(rec.imbalance == 0);
        CHECK(rec.volume == 1);
        CHECK(st.traders[0].money_ticks == 17'400 - 1'000);
        CHECK(st.traders[0].shares == 21);
        CHECK(st.traders[1].money_ticks == 17'400 + 1'000);
        CHECK(st.traders[1].shares == 19);
    }
    SECTION("zero draws produce no orders and carry the close forward") {
        MarketConfig config = small_config();
        MarketState st = MarketState::initial(config);
        const std::vector<std::int32_t> order{0, 1};
        const std::vector<double> draws{0.0, 0.0};
        const StepRecord rec = step_forced(st, config, order, draws);
        CHECK(rec.n_bids == 0);
        CHECK(rec.n_asks == 0);
        CHECK(rec.n_trades == 0);
        CHECK(rec.close_price == Approx(10.0));
    }
    SECTION("infeasible intents are counted as nothing") {
        MarketConfig config = small_config();
        MarketState st = MarketState::initial(config);
        st.traders[0].money_ticks = 500;  // cannot afford a bid near 10
        st.traders[1].shares = 0;         // cannot ask
        const std::vector<std::int32_t> order{0, 1};
        const std::vector<double> draws{0.1, -0.1};
        const StepRecord rec = step_forced(st, config, order, draws);
        CHECK(rec.n_bids == 0);
        CHECK(rec.n_asks == 0);
        CHECK(rec.n_trades == 0);
    }
    SECTION("an absorbed market stays absorbed") {
        MarketConfig config = small_config();
        MarketState st = MarketState::initial(config);
        st.close_ticks = 0;
        Xoshiro256StarStar rng(1);
        for (int t = 0; t < 5; ++t) {
            const StepRecord rec = step(st, config, rng);
            CHECK(rec.close_price == 0.0);
            CHECK(rec.n_bids == 0);
            CHECK(rec.n_asks == 0);
        }
    }
}

TEST_CASE("conservation laws hold exactly over random runs", "[market]") {
    MarketConfig config;
    config.n_traders = 40;
    config.horizon = 300;
    config.initial_money = 25.0;
    config.initial_shares = 3;
    config.seed = 99;

    Xoshiro256StarStar rng(config.seed);
    MarketState st = MarketState::initial(config);
    const std::int64_t money_total = 40 * to_ticks(25.0, 0.01);
    const std::int64_t share_total = 40 * 3;
    std::vector<Trade> trades;
    for (int t = 0; t < config.horizon; ++t) {
        step(st, config, rng, &trades);
        std::int64_t money = 0, shares = 0;
        for (const auto& trader : st.traders) {
            REQUIRE(trader.money_ticks >= 0);
            REQUIRE(trader.shares >= 0);
            money += trader.money_ticks;
            shares += trader.shares;
        }
        REQUIRE(money == money_total);
        REQUIRE(shares == share_total);
    }
}

TEST_CASE("trade prices sit between the matched limits", "[market]") {
    Xoshiro256StarStar rng(5);
    for (int round = 0; round < 50; ++round) {
        std::vector<Order> bids, asks;
        const int nb = 1 + static_cast<int>(rng.uniform_below(20));
        const int na = 1 + static_cast<int>(rng.uniform_below(20));
        for (int i = 0; i < nb; ++i)
            bids.push_back(Order{Side::Bid, 900 + static_cast<std::int64_t>(rng.uniform_below(200)),
                                 1, i, i});
        for (int i = 0; i < na; ++i)
            asks.push_back(Order{Side::Ask, 850 + static_cast<std::int64_t>(rng.uniform_below(200)),
                                 1, 100 + i, i});
        auto sorted_bids = bids;
        auto sorted_asks = asks;
        auto result = match_orders(std::move(sorted_bids), std::move(sorted_asks));
        // reconstruct the matched pairs by replaying the priority order
        std::sort(bids.begin(), bids.end(), [](const Order& a, const Order& b) {
            if (a.price_ticks != b.price_ticks) return a.price_ticks > b.price_ticks;
            return a.arrival_rank < b.arrival_rank;
        });
        std::sort(asks.begin(), asks.end(), [](const Order& a, const Order& b) {
            if (a.price_ticks != b.price_ticks) return a.price_ticks < b.price_ticks;
            return a.arrival_rank < b.arrival_rank;
        });
        for (std::size_t k = 0; k < result.trades.size(); ++k) {
            REQUIRE(result.trades[k].price_ticks >= asks[k].price_ticks);
            REQUIRE(result.trades[k].price_ticks <= bids[k].price_ticks);
        }
    }
}

TEST_CASE("runs are deterministic in the seed", "[market]") {
    MarketConfig config;
    config.n_traders = 50;
    config.horizon = 200;
    config.seed = 4242;
    const Trajectory a = run_simulation(config);
    const Trajectory b = run_simulation(config);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        REQUIRE(a.steps[i].close_price == b.steps[i].close_price);
        REQUIRE(a.steps[i].n_bids == b.steps[i].n_bids);
        REQUIRE(a.steps[i].n_asks == b.steps[i].n_asks);
        REQUIRE(a.steps[i].n_trades == b.steps[i].n_trades);
    }
    config.seed = 4243;
    const Trajectory c = run_simulation(config);
    bool differs = false;
    for (std::size_t i = 0; i < a.steps.size(); ++i)
        differs |= a.steps[i].close_price != c.steps[i].close_price;
    CHECK(differs);
}

TEST_CASE("expected_price_change evaluates the drift formula", "[market]") {
    CHECK(expected_price_change(10.0, 5, 5, 0.15) == 0.0);
    CHECK(expected_price_change(10.0, 0, 1, 0.15) == Approx(0.375));
    CHECK(expected_price_change(0.0, 3, 9, 0.15) == 0.0);
}

TEST_CASE("single-step drift matches the analytic oracle", "[market]") {
    // Forced counts: 8 bidders with positive draws, 2 askers with negative
    // draws, at P = 10. A fine tick isolates the drift law from grid
    // truncation. The best-pair settlement is trades.front().
    MarketConfig config;
    config.n_traders = 10;
    config.horizon = 1;
    config.initial_money = 1000.0;
    config.initial_shares = 5;
    config.price_tick = 1e-4;
    const double sigma = config.sigma;

    Xoshiro256StarStar rng(2024);
    const int reps = 10'000;
    std::vector<double> deltas;
    deltas.reserve(reps);
    std::vector<std::int32_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> draws(10);
    for (int rep = 0; rep < reps; ++rep) {
        MarketState st = MarketState::initial(config);
        for (int i = 0; i < 8; ++i) draws[i] = rng.uniform(0.0, sigma);
        for (int i = 8; i < 10; ++i) draws[i] = -rng.uniform(0.0, sigma);
        std::vector<Trade> trades;
        step_forced(st, config, order, draws, &trades);
        REQUIRE_FALSE(trades.empty());
        deltas.push_back(trades.front().price - 10.0);
    }
    const double mean =
        std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(reps);
    double var = 0.0;
    for (double d : deltas) var += (d - mean) * (d - mean);
    var /= static_cast<double>(reps - 1);
    const double se = std::sqrt(var / reps);
    const double expected = expected_price_change(10.0, 2, 8, sigma);
    CHECK(std::fabs(mean - expected) <= 3.0 * se);
}

TEST_CASE("config validation names the offending field", "[market]") {
    MarketConfig config;
    config.sigma = 1.5;
    try {
        config.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "sigma");
    }
    config = MarketConfig{};
    config.n_traders = 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
