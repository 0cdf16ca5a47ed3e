#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "crowdbot/bot_selector.hpp"
#include "crowdbot/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace crowdbot;

namespace {

BotProfile counters(std::uint64_t accepted, std::uint64_t seen) {
    BotProfile p;
    p.bot_id = "b";
    p.accepted_count = accepted;
    p.seen_count = seen;
    return p;
}

}  // namespace

TEST_CASE("beta shape from moments") {
    auto s = shape_from_moments(0.3, 0.05);
    CHECK(s.alpha == doctest::Approx(24.9).epsilon(1e-9));
    CHECK(s.beta == doctest::Approx(58.1).epsilon(1e-9));
    // mu(1-mu)/sigma^2 = 3 gives the uniform prior
    auto u = shape_from_moments(0.5, std::sqrt(0.25 / 3.0));
    CHECK(u.alpha == doctest::Approx(1.0));
    CHECK(u.beta == doctest::Approx(1.0));
    CHECK_THROWS_AS(shape_from_moments(0.5, 0.5), ValidationError);
    CHECK_THROWS_AS(shape_from_moments(0.0, 0.1), ValidationError);
    CHECK_THROWS_AS(shape_from_moments(0.3, 0.0), ValidationError);
    CHECK_THROWS_AS((BetaShape{0.0, 1.0}).validate(), ValidationError);
}

TEST_CASE("prior worked values") {
    const BetaShape s;
    CHECK(prior(counters(0, 0), s) == 24.9 / 83.0);
    CHECK(prior(counters(0, 0), s) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(prior(counters(5, 10), s) == doctest::Approx(0.32151).epsilon(1e-4));
    CHECK(prior(counters(0, 100), s) == doctest::Approx(0.13607).epsilon(1e-4));
}

TEST_CASE("record_outcome moves the prior per acceptance and rejection") {
    const auto t = testing::toy_table();
    auto acc = register_bot("a", {}, *t);
    CHECK(acc.zero_dist_mode());
    record_outcome(acc, "weather in kabul", true, *t);
    CHECK(prior(acc, {}) == doctest::Approx(25.9 / 84.0));
    CHECK(prior(acc, {}) == doctest::Approx(0.30833).epsilon(1e-4));
    CHECK_FALSE(acc.zero_dist_mode());
    CHECK(acc.centroid().values == std::vector<double>{1.0, 0.0});

    auto rej = register_bot("r", {}, *t);
    record_outcome(rej, "weather in kabul", false, *t);
    CHECK(prior(rej, {}) == doctest::Approx(0.29643).epsilon(1e-4));
    CHECK(rej.zero_dist_mode());
}

TEST_CASE("property: prior stays in (0,1) and approaches the empirical rate") {
    const BetaShape s;
    for (std::uint64_t n = 0; n <= 2000; n += 37) {
        for (std::uint64_t k = 0; k <= n; k += 1 + n / 10) {
            const double p = prior(counters(k, n), s);
            REQUIRE(p > 0.0);
            REQUIRE(p < 1.0);
            if (n > 0) REQUIRE(std::abs(p - double(k) / n) <= (s.alpha + s.beta) / (n + s.alpha + s.beta) + 1e-12);
        }
    }
}

TEST_CASE("score compositions") {
    const auto t = testing::toy_table();
    const BetaShape s;
    const MessageVector overall{{0.5, 0.5}, 4};
    const auto fresh = register_bot("fresh", {}, *t);
    const auto msg = embed_message("weather", *t);
    CHECK(score(msg, fresh, overall, s) == doctest::Approx(0.3));
    CHECK(score(MessageVector::zeros(2), fresh, overall, s) == doctest::Approx(0.15));
    const auto weather = register_bot("weather", {"rain forecast", "sunny"}, *t);
    CHECK(weather.centroid().values == std::vector<double>{1.0, 0.0});
    // hand composition: prior * d(m,o)/(d(m,bot)+d(m,o))
    const auto chat = embed_message("hello", *t);
    const double d_mo = std::sqrt(0.5), d_mb = std::sqrt(2.0);
    CHECK(score(chat, weather, overall, s) == doctest::Approx(0.3 * d_mo / (d_mb + d_mo)));
    CHECK(score(MessageVector::zeros(2), weather, overall, s) == doctest::Approx(0.15));
    // examples all out of vocabulary: neutral
    const auto oov = register_bot("oov", {"zzz"}, *t);
    CHECK_FALSE(oov.zero_dist_mode());
    CHECK(score(msg, oov, overall, s) == doctest::Approx(0.15));
}

TEST_CASE("nearer centroid scores strictly higher at equal priors") {
    const auto t = testing::toy_table();
    const MessageVector overall{{0.5, 0.5}, 2};
    const auto w = register_bot("w", {"weather"}, *t);
    const auto c = register_bot("c", {"hello"}, *t);
    const auto m = embed_message("rain tomorrow", *t);
    CHECK(score(m, w, overall, {}) > score(m, c, overall, {}));
}

TEST_CASE("rank_bots orders by score with bot-id tie-break") {
    const auto t = testing::toy_table();
    const MessageVector overall{{0.5, 0.5}, 2};
    std::vector<BotProfile> ps = {register_bot("zeta", {}, *t), register_bot("alpha", {}, *t),
                                  register_bot("mid", {}, *t)};
    std::vector<const BotProfile*> ptrs = {&ps[0], &ps[1], &ps[2]};
    auto r = rank_bots(embed_message("weather", *t), ptrs, overall, {});
    REQUIRE(r.size() == 3);
    CHECK(r[0].bot_id == "alpha");
    CHECK(r[1].bot_id == "mid");
    CHECK(r[2].bot_id == "zeta");
    CHECK(r[0].prior == doctest::Approx(0.3));
    CHECK(r[0].similarity == doctest::Approx(1.0));
    CHECK_THROWS_AS(rank_bots(embed_message("x", *t), {}, overall, {}), ValidationError);
    std::vector<const BotProfile*> one = {&ps[0]};
    CHECK(rank_bots(embed_message("x", *t), one, overall, {}).size() == 1);
}

TEST_CASE("bootstrapped weather bot outranks a chat-bootstrapped bot of equal prior") {
    const auto t = testing::toy_table();
    BotSelector sel(t);
    sel.register_bot("aaa-chatter", {"hello"});
    sel.register_bot("weather", {"weather forecast", "rain"});
    sel.register_bot("bbb-chatter", {});
    for (const char* m : {"hello", "weather", "hi", "rain"}) sel.observe_user_message(m);
    auto r = sel.rank("weather in kabul");
    // brute force: overall (0.5,0.5), msg (1,0)
    const double d_mo = std::sqrt(0.5);
    std::map<std::string, double> want = {{"weather", 0.3 * 1.0},
                                          {"bbb-chatter", 0.3 * 1.0},
                                          {"aaa-chatter", 0.3 * d_mo / (std::sqrt(2.0) + d_mo)}};
    for (const auto& rb : r) CHECK(rb.score == doctest::Approx(want[rb.bot_id]));
    // An example-free bot sits at similarity 1.0, so at best the bootstrapped
    // bot ties with it; the tie goes by id.
    CHECK(r[0].bot_id == "bbb-chatter");
    CHECK(r[1].bot_id == "weather");
    CHECK(r[2].bot_id == "aaa-chatter");
    // off-centroid weather message: example-free bot stays at 1.0
    auto off = sel.rank("weather hello weather");
    CHECK(off[0].bot_id == "bbb-chatter");
    CHECK(off[1].bot_id == "weather");
}

TEST_CASE("property: rank_bots equals a brute-force sort of hand-composed scores") {
    const auto t = testing::toy_table();
    std::mt19937_64 rng(1);
    const MessageVector overall{{0.4, 0.6}, 5};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BotProfile> ps;
        for (int i = 0; i < 4; ++i) {
            auto p = register_bot("b" + std::to_string(i), {i % 2 ? "hello" : "rain"}, *t);
            p.seen_count = rng() % 50;
            p.accepted_count = rng() % (p.seen_count + 1);
            ps.push_back(p);
        }
        std::vector<const BotProfile*> ptrs;
        for (auto& p : ps) ptrs.push_back(&p);
        const auto m = embed_message(trial % 2 ? "weather" : "chat", *t);
        const auto ranked = rank_bots(m, ptrs, overall, {});
        std::vector<std::pair<double, std::string>> brute;
        for (const auto& p : ps) {
            const double pr = (p.accepted_count + 24.9) / (p.seen_count + 83.0);
            const auto c = p.centroid().values;
            const double dmo = std::hypot(m.values[0] - 0.4, m.values[1] - 0.6);
            const double dmb = std::hypot(m.values[0] - c[0], m.values[1] - c[1]);
            // negate for a descending sort; 7.5x scaling must not change the order
            brute.push_back({-7.5 * pr * dmo / (dmb + dmo), p.bot_id});
        }
        std::sort(brute.begin(), brute.end());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            REQUIRE(ranked[i].bot_id == brute[i].second);
            REQUIRE(ranked[i].score == doctest::Approx(-brute[i].first / 7.5));
        }
    }
}

TEST_CASE("select_bots: top-1 plus uniform draws") {
    std::vector<RankedBot> ranked = {{"a", 0.4, 0, 0}, {"b", 0.3, 0, 0}, {"c", 0.2, 0, 0}, {"d", 0.1, 0, 0}};
    std::mt19937_64 rng(42);
    std::map<std::string, int> counts;
    const int n = 30000;
    for (int i = 0; i < n; ++i) {
        auto sel = select_bots(ranked, rng, 1);
        REQUIRE(sel.size() == 2);
        REQUIRE(sel[0] == "a");
        REQUIRE(sel[1] != "a");
        ++counts[sel[1]];
    }
    for (const char* b : {"b", "c", "d"}) CHECK(std::abs(counts[b] / double(n) - 1.0 / 3.0) <= 0.01);

    CHECK(select_bots(ranked, rng, 0) == std::vector<BotId>{"a"});
    auto all = select_bots(ranked, rng, 10);
    CHECK(all.size() == 4);
    CHECK(std::set<BotId>(all.begin(), all.end()).size() == 4);
    CHECK(select_bots({{"solo", 1, 0, 0}}, rng, 1) == std::vector<BotId>{"solo"});

    std::mt19937_64 r1(9), r2(9);
    CHECK(select_bots(ranked, r1, 2) == select_bots(ranked, r2, 2));
}

TEST_CASE("selector registry and bookkeeping") {
    const auto t = testing::toy_table();
    BotSelector sel(t);
    const auto& p = sel.register_bot("w", {"rain", "sunny", "weather"});
    CHECK(p.centroid().values == std::vector<double>{1.0, 0.0});
    CHECK(p.centroid_sum.count() == 3);
    CHECK_THROWS_AS(sel.register_bot("w", {}), ValidationError);
    CHECK_THROWS_AS(sel.profile("nope"), NotFound);
    sel.tick_seen("w");
    sel.apply_outcome("w", "hello", false, true);
    CHECK(sel.profile("w").seen_count == 1);
    CHECK(sel.profile("w").accepted_count == 1);
    CHECK(sel.prior_of("w") == doctest::Approx(25.9 / 84.0));
    auto dump = sel.dump();
    REQUIRE(dump.size() == 1);
    CHECK(dump[0]["bot_id"] == "w");
    CHECK(dump[0]["successes"] == 1);
    CHECK_THROWS_AS(BotSelector(nullptr), ValidationError);
}

TEST_CASE("property: incremental overall centroid equals the batch mean") {
    const auto table = std::make_shared<const VectorTable>(testing::random_table(50, 4, 3));
    BotSelector sel(table);
    std::mt19937_64 rng(2);
    std::vector<double> sum(4, 0.0);
    int n = 0;
    for (int i = 0; i < 500; ++i) {
        std::string text = "w" + std::to_string(rng() % 50) + " w" + std::to_string(rng() % 50);
        sel.observe_user_message(text);
        auto v = embed_message(text, *table);
        for (int k = 0; k < 4; ++k) sum[k] += v.values[k];
        ++n;
    }
    auto mean = sel.overall_centroid();
    for (int k = 0; k < 4; ++k) CHECK(std::abs(mean.values[k] - sum[k] / n) < 1e-9);
}
