#include <cmath>
#include <random>

#include "crowdbot/engine.hpp"
#include "crowdbot/errors.hpp"
#include "crowdbot/reward_optimizer.hpp"
#include "crowdbot/sim.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"

using namespace crowdbot;
using testing::at;
using testing::brute_argmax;
using testing::synthetic_grid;

namespace {

VoteClassifierModel constant_model(double bias) {
    VoteClassifierModel m;
    m.feature_count = kScalarFeatureCount + 4;
    m.weights.assign(m.feature_count, 0.0);
    m.mean.assign(m.feature_count, 0.0);
    m.stddev.assign(m.feature_count, 1.0);
    m.bias = bias;
    m.confidence_threshold = 0.5;
    return m;
}

// Message kinds in a five-worker conversation (quorum 2.0), all left
// unaccepted. `others` counts human upvoters besides the proposer.
//   A: others 0, down 0 -> one more vote reaches 2.0      (misfire)
//   B: others 1, down 1 -> 1.5 + 1 = 2.5                  (misfire)
//   C: others 0, down 1 -> 0.5 + 1 = 1.5                  (no misfire)
//   D: others 1, down 3 -> 0.5 + 1 = 1.5                  (no misfire)
std::vector<Event> misfire_log(int a, int b, int c, int d) {
    Engine e;
    std::int64_t t = 0;
    auto add = [&](int others, int downs) {
        auto conv = e.open_conversation("u", PhaseConfig::phase2(), true, at(t));
        for (const char* w : {"w1", "w2", "w3", "w4", "w5"}) e.join_worker(conv, w, at(t));
        e.post_user_message(conv, "hello", at(++t));
        auto m = e.propose_response(conv, "w1", Role::Worker, "hi", std::nullopt, at(++t));
        const char* downers[] = {"w3", "w4", "w5"};
        for (int i = 0; i < downs; ++i) e.cast_vote(conv, m.id, downers[i], VoterKind::Human, Polarity::Down, at(++t));
        if (others) e.cast_vote(conv, m.id, "w2", VoterKind::Human, Polarity::Up, at(++t));
        REQUIRE(e.conversation(conv).message(m.id).state == MessageState::Proposed);
        e.close_conversation(conv, "done", at(++t));
    };
    for (int i = 0; i < a; ++i) add(0, 0);
    for (int i = 0; i < b; ++i) add(1, 1);
    for (int i = 0; i < c; ++i) add(0, 1);
    for (int i = 0; i < d; ++i) add(1, 3);
    return e.log().events();
}

}  // namespace

TEST_CASE("expected good and bad worked values") {
    const RewardSchema s;
    const MisfireParams p;
    CHECK(expected_good(s) == 600.0);
    CHECK(expected_bad(s, p) == doctest::Approx(888.874).epsilon(1e-12));
    CHECK(expected_good(RewardSchema{0, 0, 1000, 0, 0}) == 0.0);
    CHECK(expected_good(RewardSchema{1, 2, 0, 0, 0}) == 3.0);
    CHECK(expected_bad(s, MisfireParams{0.0, 0.569}) == 0.0);
    CHECK(expected_bad(s, MisfireParams{0.5, 0.0}) == doctest::Approx(500.0));
}

TEST_CASE("expected save worked values") {
    const RewardSchema s;
    const MisfireParams p;
    CHECK(expected_save(1, 0, s, p) == doctest::Approx(600.0));
    CHECK(expected_save(0, 1, s, p) == doctest::Approx(-888.874));
    CHECK(expected_save(0.745, 200.0 / 888.874, s, p) == doctest::Approx(247.0));
    CHECK_THROWS_AS(expected_save(1.1, 0, s, p), ValidationError);
    CHECK_THROWS_AS(expected_save(0.5, -0.1, s, p), ValidationError);
    CHECK_THROWS_AS((MisfireParams{1.5, 0}).validate(), ValidationError);
}

TEST_CASE("property: expected save is affine and homogeneous") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        RewardSchema s{100 * u(rng), 1000 * u(rng), 2000 * u(rng), 0, 1e-4};
        MisfireParams p{u(rng), 2 * u(rng)};
        const double t1 = u(rng), t2 = u(rng), f = u(rng), lam = u(rng);
        const double mix = expected_save(lam * t1 + (1 - lam) * t2, f, s, p);
        REQUIRE(mix == doctest::Approx(lam * expected_save(t1, f, s, p) + (1 - lam) * expected_save(t2, f, s, p)));
        RewardSchema s2{2 * s.r_upvote, 2 * s.r_agreement, 2 * s.r_proposal, 0, 1e-4};
        REQUIRE(expected_save(t1, f, s2, p) == doctest::Approx(2 * expected_save(t1, f, s, p)));
    }
}

TEST_CASE("sweep matches brute force on 101-point grids and is scale invariant") {
    const RewardSchema s;
    const MisfireParams p;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto pts = synthetic_grid(seed);
        const auto best = sweep_thresholds(pts, s, p);
        REQUIRE(best.threshold == pts[brute_argmax(pts, 600.0, 888.874)].threshold);
        RewardSchema scaled{300, 1500, 3000, 0, 1e-4};
        REQUIRE(sweep_thresholds(pts, scaled, p).threshold == best.threshold);
    }
}

TEST_CASE("sweep tie-break and degenerate input") {
    const RewardSchema s;
    const MisfireParams p;
    std::vector<OperatingPoint> single = {{0.3, 0.5, 0.1, 0, 0}};
    CHECK(sweep_thresholds(single, s, p).threshold == 0.3);
    std::vector<OperatingPoint> tie = {{0.65, 0.5, 0.0, 0, 0}, {0.7, 0.5, 0.0, 0, 0}, {0.6, 0.1, 0.0, 0, 0}};
    CHECK(sweep_thresholds(tie, s, p).threshold == 0.7);
    CHECK_THROWS_AS(sweep_thresholds({}, s, p), ValidationError);
}

TEST_CASE("operating points from confidences") {
    const std::vector<double> conf = {0.9, 0.8, 0.35, 0.2};
    const std::vector<int> labels = {1, 0, 1, 0};
    const auto pts = operating_points(conf, labels, 0.25);
    // thresholds: grid 0, .25, .5, .75, 1 plus the four confidences
    REQUIRE(pts.size() == 9);
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].threshold > pts[i - 1].threshold);
    auto find = [&](double t) {
        for (const auto& p : pts)
            if (p.threshold == t) return p;
        FAIL("missing threshold");
        return OperatingPoint{};
    };
    CHECK(find(0.0).tpr == 1.0);
    CHECK(find(0.0).fpr == 1.0);
    CHECK(find(0.5).tpr == 0.5);
    CHECK(find(0.5).fpr == 0.5);
    CHECK(find(0.9).tpr == 0.5);
    CHECK(find(0.9).fpr == 0.0);
    CHECK(find(1.0).tpr == 0.0);
    CHECK(find(1.0).precision == 1.0);
    CHECK_THROWS_AS(operating_points({0.1}, {1, 0}), ValidationError);
}

TEST_CASE("misfire estimation: saturation, zero and recovery") {
    const auto table = testing::toy_table();
    const auto yes = constant_model(5.0);
    auto p1 = estimate_misfire_params(yes, {misfire_log(10, 0, 0, 0)}, *table);
    CHECK(p1.p_misfire_given_bad == 1.0);
    CHECK(p1.e_upvoted_workers == 0.0);
    auto p0 = estimate_misfire_params(yes, {misfire_log(0, 0, 10, 0)}, *table);
    CHECK(p0.p_misfire_given_bad == 0.0);
    // 1000 messages built to the deployment regime: 692 misfires, 569 extra upvoters.
    auto pr = estimate_misfire_params(yes, {misfire_log(292, 400, 139, 169)}, *table);
    CHECK(std::abs(pr.p_misfire_given_bad - 0.692) <= 0.01);
    CHECK(std::abs(pr.e_upvoted_workers - 0.569) <= 0.01);
    CHECK_THROWS_AS(estimate_misfire_params(constant_model(-5.0), {misfire_log(3, 0, 0, 0)}, *table),
                    ValidationError);
}

TEST_CASE("Monte Carlo agrees with the closed form") {
    const RewardSchema s;
    const MisfireParams p;
    for (auto [tpr, fpr] : {std::pair{1.0, 0.0}, {0.745, 0.1}, {0.0, 1.0}, {0.5, 0.5}}) {
        const double mc = monte_carlo_reward(tpr, fpr, s, p, 100000, 2024);
        const double cf = expected_save(tpr, fpr, s, p);
        INFO(tpr << " " << fpr);
        CHECK(std::abs(mc - cf) <= 0.02 * std::abs(cf));
    }
    CHECK(monte_carlo_reward(1.0, 0.0, s, p, 10, 1) == 600.0);
    CHECK(monte_carlo_reward(0.3, 0.3, s, p, 1000, 5) == monte_carlo_reward(0.3, 0.3, s, p, 1000, 5));
    CHECK_THROWS_AS(monte_carlo_reward(0.3, 0.3, s, p, 0, 5), ValidationError);
}

TEST_CASE("Monte Carlo error shrinks like 1/sqrt(n)") {
    const RewardSchema s;
    const MisfireParams p;
    auto spread = [&](std::size_t n) {
        double sum = 0, sq = 0;
        const int reps = 60;
        for (int r = 0; r < reps; ++r) {
            const double x = monte_carlo_reward(0.745, 0.1, s, p, n, 1000 + r);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / reps;
        return std::sqrt(sq / reps - mean * mean);
    };
    const double ratio = spread(400) / spread(6400);
    // sqrt(16) = 4
    CHECK(ratio > 2.5);
    CHECK(ratio < 6.0);
}
