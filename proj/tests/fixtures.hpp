#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "crowdbot/engine.hpp"
#include "crowdbot/reward_optimizer.hpp"
#include "support.hpp"

namespace testing {

using namespace crowdbot;

struct Dataset {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
};

// Two Gaussian blobs at +-mu along a random direction.
inline Dataset blobs(std::size_t n, std::size_t d, double separation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> dir(d);
    double norm = 0;
    for (auto& x : dir) norm += (x = g(rng)) * x;
    for (auto& x : dir) x /= std::sqrt(norm);
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        std::vector<double> r(d);
        for (std::size_t k = 0; k < d; ++k) r[k] = g(rng) + (y ? separation : -separation) * dir[k];
        out.rows.push_back(r);
        out.labels.push_back(y);
    }
    return out;
}

// 200 non-user messages with hand-known label classes:
// 60 Upvote, 50 Downvote, 90 Excluded (30 bot, 20 expired without downvote,
// 20 accepted with a downvote, 20 self-accepted at low quorum).
inline std::vector<Event> label_fixture() {
    Engine e;
    auto a = e.open_conversation("ua", PhaseConfig::phase2(), true, at(0));
    for (const char* w : {"w1", "w2", "w3"}) e.join_worker(a, w, at(0));
    std::int64_t t = 1;
    for (int i = 0; i < 60; ++i) {
        e.post_user_message(a, "question " + std::to_string(i), at(t++));
        if (i < 50) {
            auto bad = e.propose_response(a, "w3", Role::Worker, "bad " + std::to_string(i), std::nullopt, at(t++));
            e.cast_vote(a, bad.id, "w2", VoterKind::Human, Polarity::Down, at(t++));
        }
        if (i < 20) e.propose_response(a, "w2", Role::Worker, "meh " + std::to_string(i), std::nullopt, at(t++));
        if (i < 30) e.propose_response(a, "bot", Role::Bot, "bot " + std::to_string(i), BotId{"bot"}, at(t++));
        auto good = e.propose_response(a, "w1", Role::Worker, "good " + std::to_string(i), std::nullopt, at(t++));
        e.cast_vote(a, good.id, "w2", VoterKind::Human, Polarity::Up, at(t++));
    }
    for (int i = 0; i < 20; ++i) {
        e.post_user_message(a, "contested " + std::to_string(i), at(t++));
        auto m = e.propose_response(a, "w1", Role::Worker, "split " + std::to_string(i), std::nullopt, at(t++));
        e.cast_vote(a, m.id, "w2", VoterKind::Human, Polarity::Down, at(t++));
        e.cast_vote(a, m.id, "w3", VoterKind::Human, Polarity::Up, at(t++));
    }
    auto b = e.open_conversation("ub", PhaseConfig::phase2(), true, at(t));
    for (const char* w : {"w1", "w2"}) e.join_worker(b, w, at(t));
    for (int i = 0; i < 20; ++i) {
        e.post_user_message(b, "hi " + std::to_string(i), at(t++));
        e.propose_response(b, "w1", Role::Worker, "solo " + std::to_string(i), std::nullopt, at(t++));
    }
    return e.log().events();
}

// Brute force over the same grid, with the save written out by hand.
inline std::size_t brute_argmax(const std::vector<OperatingPoint>& pts, double good, double bad) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double si = pts[i].tpr * good - pts[i].fpr * bad;
        const double sb = pts[best].tpr * good - pts[best].fpr * bad;
        if (si > sb || (si == sb && pts[i].threshold > pts[best].threshold)) best = i;
    }
    return best;
}

inline std::vector<OperatingPoint> synthetic_grid(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<OperatingPoint> pts;
    double tpr = 1.0, fpr = 1.0;
    for (int i = 0; i <= 100; ++i) {
        OperatingPoint p;
        p.threshold = i / 100.0;
        p.tpr = tpr;
        p.fpr = fpr;
        pts.push_back(p);
        tpr *= 1.0 - 0.02 * u(rng);
        fpr *= 1.0 - 0.08 * u(rng);
    }
    return pts;
}

}  // namespace testing
