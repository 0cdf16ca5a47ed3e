#include <cmath>
#include <fstream>
#include <random>

#include "crowdbot/auto_voter.hpp"
#include "crowdbot/engine.hpp"
#include "crowdbot/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"

using namespace crowdbot;
using testing::at;
using testing::blobs;
using testing::Dataset;
using testing::label_fixture;

namespace {

double f1_at(const VoteClassifierModel& m, const Dataset& ds, double threshold) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const bool up = predict_confidence(m, std::span<const double>(ds.rows[i])) >= threshold;
        if (up && ds.labels[i]) ++tp;
        else if (up) ++fp;
        else if (ds.labels[i]) ++fn;
    }
    return class_report(tp, fp, fn).f1;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 3 + trial % 5;
        std::vector<std::vector<double>> rows(30, std::vector<double>(d));
        std::vector<int> labels(30);
        for (auto& r : rows)
            for (auto& x : r) x = g(rng);
        for (auto& y : labels) y = static_cast<int>(rng() % 2);
        std::vector<double> w(d);
        for (auto& x : w) x = g(rng);
        const double b = g(rng), lambda = 0.1;
        const auto an = logistic_loss_gradient(w, b, rows, labels, lambda);
        const double h = 1e-6;
        for (std::size_t k = 0; k < d; ++k) {
            auto wp = w, wm = w;
            wp[k] += h;
            wm[k] -= h;
            const double num = (logistic_loss_gradient(wp, b, rows, labels, lambda).loss -
                                logistic_loss_gradient(wm, b, rows, labels, lambda).loss) /
                               (2 * h);
            REQUIRE(std::abs(num - an.grad_w[k]) <= 1e-4 * std::max(1.0, std::abs(num)));
        }
        const double num_b = (logistic_loss_gradient(w, b + h, rows, labels, lambda).loss -
                              logistic_loss_gradient(w, b - h, rows, labels, lambda).loss) /
                             (2 * h);
        REQUIRE(std::abs(num_b - an.grad_b) <= 1e-4 * std::max(1.0, std::abs(num_b)));
    }
}

TEST_CASE("loss is stable for large margins") {
    std::vector<std::vector<double>> rows = {{1000.0}, {-1000.0}};
    std::vector<int> labels = {1, 0};
    std::vector<double> w = {1.0};
    auto lg = logistic_loss_gradient(w, 0.0, rows, labels, 0.0);
    CHECK(std::isfinite(lg.loss));
    CHECK(lg.loss == doctest::Approx(0.0));
    labels = {0, 1};
    lg = logistic_loss_gradient(w, 0.0, rows, labels, 0.0);
    CHECK(lg.loss == doctest::Approx(1000.0));
}

TEST_CASE("training separates linearly separable data") {
    const auto train_set = blobs(400, 6, 3.0, 1);
    const auto model = train_matrix(train_set.rows, train_set.labels, {});
    CHECK(f1_at(model, train_set, 0.5) >= 0.99);
    CHECK(f1_at(model, train_set, model.confidence_threshold) >= 0.95);
}

TEST_CASE("training generalizes to held-out draws of the same blobs") {
    auto all = blobs(800, 4, 2.5, 3);
    Dataset tr, te;
    for (std::size_t i = 0; i < all.rows.size(); ++i) {
        auto& dst = i < 600 ? tr : te;
        dst.rows.push_back(all.rows[i]);
        dst.labels.push_back(all.labels[i]);
    }
    const auto model = train_matrix(tr.rows, tr.labels, {});
    CHECK(f1_at(model, te, 0.5) >= 0.95);
}

TEST_CASE("training is deterministic and validates input") {
    const auto ds = blobs(100, 3, 2.0, 4);
    TrainOptions o;
    o.seed = 17;
    const auto a = train_matrix(ds.rows, ds.labels, o);
    const auto b = train_matrix(ds.rows, ds.labels, o);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    CHECK_THROWS_AS(train_matrix(ds.rows, std::vector<int>(ds.rows.size(), 1), o), ValidationError);
    CHECK_THROWS_AS(train_matrix({}, {}, o), ValidationError);
    CHECK_THROWS_AS(train_matrix({{1.0}, {1.0, 2.0}}, {0, 1}, o), ValidationError);
    CHECK_THROWS_AS(predict_confidence(a, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("constant features do not break standardization") {
    std::vector<std::vector<double>> rows = {{1, 5}, {2, 5}, {3, 5}, {4, 5}};
    std::vector<int> labels = {0, 0, 1, 1};
    const auto m = train_matrix(rows, labels, {});
    CHECK(m.stddev[1] == 1.0);
    CHECK(predict_confidence(m, std::vector<double>{4, 5}) > 0.5);
    CHECK(predict_confidence(m, std::vector<double>{1, 5}) < 0.5);
}

TEST_CASE("label extraction partitions the 200-message fixture exactly") {
    const auto table = testing::toy_table();
    const auto log = label_fixture();
    const auto ex = extract_training_labels({log}, *table);
    CHECK(ex.upvote == 60);
    CHECK(ex.downvote == 50);
    CHECK(ex.excluded == 90);
    CHECK(ex.upvote + ex.downvote + ex.excluded == 200);
    CHECK(ex.examples.size() == 110);
    for (const auto& e : ex.examples) CHECK(e.features.values.size() == kScalarFeatureCount + 4);
}

TEST_CASE("classify_for_training rules") {
    const auto p = PhaseConfig::phase2();
    Message m;
    m.role = Role::Worker;
    m.state = MessageState::Accepted;
    m.active_workers = 3;
    m.votes = {{"w1", VoterKind::Human, Polarity::Up, at(0)}};
    CHECK(classify_for_training(m, p) == LabelClass::Upvote);
    m.active_workers = 2;
    CHECK(classify_for_training(m, p) == LabelClass::Excluded);
    m.active_workers = 3;
    m.votes.push_back({"w2", VoterKind::Human, Polarity::Down, at(0)});
    CHECK(classify_for_training(m, p) == LabelClass::Excluded);
    m.state = MessageState::Expired;
    CHECK(classify_for_training(m, p) == LabelClass::Downvote);
    m.role = Role::Bot;
    CHECK(classify_for_training(m, p) == LabelClass::Excluded);
    m.role = Role::Worker;
    m.state = MessageState::Proposed;
    CHECK(classify_for_training(m, p) == LabelClass::Excluded);
}

TEST_CASE("features use only records before the proposal") {
    const auto table = testing::toy_table();
    Engine e;
    auto c = e.open_conversation("u", PhaseConfig::phase2(), true, at(0));
    for (const char* w : {"w1", "w2", "w3"}) e.join_worker(c, w, at(0));
    e.post_user_message(c, "weather in kabul?", at(1));
    auto first = e.propose_response(c, "w1", Role::Worker, "It is sunny, see www.example.com", std::nullopt, at(2));
    auto target = e.propose_response(c, "w2", Role::Worker, "rain later?", std::nullopt, at(3));
    const auto before = featurize(e.conversation(c).message(target.id), e.conversation(c), *table);
    REQUIRE(before.values.size() == feature_names(2).size());
    CHECK(before.values[0] == 2);   // tokens
    CHECK(before.values[1] == 11);  // characters
    CHECK(before.values[3] == 1);   // question mark
    CHECK(before.values[4] == 0);   // url
    CHECK(before.values[6] == 1);   // one open sibling
    CHECK(before.values[7] == 2);   // ordinal
    CHECK(before.values[8] == 1);   // turn
    CHECK(before.values[10] == 0.5);
    CHECK(before.values[12] == 1.0);  // "rain" vector
    CHECK(before.values[14] == 1.0);  // user vector x
    // later events must not change anything
    e.cast_vote(c, first.id, "w3", VoterKind::Human, Polarity::Up, at(4));
    e.post_user_message(c, "thanks", at(5));
    e.propose_response(c, "w2", Role::Worker, "bye", std::nullopt, at(6));
    const auto after = featurize(e.conversation(c).message(target.id), e.conversation(c), *table);
    CHECK(after.values == before.values);
    const auto url = featurize(e.conversation(c).message(first.id), e.conversation(c), *table);
    CHECK(url.values[4] == 1);
}

TEST_CASE("maybe_vote abstains where it must") {
    const auto table = testing::toy_table();
    VoteClassifierModel always;
    always.schema_version = kFeatureSchemaVersion;
    always.feature_count = kScalarFeatureCount + 4;
    always.weights.assign(always.feature_count, 0.0);
    always.mean.assign(always.feature_count, 0.0);
    always.stddev.assign(always.feature_count, 1.0);
    always.bias = 5.0;
    auto never = always;
    never.bias = -5.0;

    Engine e;
    auto c = e.open_conversation("u", PhaseConfig::phase2(), true, at(0));
    for (const char* w : {"w1", "w2", "w3", "w4", "w5"}) e.join_worker(c, w, at(0));
    e.post_user_message(c, "hello", at(1));
    auto m = e.propose_response(c, "w1", Role::Worker, "hi", std::nullopt, at(2));
    const auto& conv = e.conversation(c);
    CHECK(maybe_vote(always, conv.message(m.id), conv, *table) == VoteDecision::Upvote);
    CHECK(maybe_vote(never, conv.message(m.id), conv, *table) == VoteDecision::Abstain);
    auto bot = e.propose_response(c, "b", Role::Bot, "hey", BotId{"b"}, at(3));
    CHECK(maybe_vote(always, conv.message(bot.id), conv, *table) == VoteDecision::Abstain);
    e.cast_vote(c, m.id, "w2", VoterKind::Human, Polarity::Down, at(4));
    e.cast_vote(c, m.id, "vote-bot", VoterKind::Machine, Polarity::Up, at(4));
    REQUIRE(conv.message(m.id).state == MessageState::Proposed);
    CHECK(maybe_vote(always, conv.message(m.id), conv, *table) == VoteDecision::Abstain);
    // re-sent text by the same worker after a failure
    auto dup = e.propose_response(c, "w1", Role::Worker, "hi", std::nullopt, at(5));
    CHECK(maybe_vote(always, conv.message(dup.id), conv, *table) == VoteDecision::Abstain);
    auto other = e.propose_response(c, "w2", Role::Worker, "hi", std::nullopt, at(6));
    CHECK(maybe_vote(always, conv.message(other.id), conv, *table) == VoteDecision::Upvote);
}

TEST_CASE("model files round-trip and reject bad content") {
    testing::TempDir dir;
    const auto ds = blobs(60, 3, 2.0, 9);
    auto m = train_matrix(ds.rows, ds.labels, {});
    m.confidence_threshold = 0.65;
    save_model(dir / "m.json", m);
    const auto back = load_model(dir / "m.json");
    CHECK(back.weights == m.weights);
    CHECK(back.mean == m.mean);
    CHECK(back.confidence_threshold == 0.65);
    CHECK(predict_confidence(back, ds.rows[0]) == predict_confidence(m, ds.rows[0]));
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"schema_version":1,"feature_count":2,"weights":[1],"bias":0,"mean":[0,0],"stddev":[1,1]})";
    }
    CHECK_THROWS_AS(load_model(dir / "bad.json"), Error);
    FeatureVector fv;
    fv.schema_version = kFeatureSchemaVersion;
    fv.values = ds.rows[0];
    CHECK_THROWS_AS(predict_confidence(m, fv), ValidationError);
}

TEST_CASE("property: raising the threshold never raises recall") {
    const auto ds = blobs(300, 3, 1.0, 12);
    auto m = train_matrix(ds.rows, ds.labels, {});
    double prev_recall = 2.0;
    for (int i = 0; i <= 100; ++i) {
        std::size_t tp = 0, fn = 0;
        for (std::size_t k = 0; k < ds.rows.size(); ++k) {
            if (!ds.labels[k]) continue;
            (predict_confidence(m, ds.rows[k]) >= i / 100.0 ? tp : fn) += 1;
        }
        const double recall = class_report(tp, 0, fn).recall;
        REQUIRE(recall <= prev_recall);
        prev_recall = recall;
    }
}

TEST_CASE("evaluate reports both classes") {
    const auto table = testing::toy_table();
    const auto ex = extract_training_labels({label_fixture()}, *table);
    auto m = train(ex.examples, {});
    const auto rep = evaluate(m, ex.examples);
    CHECK(rep.upvote.support == 60);
    CHECK(rep.downvote.support == 50);
    CHECK(rep.upvote.f1 >= 0.95);
}
