#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crowdbot/builtin_bots.hpp"
#include "crowdbot/sim.hpp"

namespace testing {

using namespace crowdbot;

/// d=3: weather on x, food on y, small talk on z.
inline std::shared_ptr<const VectorTable> topic_table() {
    auto t = std::make_shared<VectorTable>(3);
    for (const char* w : {"weather", "rain", "forecast", "sunny", "kabul", "seattle", "tomorrow"}) t->add(w, {1, 0, 0});
    for (const char* w : {"sushi", "restaurant", "dinner", "pizza", "eat", "food"}) t->add(w, {0, 1, 0});
    for (const char* w : {"hello", "hi", "thanks", "movie", "joke", "chat", "bored"}) t->add(w, {0, 0, 1});
    return t;
}

inline WorkerPolicy sim_worker(const std::string& id, double p_correct = 1.0, double propose = 0.0) {
    WorkerPolicy w;
    w.id = id;
    w.p_correct = p_correct;
    w.latency_min = 1.0;
    w.latency_max = 3.0;
    w.propose_probability = propose;
    return w;
}

/// Three topical bots from a cold start. The chat bot has no examples, so it
/// starts in zero-distance mode.
inline Scenario cold_start_scenario(std::uint64_t seed = 11, int conversations = 20) {
    Scenario s;
    s.seed = seed;
    s.table = topic_table();
    s.duration_seconds = 200.0 * conversations + 200.0;
    s.bots.push_back({std::make_shared<EchoBot>("weather", "Cloudy with rain later."),
                      {"weather forecast", "will it rain tomorrow", "sunny in seattle"},
                      {"weather"}});
    s.bots.push_back({std::make_shared<EchoBot>("restaurant", "Try the sushi place on 5th."),
                      {"sushi restaurant", "where to eat dinner", "pizza food"},
                      {"restaurant"}});
    s.bots.push_back({std::make_shared<FillerBot>("chatter"), {}, {"chat"}});
    const std::vector<std::pair<std::string, std::string>> script = {
        {"weather in kabul tomorrow", "weather"}, {"hello there", "chat"},
        {"any sushi restaurant", "restaurant"},   {"rain forecast for seattle", "weather"},
        {"i am bored tell a joke", "chat"},       {"pizza for dinner", "restaurant"}};
    for (int i = 0; i < conversations; ++i) {
        ScenarioConversation c;
        c.user = "user-" + std::to_string(i);
        c.start_seconds = 200.0 * i;
        c.automation = true;
        c.workers = {sim_worker("a" + std::to_string(i)), sim_worker("b" + std::to_string(i)),
                     sim_worker("c" + std::to_string(i))};
        double t = 1.0;
        for (const auto& [text, topic] : script) {
            ScriptedMessage m;
            m.at_seconds = t;
            m.text = text;
            m.topic = topic;
            c.messages.push_back(m);
            t += 30.0;
        }
        s.conversations.push_back(std::move(c));
    }
    return s;
}

}  // namespace testing
