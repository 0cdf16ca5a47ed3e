#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <unistd.h>

#include "crowdbot/engine.hpp"
#include "crowdbot/embedding.hpp"

namespace testing {

using namespace crowdbot;

inline Timestamp at(std::int64_t ms) { return Timestamp{ms}; }

/// Toy table: d=2, weather words on the x axis, chat words on the y axis.
inline std::shared_ptr<const VectorTable> toy_table() {
    auto t = std::make_shared<VectorTable>(2);
    for (const char* w : {"weather", "rain", "forecast", "sunny", "temperature", "kabul", "seattle"}) {
        t->add(w, {1.0, 0.0});
    }
    for (const char* w : {"hello", "hi", "thanks", "movie", "music", "joke", "chat"}) t->add(w, {0.0, 1.0});
    return t;
}

/// Random d-dimensional table over tokens w0..w{n-1}.
inline VectorTable random_table(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    VectorTable t(d);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = g(rng);
        t.add("w" + std::to_string(i), v);
    }
    return t;
}

/// A conversation with `workers` active workers, opened at t=0.
struct Fixture {
    Engine engine;
    ConversationId conv;

    explicit Fixture(int workers = 1, PhaseConfig phase = PhaseConfig::phase2(), RewardSchema schema = {})
        : engine(EventLog{}, schema) {
        conv = engine.open_conversation("u1", phase, true, at(0));
        for (int i = 1; i <= workers; ++i) engine.join_worker(conv, "w" + std::to_string(i), at(0));
    }

    const Conversation& c() const { return engine.conversation(conv); }
};

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("crowdbot-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing
