#pragma once

#include <string>

#include "json.hpp"

namespace crowdbot {

/// Weights of the acceptance rule: up*w_up - down*w_down >= active*threshold.
struct VoteWeights {
    double w_up = 1.0;
    double w_down = 0.5;
    double threshold = 0.4;

    void validate() const;

    friend bool operator==(const VoteWeights&, const VoteWeights&) = default;
};

enum class BotsPerTick {
    OneRandom,      // one uniformly random registered bot
    TopPlusRandom,  // top-ranked bot plus n_random lower-ranked draws
};

/// Deployment knobs. Frozen into each conversation when it is opened.
struct PhaseConfig {
    std::string name = "phase2";
    double chatbot_tick_seconds = 10.0;
    BotsPerTick bots_per_tick = BotsPerTick::TopPlusRandom;
    int n_random = 1;
    bool vote_bot_enabled = true;
    int min_human_upvotes_bot_msg = 2;
    double auto_vote_threshold = 0.7;
    VoteWeights weights;
    double automation_fraction = 0.5;
    int max_workers = 5;
    double idle_timeout_seconds = 600.0;

    static PhaseConfig phase1();
    static PhaseConfig phase2();
    /// Crowd-only baseline: automation never assigned.
    static PhaseConfig control();
    static PhaseConfig by_name(const std::string& name);

    void validate() const;

    friend bool operator==(const PhaseConfig&, const PhaseConfig&) = default;
};

void to_json(nlohmann::json& j, const VoteWeights& w);
void from_json(const nlohmann::json& j, VoteWeights& w);
void to_json(nlohmann::json& j, const PhaseConfig& p);
/// Missing keys fall back to the preset named by "name" (phase2 if absent).
void from_json(const nlohmann::json& j, PhaseConfig& p);

}  // namespace crowdbot
