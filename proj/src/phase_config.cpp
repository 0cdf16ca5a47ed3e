#include "crowdbot/phase_config.hpp"

#include "crowdbot/errors.hpp"

namespace crowdbot {

void VoteWeights::validate() const {
    if (!(w_up > 0.0) || !(w_down > 0.0) || !(threshold > 0.0)) {
        throw ValidationError("vote weights and threshold must be strictly positive");
    }
}

PhaseConfig PhaseConfig::phase1() {
    PhaseConfig p;
    p.name = "phase1";
    p.chatbot_tick_seconds = 30.0;
    p.bots_per_tick = BotsPerTick::OneRandom;
    p.n_random = 0;
    p.vote_bot_enabled = true;
    p.min_human_upvotes_bot_msg = 1;
    p.automation_fraction = 1.0;
    return p;
}

PhaseConfig PhaseConfig::phase2() {
    PhaseConfig p;
    p.name = "phase2";
    return p;
}

PhaseConfig PhaseConfig::control() {
    PhaseConfig p = phase1();
    p.name = "control";
    p.vote_bot_enabled = false;
    p.automation_fraction = 0.0;
    return p;
}

PhaseConfig PhaseConfig::by_name(const std::string& name) {
    if (name == "phase1") return phase1();
    if (name == "phase2") return phase2();
    if (name == "control") return control();
    throw ValidationError("unknown phase preset: " + name);
}

void PhaseConfig::validate() const {
    weights.validate();
    if (!(chatbot_tick_seconds > 0.0)) throw ValidationError("chatbot_tick_seconds must be > 0");
    if (automation_fraction < 0.0 || automation_fraction > 1.0) {
        throw ValidationError("automation_fraction must lie in [0,1]");
    }
    if (auto_vote_threshold < 0.0 || auto_vote_threshold > 1.0) {
        throw ValidationError("auto_vote_threshold must lie in [0,1]");
    }
    if (n_random < 0 || min_human_upvotes_bot_msg < 0 || max_workers < 1) {
        throw ValidationError("phase counts out of range");
    }
    if (!(idle_timeout_seconds > 0.0)) throw ValidationError("idle_timeout_seconds must be > 0");
}

void to_json(nlohmann::json& j, const VoteWeights& w) {
    j = {{"w_up", w.w_up}, {"w_down", w.w_down}, {"threshold", w.threshold}};
}

void from_json(const nlohmann::json& j, VoteWeights& w) {
    VoteWeights d;
    w.w_up = j.value("w_up", d.w_up);
    w.w_down = j.value("w_down", d.w_down);
    w.threshold = j.value("threshold", d.threshold);
}

namespace {
std::string policy_name(BotsPerTick p) {
    return p == BotsPerTick::OneRandom ? "one_random" : "top_plus_random";
}

BotsPerTick policy_from_name(const std::string& s) {
    if (s == "one_random") return BotsPerTick::OneRandom;
    if (s == "top_plus_random") return BotsPerTick::TopPlusRandom;
    throw ValidationError("unknown bots_per_tick policy: " + s);
}
}  // namespace

void to_json(nlohmann::json& j, const PhaseConfig& p) {
    j = {{"name", p.name},
         {"chatbot_tick_seconds", p.chatbot_tick_seconds},
         {"bots_per_tick", policy_name(p.bots_per_tick)},
         {"n_random", p.n_random},
         {"vote_bot_enabled", p.vote_bot_enabled},
         {"min_human_upvotes_bot_msg", p.min_human_upvotes_bot_msg},
         {"auto_vote_threshold", p.auto_vote_threshold},
         {"weights", p.weights},
         {"automation_fraction", p.automation_fraction},
         {"max_workers", p.max_workers},
         {"idle_timeout_seconds", p.idle_timeout_seconds}};
}

void from_json(const nlohmann::json& j, PhaseConfig& p) {
    if (j.is_string()) {
        p = PhaseConfig::by_name(j.get<std::string>());
        return;
    }
    PhaseConfig base = PhaseConfig::by_name(j.value("name", std::string("phase2")));
    p = base;
    p.name = j.value("name", base.name);
    p.chatbot_tick_seconds = j.value("chatbot_tick_seconds", base.chatbot_tick_seconds);
    if (j.contains("bots_per_tick")) p.bots_per_tick = policy_from_name(j.at("bots_per_tick"));
    p.n_random = j.value("n_random", base.n_random);
    p.vote_bot_enabled = j.value("vote_bot_enabled", base.vote_bot_enabled);
    p.min_human_upvotes_bot_msg = j.value("min_human_upvotes_bot_msg", base.min_human_upvotes_bot_msg);
    p.auto_vote_threshold = j.value("auto_vote_threshold", base.auto_vote_threshold);
    if (j.contains("weights")) p.weights = j.at("weights").get<VoteWeights>();
    p.automation_fraction = j.value("automation_fraction", base.automation_fraction);
    p.max_workers = j.value("max_workers", base.max_workers);
    p.idle_timeout_seconds = j.value("idle_timeout_seconds", base.idle_timeout_seconds);
}

}  // namespace crowdbot
