#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crowdbot/metrics.hpp"
#include "crowdbot/orchestrator.hpp"
#include "crowdbot/reward_optimizer.hpp"
#include "json.hpp"

namespace crowdbot {

/// Simulated crowd worker. Latencies are bounded uniform, in seconds.
struct WorkerPolicy {
    std::string id;
    /// Probability of upvoting a good candidate and downvoting a bad one.
    double p_correct = 1.0;
    double latency_min = 1.0;
    double latency_max = 3.0;
    double join_seconds = 0.0;
    std::optional<double> leave_seconds;
    /// Chance of proposing a reply to each user message.
    double propose_probability = 0.0;
    /// Chance that a proposal uses the good reply.
    double p_good_proposal = 1.0;

    void validate() const;
};

/// One scripted user message with its ground truth.
struct ScriptedMessage {
    double at_seconds = 0.0;
    std::string text;
    std::string topic;
    std::string good_reply = "Sure, here is what I found.";
    std::string bad_reply = "I have no idea.";
};

struct ScenarioConversation {
    std::string user = "user";
    double start_seconds = 0.0;
    std::optional<bool> automation;
    std::vector<WorkerPolicy> workers;
    std::vector<ScriptedMessage> messages;
};

struct SimBot {
    std::shared_ptr<const Bot> bot;
    std::vector<std::string> examples;
    /// Topics the bot answers well; "*" means every topic.
    std::set<std::string> topics;
};

struct Scenario {
    std::uint64_t seed = 0;
    PhaseConfig phase = PhaseConfig::phase2();
    RewardSchema rewards;
    double duration_seconds = 600.0;
    std::vector<ScenarioConversation> conversations;
    std::vector<SimBot> bots;
    std::shared_ptr<const VectorTable> table = std::make_shared<const VectorTable>();
    std::shared_ptr<const VoteClassifierModel> model;
    SeenCountMode seen_count_mode = SeenCountMode::PerUserMessage;
    BetaShape shape;

    void validate() const;
};

/// Scenario file (JSON):
///   seed, phase, rewards, duration_seconds, seen_count_mode,
///   embedding (path) or vectors ({token: [..]}), model (path),
///   bots: registry entries, with meta.topics,
///   conversations: [{user, start_seconds, automation?, repeat?, repeat_every_seconds?,
///                    workers: [{id, p_correct, latency_seconds: [min, max], join_seconds,
///                               leave_seconds?, propose_probability, p_good_proposal}],
///                    messages: [{at_seconds, text, topic?, good_reply?, bad_reply?}]}]
Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

struct PriorPoint {
    std::uint64_t seq = 0;
    BotId bot;
    double prior = 0.0;
};

struct SimResult {
    std::vector<Event> events;
    MetricsReport metrics;
    std::vector<TickReport> ticks;
    /// Ground-truth quality of every non-user message, by message id.
    std::map<std::uint64_t, bool> quality;
    /// User message id -> topic.
    std::map<std::uint64_t, std::string> topics;
    /// User message id -> top-ranked bot the first time bots were invoked for it.
    std::map<std::uint64_t, BotId> first_top1;
    nlohmann::json selector_dump;
};

/// Runs the real orchestrator in 100 ms virtual steps. Identical scenarios
/// produce identical logs.
SimResult run_sim(const Scenario& scenario);

/// Prior of every bot after each selector record, recomputed from the log
/// alone. The first point per bot (seq 0) is the registration prior.
std::map<BotId, std::vector<PriorPoint>> prior_trajectories(const std::vector<Event>& events,
                                                            const std::vector<BotId>& bots, const BetaShape& shape);

/// Per-message event taxonomy: a good candidate is upvoted with probability
/// tpr (saving r_upvote + r_agreement); a bad one is upvoted with
/// probability fpr and then misfires with probability p, costing
/// r_agreement per upvoting worker (Poisson with mean e) plus r_proposal.
double monte_carlo_reward(double tpr, double fpr, const RewardSchema& schema, const MisfireParams& params,
                          std::size_t n, std::uint64_t seed);

struct SelectionStats {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    std::size_t true_positive = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ConvergenceReport {
    std::size_t window = 0;
    std::size_t evaluated = 0;
    std::map<BotId, SelectionStats> first_window;
    std::map<BotId, SelectionStats> overall;
    std::map<BotId, std::vector<PriorPoint>> trajectories;
    SimResult sim;
};

/// Top-1 selection quality against each user message's topic, over the
/// first `window` evaluated messages and over the whole run.
ConvergenceReport selector_convergence_experiment(const Scenario& scenario, std::size_t window);

nlohmann::json to_json(const ConvergenceReport& r);

}  // namespace crowdbot
