#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "crowdbot/auto_voter.hpp"
#include "crowdbot/bot_selector.hpp"
#include "crowdbot/bots.hpp"
#include "crowdbot/engine.hpp"

namespace crowdbot {

using Clock = std::function<Timestamp()>;

/// Deterministic A/B split: true for roughly `fraction` of conversation
/// sequence numbers.
bool assign_automation(std::uint64_t conversation_seq, double fraction, std::uint64_t seed);

/// splitmix64 finalizer; used to derive per-tick seeds.
std::uint64_t mix_seed(std::uint64_t x);

struct OrchestratorOptions {
    std::uint64_t seed = 0;
    /// Per-bot deadline; zero or less calls bots inline without a timeout.
    std::chrono::milliseconds bot_deadline{5000};
    std::string vote_bot_id{Engine::kVoteBotId};
};

/// Everything a tick needs from the locked state, so bots can run unlocked.
struct TickPlan {
    ConversationId conversation;
    Timestamp now{0};
    bool active = false;
    std::optional<MessageId> user_message;
    std::vector<RankedBot> ranking;
    std::vector<std::shared_ptr<const Bot>> bots;
    BotContext context;
};

struct TickReport {
    ConversationId conversation;
    std::optional<MessageId> user_message;
    std::vector<RankedBot> ranking;
    std::vector<BotId> invoked;
    std::vector<MessageId> proposals;
    std::vector<BotId> declined;
    std::vector<BotId> suppressed;
    std::optional<MessageId> machine_vote;
};

/// Wires the engine, the selector, the bots and the vote bot together.
/// Every conversation command goes through here so that selector feedback
/// is recorded for each terminal bot proposal. Not thread-safe; the service
/// serializes access.
class Orchestrator {
public:
    Orchestrator(Engine engine, std::shared_ptr<BotSelector> selector, std::vector<std::shared_ptr<const Bot>> bots,
                 std::shared_ptr<const VoteClassifierModel> model, OrchestratorOptions options = {});

    /// Rebuilds engine and selector state from the log. `selector` must hold
    /// freshly registered profiles (no outcomes applied yet).
    static Orchestrator restore(EventLog log, RewardSchema schema, std::shared_ptr<BotSelector> selector,
                                std::vector<std::shared_ptr<const Bot>> bots,
                                std::shared_ptr<const VoteClassifierModel> model, OrchestratorOptions options = {});

    /// `automation` overrides the seeded A/B assignment.
    ConversationId open_conversation(const ParticipantId& user, const PhaseConfig& phase,
                                     std::optional<bool> automation, Timestamp now);
    void join_worker(ConversationId c, const ParticipantId& worker, Timestamp now);
    void leave_worker(ConversationId c, const ParticipantId& worker, Timestamp now);
    void add_fact(ConversationId c, const ParticipantId& author, const std::string& text, Timestamp now);
    Message post_user_message(ConversationId c, const std::string& text, Timestamp now);
    Message propose(ConversationId c, const ParticipantId& worker, const std::string& text, Timestamp now);
    VoteOutcome vote(ConversationId c, MessageId m, const ParticipantId& worker, Polarity polarity, Timestamp now);
    void close_conversation(ConversationId c, const std::string& reason, Timestamp now);
    std::vector<ConversationId> close_idle(Timestamp now);

    TickPlan prepare_tick(ConversationId c, Timestamp now);
    static std::vector<Invocation> execute_tick(const TickPlan& plan, std::chrono::milliseconds deadline);
    TickReport apply_tick(const TickPlan& plan, const std::vector<Invocation>& results);
    TickReport run_tick(ConversationId c, Timestamp now);

    /// Runs every tick that is due at `now` (each automated, open
    /// conversation ticks every chatbot_tick_seconds after it opened).
    std::vector<TickReport> run_due_ticks(Timestamp now);
    /// Conversations whose next tick is due at or before `now`.
    std::vector<ConversationId> due_conversations(Timestamp now) const;
    void mark_ticked(ConversationId c, Timestamp now);

    void set_model(std::shared_ptr<const VoteClassifierModel> model) { model_ = std::move(model); }
    std::shared_ptr<const VoteClassifierModel> model() const { return model_; }

    const Engine& engine() const { return engine_; }
    const BotSelector& selector() const { return *selector_; }
    const std::vector<std::shared_ptr<const Bot>>& bots() const { return bots_; }
    const OrchestratorOptions& options() const { return options_; }

private:
    void replay_selector();
    void settle(Timestamp now);
    void record_outcome(ConversationId c, const Message& m, Timestamp now);
    std::optional<MessageId> answered_user_message(const Conversation& conv, const Message& m) const;
    std::optional<MessageId> cast_machine_vote(ConversationId c, Timestamp now);
    void apply_selector_record(const Event& e);

    Engine engine_;
    std::shared_ptr<BotSelector> selector_;
    std::vector<std::shared_ptr<const Bot>> bots_;
    std::shared_ptr<const VoteClassifierModel> model_;
    OrchestratorOptions options_;

    // (bot, conversation, user message) -> accepted?
    std::map<std::tuple<BotId, std::uint64_t, std::uint64_t>, bool> outcomes_;
    std::set<std::uint64_t> settled_messages_;
    std::map<ConversationId, Timestamp> next_tick_;
};

}  // namespace crowdbot
