#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowdbot/conversation.hpp"
#include "crowdbot/event_log.hpp"
#include "crowdbot/voting.hpp"

namespace crowdbot {

/// Command side of the conversation store. Every command validates against
/// the current state, appends the resulting records to the log and only then
/// applies them, so the state is always a pure function of the log.
///
/// Not thread-safe: callers serialize access (one writer per store).
class Engine {
public:
    static constexpr std::string_view kVoteBotId = "vote-bot";

    explicit Engine(EventLog log = {}, RewardSchema schema = {});

    /// Rebuilds state from an already-persisted log. The log keeps its sink,
    /// so new records continue to be persisted.
    static Engine restore(EventLog log, RewardSchema schema = {});

    ConversationId open_conversation(const ParticipantId& user, const PhaseConfig& phase, bool automation_enabled,
                                     Timestamp now);
    void join_worker(ConversationId c, const ParticipantId& worker, Timestamp now);
    /// Closes the conversation once the last active worker leaves.
    void leave_worker(ConversationId c, const ParticipantId& worker, Timestamp now);
    void add_fact(ConversationId c, const ParticipantId& author, const std::string& text, Timestamp now);

    Message post_user_message(ConversationId c, const std::string& text, Timestamp now);
    /// Worker proposals carry an implicit self-upvote and may be accepted
    /// immediately; bot proposals start with no votes.
    Message propose_response(ConversationId c, const ParticipantId& author, Role role, const std::string& text,
                             std::optional<BotId> origin_bot, Timestamp now);
    /// Accepts `msg` and expires every other proposed candidate. Returns the
    /// expired messages.
    std::vector<Message> accept_message(ConversationId c, MessageId msg, Timestamp now);
    VoteOutcome cast_vote(ConversationId c, MessageId msg, const ParticipantId& voter, VoterKind kind,
                          Polarity polarity, Timestamp now);

    /// Expires open candidates and marks the conversation closed.
    void close_conversation(ConversationId c, const std::string& reason, Timestamp now);
    /// Closes every open conversation idle for longer than its phase timeout.
    std::vector<ConversationId> close_idle(Timestamp now);

    const Conversation& conversation(ConversationId c) const;
    const std::map<ConversationId, Conversation>& conversations() const { return conversations_; }
    const RewardLedger& ledger() const { return ledger_; }
    const RewardSchema& schema() const { return schema_; }
    const EventLog& log() const { return log_; }

    /// Appends a record that carries no conversation state (selector
    /// bookkeeping, declines).
    Event note(Timestamp now, std::string_view kind, nlohmann::json payload);

    /// Terminal transitions (accepted/expired) since the previous call, in
    /// log order.
    std::vector<std::pair<ConversationId, MessageId>> drain_resolved();

    nlohmann::json snapshot() const;

private:
    Event record(Timestamp now, std::string_view kind, nlohmann::json payload);
    void apply(const Event& e);
    Conversation& open_conv(ConversationId c);
    void require_text(const std::string& text) const;

    EventLog log_;
    RewardSchema schema_;
    std::map<ConversationId, Conversation> conversations_;
    RewardLedger ledger_;
    std::uint64_t next_conversation_ = 1;
    std::uint64_t next_message_ = 1;
    std::vector<std::pair<ConversationId, MessageId>> resolved_;
};

/// Ledger rebuilt from the points_update records of a log.
RewardLedger replay_ledger(const std::vector<Event>& events);

}  // namespace crowdbot
