#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdbot/event_log.hpp"
#include "crowdbot/phase_config.hpp"
#include "crowdbot/types.hpp"

namespace crowdbot {

struct Fact {
    ParticipantId author;
    std::string text;
    Timestamp added_at{0};

    friend bool operator==(const Fact&, const Fact&) = default;
};

/// Event-sourced state of one conversation. The only mutator is apply();
/// everything else is a read over the current snapshot.
class Conversation {
public:
    Conversation() = default;

    /// Builds the initial state from a conversation_opened event.
    static Conversation from_opened(const Event& e);

    /// Applies one record belonging to this conversation. Throws CorruptLog
    /// when the record is inconsistent with the current state.
    void apply(const Event& e);

    ConversationId id() const { return id_; }
    const ParticipantId& user_id() const { return user_id_; }
    const std::vector<Message>& messages() const { return messages_; }
    const std::vector<Membership>& roster() const { return roster_; }
    const std::vector<Fact>& facts() const { return facts_; }
    const PhaseConfig& phase() const { return phase_; }
    std::uint64_t turn_index() const { return turn_index_; }
    bool automation_enabled() const { return automation_enabled_; }
    bool closed() const { return closed_; }
    Timestamp opened_at() const { return opened_at_; }
    Timestamp last_activity() const { return last_activity_; }

    const Message* find(MessageId id) const;
    const Message& message(MessageId id) const;

    /// Workers whose membership interval covers `at`.
    int active_worker_count(Timestamp at) const;
    bool is_active_worker(const ParticipantId& worker, Timestamp at) const;
    bool has_ever_joined(const ParticipantId& worker) const;

    std::vector<const Message*> proposed() const;
    /// All messages (user and non-user) of one turn, in log order.
    std::vector<const Message*> turn_messages(std::uint64_t turn) const;
    const Message* latest_user_message() const;
    /// Text of the run of user messages that opened the given message's
    /// turn (consecutive user messages without an accepted reply between
    /// them are joined with a single space).
    std::string query_text_for(const Message& reply) const;

    friend bool operator==(const Conversation&, const Conversation&) = default;

private:
    Message& mutable_message(MessageId id, std::uint64_t seq);

    ConversationId id_;
    ParticipantId user_id_;
    std::vector<Message> messages_;
    std::map<std::uint64_t, std::size_t> index_;
    std::vector<Membership> roster_;
    std::vector<Fact> facts_;
    PhaseConfig phase_;
    std::uint64_t turn_index_ = 0;
    bool automation_enabled_ = false;
    bool closed_ = false;
    Timestamp opened_at_{0};
    Timestamp last_activity_{0};
};

/// Full JSON snapshot, used for replay comparisons and the service API.
nlohmann::json snapshot(const Conversation& c);
nlohmann::json to_json(const Message& m);

/// Rebuilds every conversation from a log. Records of kinds that do not
/// belong to a conversation are skipped.
std::map<ConversationId, Conversation> replay_conversations(const std::vector<Event>& events);

}  // namespace crowdbot
