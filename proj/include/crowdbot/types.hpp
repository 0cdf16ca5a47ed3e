#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crowdbot {

/// Milliseconds on the orchestrator's clock (virtual in simulation).
using Timestamp = std::chrono::milliseconds;

template <class Tag>
struct Id {
    std::uint64_t value = 0;

    friend auto operator<=>(const Id&, const Id&) = default;
};

using ConversationId = Id<struct ConversationTag>;
using MessageId = Id<struct MessageTag>;

/// Worker, user and bot identifiers share one namespace of strings.
using ParticipantId = std::string;
using BotId = std::string;

enum class Role { User, Worker, Bot };
enum class MessageState { Proposed, Accepted, Expired };
enum class VoterKind { Human, Machine };
enum class Polarity { Up, Down };

std::string_view to_string(Role r);
std::string_view to_string(MessageState s);
std::string_view to_string(VoterKind k);
std::string_view to_string(Polarity p);

Role role_from_string(std::string_view s);
MessageState state_from_string(std::string_view s);
VoterKind voter_kind_from_string(std::string_view s);
Polarity polarity_from_string(std::string_view s);

struct Vote {
    ParticipantId voter;
    VoterKind kind = VoterKind::Human;
    Polarity polarity = Polarity::Up;
    Timestamp cast_at{0};

    friend bool operator==(const Vote&, const Vote&) = default;
};

struct Message {
    MessageId id;
    ConversationId conversation;
    ParticipantId author;
    Role role = Role::User;
    std::string text;
    MessageState state = MessageState::Proposed;
    std::vector<Vote> votes;
    Timestamp created_at{0};
    std::optional<Timestamp> resolved_at;
    std::optional<BotId> origin_bot;

    // Frozen at proposal time; the quorum of the acceptance rule scales with it.
    int active_workers = 0;
    // Turn the message belongs to (1-based; 0 before the first user message).
    std::uint64_t turn = 0;
    // Log sequence numbers, used to reconstruct "as of" views without leakage.
    std::uint64_t created_seq = 0;
    std::optional<std::uint64_t> resolved_seq;

    bool is_terminal() const { return state != MessageState::Proposed; }
    bool is_bot_origin() const { return role == Role::Bot; }

    int upvotes() const;
    int downvotes() const;
    int human_upvotes() const;
    int machine_upvotes() const;
    bool has_vote_from(std::string_view voter) const;

    friend bool operator==(const Message&, const Message&) = default;
};

struct Membership {
    ParticipantId worker;
    Timestamp joined_at{0};
    std::optional<Timestamp> left_at;

    bool covers(Timestamp t) const { return joined_at <= t && (!left_at || t < *left_at); }

    friend bool operator==(const Membership&, const Membership&) = default;
};

}  // namespace crowdbot

template <class Tag>
struct std::hash<crowdbot::Id<Tag>> {
    std::size_t operator()(const crowdbot::Id<Tag>& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
