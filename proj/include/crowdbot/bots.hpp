#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdbot/conversation.hpp"
#include "crowdbot/types.hpp"
#include "json.hpp"

namespace crowdbot {

struct BotContextEntry {
    ParticipantId author;
    Role role = Role::User;
    std::string text;
    MessageState state = MessageState::Accepted;
    Timestamp timestamp{0};
};

/// What a chatbot sees: the whole log (accepted, proposed and expired
/// entries) plus the latest user message.
struct BotContext {
    ConversationId conversation;
    std::vector<BotContextEntry> log;
    std::string user_message;
    /// Per-invocation seed; built-in bots draw all randomness from it.
    std::uint64_t seed = 0;
};

BotContext make_context(const Conversation& conv, std::uint64_t seed);

struct BotResponse {
    std::optional<std::string> text;
    std::optional<double> confidence;

    static BotResponse decline() { return {}; }
    static BotResponse say(std::string text) { return {std::move(text), std::nullopt}; }
    bool declined() const { return !text || text->empty(); }
};

/// Plugin contract. Implementations must be safe to call concurrently.
class Bot {
public:
    virtual ~Bot() = default;
    virtual const BotId& id() const = 0;
    virtual BotResponse respond(const BotContext& context) const = 0;
};

struct Invocation {
    BotId bot;
    BotResponse response;
    /// Set when the call threw or missed its deadline; the response is then a decline.
    std::optional<std::string> error;
    bool timed_out = false;
};

/// Calls one bot and maps every failure to a decline. A non-positive deadline
/// calls inline without a timeout.
Invocation invoke_bot(const std::shared_ptr<const Bot>& bot, const BotContext& context,
                      std::chrono::milliseconds deadline);

/// Calls all bots concurrently with a shared deadline. Results keep the
/// order of `bots`.
std::vector<Invocation> invoke_bots(const std::vector<std::shared_ptr<const Bot>>& bots, const BotContext& context,
                                    std::chrono::milliseconds deadline);

/// Plugin wire format: {conversation_id, messages[], user_message} and
/// {text: string|null, confidence?: number}.
nlohmann::json context_to_wire(const BotContext& context);
BotContext context_from_wire(const nlohmann::json& j);
nlohmann::json response_to_wire(const BotResponse& r);
BotResponse response_from_wire(const nlohmann::json& j);

}  // namespace crowdbot
