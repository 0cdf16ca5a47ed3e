#include "crowdbot/bots.hpp"

#include <future>
#include <thread>

#include "crowdbot/errors.hpp"

namespace crowdbot {

BotContext make_context(const Conversation& conv, std::uint64_t seed) {
    BotContext ctx;
    ctx.conversation = conv.id();
    ctx.seed = seed;
    for (const auto& m : conv.messages()) {
        ctx.log.push_back(BotContextEntry{m.author, m.role, m.text, m.state, m.created_at});
    }
    if (const Message* u = conv.latest_user_message()) ctx.user_message = u->text;
    return ctx;
}

namespace {

Invocation call_guarded(const std::shared_ptr<const Bot>& bot, const BotContext& context) {
    Invocation inv;
    inv.bot = bot->id();
    try {
        inv.response = bot->respond(context);
        if (inv.response.declined()) inv.response = BotResponse::decline();
    } catch (const std::exception& ex) {
        inv.response = BotResponse::decline();
        inv.error = ex.what();
    } catch (...) {
        inv.response = BotResponse::decline();
        inv.error = "unknown failure";
    }
    return inv;
}

}  // namespace

Invocation invoke_bot(const std::shared_ptr<const Bot>& bot, const BotContext& context,
                      std::chrono::milliseconds deadline) {
    return invoke_bots({bot}, context, deadline).front();
}

std::vector<Invocation> invoke_bots(const std::vector<std::shared_ptr<const Bot>>& bots, const BotContext& context,
                                    std::chrono::milliseconds deadline) {
    std::vector<Invocation> out;
    out.reserve(bots.size());
    if (deadline.count() <= 0) {
        for (const auto& b : bots) out.push_back(call_guarded(b, context));
        return out;
    }
    // Each call runs on a detached thread that owns copies of everything it
    // touches, so a bot that overruns its deadline can finish harmlessly.
    std::vector<std::future<Invocation>> pending;
    auto shared_ctx = std::make_shared<const BotContext>(context);
    for (const auto& b : bots) {
        auto promise = std::make_shared<std::promise<Invocation>>();
        pending.push_back(promise->get_future());
        std::thread([promise, b, shared_ctx] { promise->set_value(call_guarded(b, *shared_ctx)); }).detach();
    }
    const auto until = std::chrono::steady_clock::now() + deadline;
    for (std::size_t i = 0; i < bots.size(); ++i) {
        if (pending[i].wait_until(until) == std::future_status::ready) {
            out.push_back(pending[i].get());
        } else {
            Invocation inv;
            inv.bot = bots[i]->id();
            inv.timed_out = true;
            inv.error = "deadline exceeded";
            out.push_back(std::move(inv));
        }
    }
    return out;
}

nlohmann::json context_to_wire(const BotContext& context) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& e : context.log) {
        messages.push_back({{"author", e.author},
                            {"role", to_string(e.role)},
                            {"text", e.text},
                            {"state", to_string(e.state)},
                            {"timestamp", e.timestamp.count()}});
    }
    return {{"conversation_id", context.conversation.value},
            {"messages", messages},
            {"user_message", context.user_message}};
}

BotContext context_from_wire(const nlohmann::json& j) {
    BotContext ctx;
    try {
        ctx.conversation = ConversationId{j.at("conversation_id").get<std::uint64_t>()};
        for (const auto& m : j.at("messages")) {
            ctx.log.push_back(BotContextEntry{m.value("author", std::string()),
                                              role_from_string(m.at("role").get<std::string>()),
                                              m.at("text").get<std::string>(),
                                              state_from_string(m.value("state", std::string("accepted"))),
                                              Timestamp{m.value("timestamp", std::int64_t{0})}});
        }
        ctx.user_message = j.at("user_message").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("bad bot context: ") + ex.what());
    }
    return ctx;
}

nlohmann::json response_to_wire(const BotResponse& r) {
    nlohmann::json j = {{"text", r.declined() ? nlohmann::json() : nlohmann::json(*r.text)}};
    if (r.confidence) j["confidence"] = *r.confidence;
    return j;
}

BotResponse response_from_wire(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("text")) throw ValidationError("bot reply lacks a text field");
    BotResponse r;
    if (j["text"].is_string()) r.text = j["text"].get<std::string>();
    else if (!j["text"].is_null()) throw ValidationError("bot reply text must be a string or null");
    if (j.contains("confidence") && j["confidence"].is_number()) r.confidence = j["confidence"].get<double>();
    if (r.declined()) r = BotResponse::decline();
    return r;
}

}  // namespace crowdbot
