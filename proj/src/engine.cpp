#include "crowdbot/engine.hpp"

#include <algorithm>
#include <cctype>

#include "crowdbot/errors.hpp"

namespace crowdbot {

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

Grant grant_from(const Event& e) {
    const auto& p = e.payload;
    return Grant{p.at("worker").get<std::string>(), grant_reason_from_string(p.at("reason").get<std::string>()),
                 p.at("points").get<double>(), MessageId{p.at("message_id").get<std::uint64_t>()},
                 ConversationId{p.at("conversation").get<std::uint64_t>()}};
}

nlohmann::json grant_payload(const Grant& g, double total_after) {
    return {{"conversation", g.conversation.value},
            {"worker", g.worker},
            {"reason", to_string(g.reason)},
            {"points", g.points},
            {"message_id", g.message.value},
            {"total", total_after}};
}

}  // namespace

Engine::Engine(EventLog log, RewardSchema schema) : log_(std::move(log)), schema_(schema) {
    schema_.validate();
    for (const auto& e : log_.events()) apply(e);
    resolved_.clear();
}

Engine Engine::restore(EventLog log, RewardSchema schema) {
    try {
        return Engine(std::move(log), schema);
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptLog(std::string("unreadable record during restore: ") + ex.what(), 0);
    }
}

Event Engine::record(Timestamp now, std::string_view kind, nlohmann::json payload) {
    Event e = log_.append(now, kind, std::move(payload));
    apply(e);
    return e;
}

Event Engine::note(Timestamp now, std::string_view kind, nlohmann::json payload) {
    return record(now, kind, std::move(payload));
}

void Engine::apply(const Event& e) {
    if (e.kind == event_kind::ConversationOpened) {
        Conversation c = Conversation::from_opened(e);
        next_conversation_ = std::max(next_conversation_, c.id().value + 1);
        conversations_.emplace(c.id(), std::move(c));
        return;
    }
    if (e.kind == event_kind::PointsUpdate) {
        ledger_.record(grant_from(e));
        return;
    }
    if (e.kind == event_kind::BotDeclined || e.kind == event_kind::SelectorSeen ||
        e.kind == event_kind::SelectorOutcome) {
        return;
    }
    if (!e.payload.contains("conversation")) return;
    ConversationId id{e.payload.at("conversation").get<std::uint64_t>()};
    auto it = conversations_.find(id);
    if (it == conversations_.end()) throw CorruptLog("record for unopened conversation", e.seq);
    it->second.apply(e);
    if (e.payload.contains("message_id")) {
        next_message_ = std::max(next_message_, e.payload.at("message_id").get<std::uint64_t>() + 1);
    }
    if (e.kind == event_kind::MessageAccepted || e.kind == event_kind::MessageExpired) {
        resolved_.emplace_back(id, MessageId{e.payload.at("message_id").get<std::uint64_t>()});
    }
}

Conversation& Engine::open_conv(ConversationId c) {
    auto it = conversations_.find(c);
    if (it == conversations_.end()) throw NotFound("unknown conversation " + std::to_string(c.value));
    if (it->second.closed()) throw ConversationClosed("conversation " + std::to_string(c.value) + " is closed");
    return it->second;
}

void Engine::require_text(const std::string& text) const {
    if (blank(text)) throw ValidationError("message text must be non-empty");
}

const Conversation& Engine::conversation(ConversationId c) const {
    auto it = conversations_.find(c);
    if (it == conversations_.end()) throw NotFound("unknown conversation " + std::to_string(c.value));
    return it->second;
}

ConversationId Engine::open_conversation(const ParticipantId& user, const PhaseConfig& phase,
                                         bool automation_enabled, Timestamp now) {
    phase.validate();
    if (user.empty()) throw ValidationError("user id must be non-empty");
    ConversationId id{next_conversation_};
    record(now, event_kind::ConversationOpened,
           {{"conversation", id.value}, {"user", user}, {"automation_enabled", automation_enabled}, {"phase", phase}});
    return id;
}

void Engine::join_worker(ConversationId c, const ParticipantId& worker, Timestamp now) {
    Conversation& conv = open_conv(c);
    if (worker.empty()) throw ValidationError("worker id must be non-empty");
    if (conv.is_active_worker(worker, now)) return;
    if (conv.active_worker_count(now) >= conv.phase().max_workers) {
        throw ValidationError("conversation already has the maximum number of workers");
    }
    record(now, event_kind::WorkerJoined, {{"conversation", c.value}, {"worker", worker}});
}

void Engine::leave_worker(ConversationId c, const ParticipantId& worker, Timestamp now) {
    Conversation& conv = open_conv(c);
    if (!conv.is_active_worker(worker, now)) throw NotFound("worker " + worker + " is not active");
    record(now, event_kind::WorkerLeft, {{"conversation", c.value}, {"worker", worker}});
    if (conversation(c).active_worker_count(now) == 0) close_conversation(c, "all_workers_left", now);
}

void Engine::add_fact(ConversationId c, const ParticipantId& author, const std::string& text, Timestamp now) {
    open_conv(c);
    require_text(text);
    record(now, event_kind::FactAdded, {{"conversation", c.value}, {"author", author}, {"text", text}});
}

Message Engine::post_user_message(ConversationId c, const std::string& text, Timestamp now) {
    Conversation& conv = open_conv(c);
    require_text(text);
    MessageId id{next_message_};
    record(now, event_kind::UserMessage,
           {{"conversation", c.value}, {"message_id", id.value}, {"author", conv.user_id()}, {"text", text}});
    return conversation(c).message(id);
}

Message Engine::propose_response(ConversationId c, const ParticipantId& author, Role role, const std::string& text,
                                 std::optional<BotId> origin_bot, Timestamp now) {
    Conversation& conv = open_conv(c);
    require_text(text);
    if (role == Role::User) throw ValidationError("user messages are posted, not proposed");
    if (role == Role::Worker && !conv.is_active_worker(author, now)) {
        throw NotFound("unknown author " + author);
    }
    if (role == Role::Bot) {
        if (!origin_bot || origin_bot->empty()) throw ValidationError("bot proposals need an origin bot id");
        if (author.empty()) throw NotFound("unknown author");
    }
    if (role == Role::Worker) origin_bot.reset();

    MessageId id{next_message_};
    record(now, event_kind::MessageProposed,
           {{"conversation", c.value},
            {"message_id", id.value},
            {"author", author},
            {"role", to_string(role)},
            {"text", text},
            {"origin_bot", origin_bot ? nlohmann::json(*origin_bot) : nlohmann::json()},
            {"active_workers", conv.active_worker_count(now)}});
    if (role == Role::Worker) cast_vote(c, id, author, VoterKind::Human, Polarity::Up, now);
    return conversation(c).message(id);
}

std::vector<Message> Engine::accept_message(ConversationId c, MessageId msg, Timestamp now) {
    Conversation& conv = open_conv(c);
    const Message& m = conv.message(msg);
    if (m.state != MessageState::Proposed) {
        throw InvalidTransition("message " + std::to_string(msg.value) + " is " + std::string(to_string(m.state)));
    }
    const auto grants = acceptance_grants(m, schema_);
    std::vector<MessageId> siblings;
    for (const Message* other : conv.proposed()) {
        if (other->id != msg) siblings.push_back(other->id);
    }

    record(now, event_kind::MessageAccepted, {{"conversation", c.value}, {"message_id", msg.value}});
    for (const auto& g : grants) {
        record(now, event_kind::PointsUpdate, grant_payload(g, ledger_.points_of(g.worker) + g.points));
    }
    std::vector<Message> expired;
    for (MessageId s : siblings) {
        record(now, event_kind::MessageExpired, {{"conversation", c.value}, {"message_id", s.value}});
        expired.push_back(conversation(c).message(s));
    }
    return expired;
}

VoteOutcome Engine::cast_vote(ConversationId c, MessageId msg, const ParticipantId& voter, VoterKind kind,
                              Polarity polarity, Timestamp now) {
    auto it = conversations_.find(c);
    if (it == conversations_.end()) throw NotFound("unknown conversation " + std::to_string(c.value));
    const Message& m = it->second.message(msg);
    if (voter.empty()) throw ValidationError("voter id must be non-empty");
    if (kind == VoterKind::Machine && polarity == Polarity::Down) {
        throw ValidationError("machine downvotes are disabled");
    }
    if (m.role == Role::User) throw ValidationError("user messages cannot be voted on");
    if (m.is_terminal() || it->second.closed()) return {VoteOutcomeKind::Ignored, false};
    if (m.has_vote_from(voter)) return {VoteOutcomeKind::Ignored, true};

    record(now, event_kind::VoteCast,
           {{"conversation", c.value},
            {"message_id", msg.value},
            {"voter", voter},
            {"voter_kind", to_string(kind)},
            {"polarity", to_string(polarity)}});
    if (kind == VoterKind::Human && polarity == Polarity::Up && schema_.r_upvote > 0.0) {
        Grant g{voter, GrantReason::Upvote, schema_.r_upvote, msg, c};
        record(now, event_kind::PointsUpdate, grant_payload(g, ledger_.points_of(voter) + g.points));
    }

    const Conversation& conv = conversation(c);
    const Message& updated = conv.message(msg);
    if (acceptance_check(updated, updated.active_workers, conv.phase().weights, conv.phase())) {
        accept_message(c, msg, now);
        return {VoteOutcomeKind::Accepted, false};
    }
    return {VoteOutcomeKind::Pending, false};
}

void Engine::close_conversation(ConversationId c, const std::string& reason, Timestamp now) {
    Conversation& conv = open_conv(c);
    std::vector<MessageId> open;
    for (const Message* m : conv.proposed()) open.push_back(m->id);
    for (MessageId id : open) record(now, event_kind::MessageExpired, {{"conversation", c.value}, {"message_id", id.value}});
    record(now, event_kind::ConversationClosed, {{"conversation", c.value}, {"reason", reason}});
}

std::vector<ConversationId> Engine::close_idle(Timestamp now) {
    std::vector<ConversationId> idle;
    for (const auto& [id, conv] : conversations_) {
        if (conv.closed()) continue;
        const auto timeout = Timestamp{static_cast<std::int64_t>(conv.phase().idle_timeout_seconds * 1000.0)};
        if (now - conv.last_activity() > timeout) idle.push_back(id);
    }
    for (ConversationId id : idle) close_conversation(id, "idle_timeout", now);
    return idle;
}

std::vector<std::pair<ConversationId, MessageId>> Engine::drain_resolved() {
    return std::exchange(resolved_, {});
}

nlohmann::json Engine::snapshot() const {
    nlohmann::json convs = nlohmann::json::array();
    for (const auto& [id, c] : conversations_) convs.push_back(crowdbot::snapshot(c));
    nlohmann::json totals = nlohmann::json::object();
    for (const auto& [w, pts] : ledger_.totals()) totals[w] = pts;
    return {{"conversations", convs}, {"ledger", totals}, {"grants", ledger_.grants().size()}};
}

RewardLedger replay_ledger(const std::vector<Event>& events) {
    RewardLedger ledger;
    for (const auto& e : events) {
        if (e.kind != event_kind::PointsUpdate) continue;
        try {
            ledger.record(grant_from(e));
        } catch (const std::exception& ex) {
            throw CorruptLog(std::string("bad points_update: ") + ex.what(), e.seq);
        }
    }
    return ledger;
}

}  // namespace crowdbot
