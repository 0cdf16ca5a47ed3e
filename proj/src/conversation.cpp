#include "crowdbot/conversation.hpp"

#include <algorithm>

#include "crowdbot/errors.hpp"

namespace crowdbot {

std::string_view to_string(Role r) {
    switch (r) {
        case Role::User: return "user";
        case Role::Worker: return "worker";
        case Role::Bot: return "bot";
    }
    return "?";
}

std::string_view to_string(MessageState s) {
    switch (s) {
        case MessageState::Proposed: return "proposed";
        case MessageState::Accepted: return "accepted";
        case MessageState::Expired: return "expired";
    }
    return "?";
}

std::string_view to_string(VoterKind k) { return k == VoterKind::Human ? "human" : "machine"; }
std::string_view to_string(Polarity p) { return p == Polarity::Up ? "up" : "down"; }

Role role_from_string(std::string_view s) {
    if (s == "user") return Role::User;
    if (s == "worker") return Role::Worker;
    if (s == "bot") return Role::Bot;
    throw ValidationError("unknown role: " + std::string(s));
}

MessageState state_from_string(std::string_view s) {
    if (s == "proposed") return MessageState::Proposed;
    if (s == "accepted") return MessageState::Accepted;
    if (s == "expired") return MessageState::Expired;
    throw ValidationError("unknown message state: " + std::string(s));
}

VoterKind voter_kind_from_string(std::string_view s) {
    if (s == "human") return VoterKind::Human;
    if (s == "machine") return VoterKind::Machine;
    throw ValidationError("unknown voter kind: " + std::string(s));
}

Polarity polarity_from_string(std::string_view s) {
    if (s == "up") return Polarity::Up;
    if (s == "down") return Polarity::Down;
    throw ValidationError("unknown polarity: " + std::string(s));
}

int Message::upvotes() const {
    return static_cast<int>(std::count_if(votes.begin(), votes.end(),
                                          [](const Vote& v) { return v.polarity == Polarity::Up; }));
}

int Message::downvotes() const {
    return static_cast<int>(votes.size()) - upvotes();
}

int Message::human_upvotes() const {
    return static_cast<int>(std::count_if(votes.begin(), votes.end(), [](const Vote& v) {
        return v.polarity == Polarity::Up && v.kind == VoterKind::Human;
    }));
}

int Message::machine_upvotes() const {
    return static_cast<int>(std::count_if(votes.begin(), votes.end(), [](const Vote& v) {
        return v.polarity == Polarity::Up && v.kind == VoterKind::Machine;
    }));
}

bool Message::has_vote_from(std::string_view voter) const {
    return std::any_of(votes.begin(), votes.end(), [&](const Vote& v) { return v.voter == voter; });
}

namespace {

ConversationId conversation_of(const Event& e) {
    return ConversationId{e.payload.at("conversation").get<std::uint64_t>()};
}

MessageId message_of(const Event& e) {
    return MessageId{e.payload.at("message_id").get<std::uint64_t>()};
}

}  // namespace

Conversation Conversation::from_opened(const Event& e) {
    if (e.kind != event_kind::ConversationOpened) {
        throw CorruptLog("expected conversation_opened, got " + e.kind, e.seq);
    }
    Conversation c;
    try {
        c.id_ = conversation_of(e);
        c.user_id_ = e.payload.at("user").get<std::string>();
        c.automation_enabled_ = e.payload.at("automation_enabled").get<bool>();
        c.phase_ = e.payload.at("phase").get<PhaseConfig>();
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptLog(std::string("bad conversation_opened payload: ") + ex.what(), e.seq);
    }
    c.opened_at_ = e.ts;
    c.last_activity_ = e.ts;
    return c;
}

Message& Conversation::mutable_message(MessageId id, std::uint64_t seq) {
    auto it = index_.find(id.value);
    if (it == index_.end()) throw CorruptLog("unknown message " + std::to_string(id.value), seq);
    return messages_[it->second];
}

void Conversation::apply(const Event& e) {
    const auto& p = e.payload;
    try {
        if (conversation_of(e) != id_) throw CorruptLog("record for another conversation", e.seq);

        if (e.kind == event_kind::WorkerJoined) {
            roster_.push_back(Membership{p.at("worker").get<std::string>(), e.ts, std::nullopt});
        } else if (e.kind == event_kind::WorkerLeft) {
            const auto worker = p.at("worker").get<std::string>();
            auto it = std::find_if(roster_.rbegin(), roster_.rend(), [&](const Membership& m) {
                return m.worker == worker && !m.left_at;
            });
            if (it == roster_.rend()) throw CorruptLog("worker_left for absent worker " + worker, e.seq);
            it->left_at = e.ts;
        } else if (e.kind == event_kind::UserMessage || e.kind == event_kind::MessageProposed) {
            if (closed_) throw CorruptLog("message on closed conversation", e.seq);
            Message m;
            m.id = message_of(e);
            if (index_.count(m.id.value)) throw CorruptLog("duplicate message id", e.seq);
            m.conversation = id_;
            m.author = p.at("author").get<std::string>();
            m.text = p.at("text").get<std::string>();
            m.created_at = e.ts;
            m.created_seq = e.seq;
            if (e.kind == event_kind::UserMessage) {
                m.role = Role::User;
                m.state = MessageState::Accepted;
                m.resolved_at = e.ts;
                m.resolved_seq = e.seq;
                ++turn_index_;
            } else {
                m.role = role_from_string(p.at("role").get<std::string>());
                if (m.role == Role::User) throw CorruptLog("user message proposed", e.seq);
                m.state = MessageState::Proposed;
                m.active_workers = p.at("active_workers").get<int>();
                if (p.contains("origin_bot") && !p["origin_bot"].is_null()) {
                    m.origin_bot = p["origin_bot"].get<std::string>();
                }
            }
            m.turn = turn_index_;
            index_[m.id.value] = messages_.size();
            messages_.push_back(std::move(m));
            last_activity_ = e.ts;
        } else if (e.kind == event_kind::VoteCast) {
            Message& m = mutable_message(message_of(e), e.seq);
            if (m.is_terminal()) throw CorruptLog("vote on terminal message", e.seq);
            Vote v{p.at("voter").get<std::string>(),
                   voter_kind_from_string(p.at("voter_kind").get<std::string>()),
                   polarity_from_string(p.at("polarity").get<std::string>()), e.ts};
            if (m.has_vote_from(v.voter)) throw CorruptLog("duplicate vote", e.seq);
            m.votes.push_back(std::move(v));
            last_activity_ = e.ts;
        } else if (e.kind == event_kind::MessageAccepted || e.kind == event_kind::MessageExpired) {
            Message& m = mutable_message(message_of(e), e.seq);
            if (m.is_terminal()) throw CorruptLog("transition out of terminal state", e.seq);
            m.state = e.kind == event_kind::MessageAccepted ? MessageState::Accepted : MessageState::Expired;
            m.resolved_at = e.ts;
            m.resolved_seq = e.seq;
        } else if (e.kind == event_kind::FactAdded) {
            facts_.push_back(Fact{p.at("author").get<std::string>(), p.at("text").get<std::string>(), e.ts});
        } else if (e.kind == event_kind::ConversationClosed) {
            closed_ = true;
        }
        // Other kinds (points, selector bookkeeping, declines) carry no
        // conversation state.
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptLog(std::string("bad ") + e.kind + " payload: " + ex.what(), e.seq);
    } catch (const ValidationError& ex) {
        throw CorruptLog(ex.what(), e.seq);
    }
}

const Message* Conversation::find(MessageId id) const {
    auto it = index_.find(id.value);
    return it == index_.end() ? nullptr : &messages_[it->second];
}

const Message& Conversation::message(MessageId id) const {
    const Message* m = find(id);
    if (!m) throw NotFound("unknown message " + std::to_string(id.value));
    return *m;
}

int Conversation::active_worker_count(Timestamp at) const {
    return static_cast<int>(
        std::count_if(roster_.begin(), roster_.end(), [&](const Membership& m) { return m.covers(at); }));
}

bool Conversation::is_active_worker(const ParticipantId& worker, Timestamp at) const {
    return std::any_of(roster_.begin(), roster_.end(),
                       [&](const Membership& m) { return m.worker == worker && m.covers(at); });
}

bool Conversation::has_ever_joined(const ParticipantId& worker) const {
    return std::any_of(roster_.begin(), roster_.end(), [&](const Membership& m) { return m.worker == worker; });
}

std::vector<const Message*> Conversation::proposed() const {
    std::vector<const Message*> out;
    for (const auto& m : messages_) {
        if (m.role != Role::User && m.state == MessageState::Proposed) out.push_back(&m);
    }
    return out;
}

std::vector<const Message*> Conversation::turn_messages(std::uint64_t turn) const {
    std::vector<const Message*> out;
    for (const auto& m : messages_) {
        if (m.turn == turn) out.push_back(&m);
    }
    return out;
}

const Message* Conversation::latest_user_message() const {
    for (auto it = messages_.rbegin(); it != messages_.rend(); ++it) {
        if (it->role == Role::User) return &*it;
    }
    return nullptr;
}

std::string Conversation::query_text_for(const Message& reply) const {
    std::vector<const Message*> users;
    for (const auto& m : messages_) {
        if (m.created_seq < reply.created_seq && m.role == Role::User) users.push_back(&m);
    }
    if (users.empty()) return {};
    auto accepted_between = [&](std::uint64_t lo, std::uint64_t hi) {
        return std::any_of(messages_.begin(), messages_.end(), [&](const Message& m) {
            return m.role != Role::User && m.state == MessageState::Accepted && m.resolved_seq &&
                   lo < *m.resolved_seq && *m.resolved_seq < hi;
        });
    };
    std::size_t first = users.size() - 1;
    while (first > 0 && !accepted_between(users[first - 1]->created_seq, users[first]->created_seq)) --first;
    std::string out;
    for (std::size_t i = first; i < users.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += users[i]->text;
    }
    return out;
}

nlohmann::json to_json(const Message& m) {
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : m.votes) {
        votes.push_back({{"voter", v.voter},
                         {"voter_kind", to_string(v.kind)},
                         {"polarity", to_string(v.polarity)},
                         {"cast_at", v.cast_at.count()}});
    }
    return {{"id", m.id.value},
            {"conversation", m.conversation.value},
            {"author", m.author},
            {"role", to_string(m.role)},
            {"text", m.text},
            {"state", to_string(m.state)},
            {"votes", votes},
            {"created_at", m.created_at.count()},
            {"resolved_at", m.resolved_at ? nlohmann::json(m.resolved_at->count()) : nlohmann::json()},
            {"origin_bot", m.origin_bot ? nlohmann::json(*m.origin_bot) : nlohmann::json()},
            {"active_workers", m.active_workers},
            {"turn", m.turn}};
}

nlohmann::json snapshot(const Conversation& c) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : c.messages()) msgs.push_back(to_json(m));
    nlohmann::json roster = nlohmann::json::array();
    for (const auto& r : c.roster()) {
        roster.push_back({{"worker", r.worker},
                          {"joined_at", r.joined_at.count()},
                          {"left_at", r.left_at ? nlohmann::json(r.left_at->count()) : nlohmann::json()}});
    }
    nlohmann::json facts = nlohmann::json::array();
    for (const auto& f : c.facts()) facts.push_back({{"author", f.author}, {"text", f.text}});
    return {{"id", c.id().value},       {"user", c.user_id()},
            {"turn_index", c.turn_index()}, {"automation_enabled", c.automation_enabled()},
            {"closed", c.closed()},     {"phase", c.phase()},
            {"messages", msgs},         {"roster", roster},
            {"facts", facts}};
}

std::map<ConversationId, Conversation> replay_conversations(const std::vector<Event>& events) {
    std::map<ConversationId, Conversation> out;
    for (const auto& e : events) {
        if (e.kind == event_kind::ConversationOpened) {
            Conversation c = Conversation::from_opened(e);
            if (out.count(c.id())) throw CorruptLog("conversation opened twice", e.seq);
            out.emplace(c.id(), std::move(c));
            continue;
        }
        if (!e.payload.is_object() || !e.payload.contains("conversation")) continue;
        if (e.kind == event_kind::PointsUpdate || e.kind == event_kind::BotDeclined ||
            e.kind == event_kind::SelectorSeen || e.kind == event_kind::SelectorOutcome) {
            continue;
        }
        ConversationId id{0};
        try {
            id = ConversationId{e.payload.at("conversation").get<std::uint64_t>()};
        } catch (const nlohmann::json::exception&) {
            throw CorruptLog("bad conversation id", e.seq);
        }
        auto it = out.find(id);
        if (it == out.end()) throw CorruptLog("record for unopened conversation", e.seq);
        it->second.apply(e);
    }
    return out;
}

}  // namespace crowdbot
