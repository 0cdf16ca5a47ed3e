#include "crowdbot/orchestrator.hpp"

#include <algorithm>
#include <random>

#include "crowdbot/errors.hpp"

namespace crowdbot {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool assign_automation(std::uint64_t conversation_seq, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ValidationError("automation fraction must lie in [0,1]");
    const std::uint64_t h = mix_seed(seed ^ mix_seed(conversation_seq));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < fraction;
}

namespace {

Timestamp tick_period(const PhaseConfig& phase) {
    return Timestamp{static_cast<std::int64_t>(phase.chatbot_tick_seconds * 1000.0)};
}

bool turn_answered(const Conversation& conv) {
    for (const Message* m : conv.turn_messages(conv.turn_index())) {
        if (m->role != Role::User && m->state == MessageState::Accepted) return true;
    }
    return false;
}

}  // namespace

Orchestrator::Orchestrator(Engine engine, std::shared_ptr<BotSelector> selector,
                           std::vector<std::shared_ptr<const Bot>> bots,
                           std::shared_ptr<const VoteClassifierModel> model, OrchestratorOptions options)
    : engine_(std::move(engine)),
      selector_(std::move(selector)),
      bots_(std::move(bots)),
      model_(std::move(model)),
      options_(std::move(options)) {
    if (!selector_) throw ValidationError("orchestrator needs a selector");
    std::set<BotId> ids;
    for (const auto& b : bots_) {
        if (!b) throw ValidationError("null bot");
        if (!ids.insert(b->id()).second) throw ValidationError("duplicate bot id " + b->id());
        if (!selector_->contains(b->id())) selector_->register_bot(b->id(), {});
    }
    replay_selector();
}

Orchestrator Orchestrator::restore(EventLog log, RewardSchema schema, std::shared_ptr<BotSelector> selector,
                                   std::vector<std::shared_ptr<const Bot>> bots,
                                   std::shared_ptr<const VoteClassifierModel> model, OrchestratorOptions options) {
    return Orchestrator(Engine::restore(std::move(log), schema), std::move(selector), std::move(bots),
                        std::move(model), std::move(options));
}

void Orchestrator::apply_selector_record(const Event& e) {
    const auto& p = e.payload;
    if (e.kind == event_kind::UserMessage) {
        selector_->observe_user_message(p.at("text").get<std::string>());
    } else if (e.kind == event_kind::SelectorSeen) {
        for (const auto& b : p.at("bots")) {
            const auto id = b.get<std::string>();
            if (selector_->contains(id)) selector_->tick_seen(id);
        }
    } else if (e.kind == event_kind::SelectorOutcome) {
        const auto bot = p.at("bot").get<std::string>();
        const bool accepted = p.at("outcome").get<std::string>() == "accepted";
        if (selector_->contains(bot)) {
            selector_->apply_outcome(bot, p.at("user_text").get<std::string>(), p.at("seen_delta").get<int>() > 0,
                                     p.at("accepted_delta").get<int>() > 0);
        }
        auto key = std::make_tuple(bot, p.at("conversation").get<std::uint64_t>(),
                                   p.at("user_message_id").get<std::uint64_t>());
        outcomes_[key] = outcomes_[key] || accepted;
        settled_messages_.insert(p.at("message_id").get<std::uint64_t>());
    }
}

void Orchestrator::replay_selector() {
    try {
        for (const auto& e : engine_.log().events()) apply_selector_record(e);
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptLog(std::string("bad selector record: ") + ex.what(), 0);
    }
    // A crash between a terminal transition and its selector record leaves
    // the outcome unrecorded; settle those now, in resolution order.
    std::vector<std::pair<std::uint64_t, std::pair<ConversationId, MessageId>>> pending;
    for (const auto& [cid, conv] : engine_.conversations()) {
        for (const auto& m : conv.messages()) {
            if (m.role == Role::Bot && m.is_terminal() && !settled_messages_.count(m.id.value)) {
                pending.push_back({m.resolved_seq.value_or(0), {cid, m.id}});
            }
        }
    }
    std::sort(pending.begin(), pending.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const Timestamp now = engine_.log().events().empty() ? Timestamp{0} : engine_.log().events().back().ts;
    for (const auto& [_, ids] : pending) {
        record_outcome(ids.first, engine_.conversation(ids.first).message(ids.second), now);
    }
}

std::optional<MessageId> Orchestrator::answered_user_message(const Conversation& conv, const Message& m) const {
    std::optional<MessageId> found;
    for (const auto& other : conv.messages()) {
        if (other.created_seq >= m.created_seq) break;
        if (other.role == Role::User) found = other.id;
    }
    return found;
}

void Orchestrator::record_outcome(ConversationId c, const Message& m, Timestamp now) {
    if (settled_messages_.count(m.id.value) || !m.origin_bot) return;
    const Conversation& conv = engine_.conversation(c);
    const auto user = answered_user_message(conv, m);
    const std::string user_text = user ? conv.message(*user).text : std::string();
    const bool accepted = m.state == MessageState::Accepted;
    const auto key = std::make_tuple(*m.origin_bot, c.value, user ? user->value : 0);

    int seen_delta = 0;
    int accepted_delta = 0;
    auto it = outcomes_.find(key);
    if (it == outcomes_.end()) {
        // First terminal outcome for this (bot, user message) decides.
        seen_delta = selector_->mode() == SeenCountMode::PerInvocation ? 1 : 0;
        accepted_delta = accepted ? 1 : 0;
    } else if (!it->second && accepted) {
        accepted_delta = 1;
    }
    Event e = engine_.note(now, event_kind::SelectorOutcome,
                           {{"conversation", c.value},
                            {"message_id", m.id.value},
                            {"bot", *m.origin_bot},
                            {"user_message_id", user ? user->value : 0},
                            {"user_text", user_text},
                            {"outcome", accepted ? "accepted" : "expired"},
                            {"seen_delta", seen_delta},
                            {"accepted_delta", accepted_delta}});
    apply_selector_record(e);
}

void Orchestrator::settle(Timestamp now) {
    for (const auto& [c, id] : engine_.drain_resolved()) {
        const Message& m = engine_.conversation(c).message(id);
        if (m.role == Role::Bot) record_outcome(c, m, now);
    }
}

ConversationId Orchestrator::open_conversation(const ParticipantId& user, const PhaseConfig& phase,
                                               std::optional<bool> automation, Timestamp now) {
    const std::uint64_t seq = engine_.conversations().size() + 1;
    const bool enabled = automation.value_or(assign_automation(seq, phase.automation_fraction, options_.seed));
    const ConversationId c = engine_.open_conversation(user, phase, enabled, now);
    next_tick_[c] = now + tick_period(phase);
    return c;
}

void Orchestrator::join_worker(ConversationId c, const ParticipantId& worker, Timestamp now) {
    engine_.join_worker(c, worker, now);
}

void Orchestrator::leave_worker(ConversationId c, const ParticipantId& worker, Timestamp now) {
    engine_.leave_worker(c, worker, now);
    settle(now);
}

void Orchestrator::add_fact(ConversationId c, const ParticipantId& author, const std::string& text, Timestamp now) {
    engine_.add_fact(c, author, text, now);
}

Message Orchestrator::post_user_message(ConversationId c, const std::string& text, Timestamp now) {
    Message m = engine_.post_user_message(c, text, now);
    selector_->observe_user_message(m.text);
    const Conversation& conv = engine_.conversation(c);
    if (conv.automation_enabled() && selector_->mode() == SeenCountMode::PerUserMessage && !bots_.empty()) {
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& id : selector_->bot_ids()) ids.push_back(id);
        Event e = engine_.note(now, event_kind::SelectorSeen,
                               {{"conversation", c.value}, {"user_message_id", m.id.value}, {"bots", ids}});
        apply_selector_record(e);
    }
    return m;
}

Message Orchestrator::propose(ConversationId c, const ParticipantId& worker, const std::string& text, Timestamp now) {
    Message m = engine_.propose_response(c, worker, Role::Worker, text, std::nullopt, now);
    settle(now);
    return engine_.conversation(c).message(m.id);
}

VoteOutcome Orchestrator::vote(ConversationId c, MessageId m, const ParticipantId& worker, Polarity polarity,
                               Timestamp now) {
    VoteOutcome out = engine_.cast_vote(c, m, worker, VoterKind::Human, polarity, now);
    settle(now);
    return out;
}

void Orchestrator::close_conversation(ConversationId c, const std::string& reason, Timestamp now) {
    engine_.close_conversation(c, reason, now);
    settle(now);
}

std::vector<ConversationId> Orchestrator::close_idle(Timestamp now) {
    auto closed = engine_.close_idle(now);
    settle(now);
    return closed;
}

TickPlan Orchestrator::prepare_tick(ConversationId c, Timestamp now) {
    TickPlan plan;
    plan.conversation = c;
    plan.now = now;
    const Conversation& conv = engine_.conversation(c);
    if (conv.closed() || !conv.automation_enabled()) return plan;
    plan.active = true;

    const Message* user = conv.latest_user_message();
    if (!user || turn_answered(conv) || bots_.empty()) return plan;
    plan.user_message = user->id;

    std::mt19937_64 rng(mix_seed(options_.seed ^ mix_seed(c.value) ^ mix_seed(static_cast<std::uint64_t>(now.count()))));
    std::vector<BotId> chosen;
    if (conv.phase().bots_per_tick == BotsPerTick::OneRandom) {
        std::uniform_int_distribution<std::size_t> pick(0, bots_.size() - 1);
        chosen.push_back(bots_[pick(rng)]->id());
    } else {
        plan.ranking = selector_->rank(user->text);
        chosen = select_bots(plan.ranking, rng, conv.phase().n_random);
    }

    std::set<BotId> pending;
    for (const Message* m : conv.turn_messages(conv.turn_index())) {
        if (m->state == MessageState::Proposed && m->origin_bot) pending.insert(*m->origin_bot);
    }
    for (const auto& id : chosen) {
        if (pending.count(id)) continue;
        auto it = std::find_if(bots_.begin(), bots_.end(), [&](const auto& b) { return b->id() == id; });
        if (it != bots_.end()) plan.bots.push_back(*it);
    }
    plan.context = make_context(conv, rng());
    return plan;
}

std::vector<Invocation> Orchestrator::execute_tick(const TickPlan& plan, std::chrono::milliseconds deadline) {
    if (!plan.active || plan.bots.empty()) return {};
    return invoke_bots(plan.bots, plan.context, deadline);
}

TickReport Orchestrator::apply_tick(const TickPlan& plan, const std::vector<Invocation>& results) {
    TickReport report;
    report.conversation = plan.conversation;
    report.user_message = plan.user_message;
    report.ranking = plan.ranking;
    if (!plan.active) return report;
    const ConversationId c = plan.conversation;
    const Timestamp now = plan.now;
    if (engine_.conversation(c).closed()) return report;

    const std::uint64_t user_id = plan.user_message ? plan.user_message->value : 0;
    auto decline = [&](const BotId& bot, const std::string& reason, bool timed_out) {
        engine_.note(now, event_kind::BotDeclined,
                     {{"conversation", c.value},
                      {"bot", bot},
                      {"user_message_id", user_id},
                      {"reason", reason},
                      {"timed_out", timed_out}});
    };

    for (const auto& inv : results) {
        report.invoked.push_back(inv.bot);
        if (inv.response.declined()) {
            decline(inv.bot, inv.error.value_or("declined"), inv.timed_out);
            report.declined.push_back(inv.bot);
            continue;
        }
        const Conversation& conv = engine_.conversation(c);
        const Message* user = conv.latest_user_message();
        if (conv.closed() || !user || user->id != plan.user_message || turn_answered(conv)) {
            decline(inv.bot, "stale", false);
            report.suppressed.push_back(inv.bot);
            continue;
        }
        const std::string& text = *inv.response.text;
        bool duplicate = false;
        for (const Message* m : conv.turn_messages(conv.turn_index())) {
            if (m->role != Role::User && m->state == MessageState::Proposed && m->text == text) duplicate = true;
        }
        if (duplicate) {
            decline(inv.bot, "duplicate", false);
            report.suppressed.push_back(inv.bot);
            continue;
        }
        Message m = engine_.propose_response(c, inv.bot, Role::Bot, text, inv.bot, now);
        report.proposals.push_back(m.id);
        settle(now);
    }

    if (!engine_.conversation(c).closed() && engine_.conversation(c).phase().vote_bot_enabled && model_) {
        report.machine_vote = cast_machine_vote(c, now);
        settle(now);
    }
    return report;
}

std::optional<MessageId> Orchestrator::cast_machine_vote(ConversationId c, Timestamp now) {
    const Conversation& conv = engine_.conversation(c);
    VoteClassifierModel model = *model_;
    model.confidence_threshold = conv.phase().auto_vote_threshold;
    std::optional<MessageId> best;
    double best_conf = -1.0;
    for (const Message* m : conv.proposed()) {
        if (m->role != Role::Worker) continue;
        if (maybe_vote(model, *m, conv, selector_->table(), options_.vote_bot_id) != VoteDecision::Upvote) continue;
        const double conf = predict_confidence(model, featurize(*m, conv, selector_->table()));
        if (conf > best_conf) {
            best_conf = conf;
            best = m->id;
        }
    }
    if (best) engine_.cast_vote(c, *best, options_.vote_bot_id, VoterKind::Machine, Polarity::Up, now);
    return best;
}

TickReport Orchestrator::run_tick(ConversationId c, Timestamp now) {
    TickPlan plan = prepare_tick(c, now);
    return apply_tick(plan, execute_tick(plan, options_.bot_deadline));
}

std::vector<ConversationId> Orchestrator::due_conversations(Timestamp now) const {
    std::vector<ConversationId> due;
    for (const auto& [id, conv] : engine_.conversations()) {
        if (conv.closed() || !conv.automation_enabled()) continue;
        auto it = next_tick_.find(id);
        const Timestamp next = it != next_tick_.end() ? it->second : conv.opened_at() + tick_period(conv.phase());
        if (now >= next) due.push_back(id);
    }
    return due;
}

void Orchestrator::mark_ticked(ConversationId c, Timestamp now) {
    const Conversation& conv = engine_.conversation(c);
    const Timestamp period = tick_period(conv.phase());
    auto it = next_tick_.find(c);
    Timestamp next = it != next_tick_.end() ? it->second : conv.opened_at() + period;
    while (next <= now) next += period;
    next_tick_[c] = next;
}

std::vector<TickReport> Orchestrator::run_due_ticks(Timestamp now) {
    std::vector<TickReport> reports;
    for (ConversationId c : due_conversations(now)) {
        reports.push_back(run_tick(c, now));
        mark_ticked(c, now);
    }
    return reports;
}

}  // namespace crowdbot
