#include "crowdbot/metrics.hpp"

#include "crowdbot/conversation.hpp"
#include "crowdbot/engine.hpp"

namespace crowdbot {

namespace {

double ratio(double num, std::size_t den) { return den ? num / static_cast<double>(den) : 0.0; }

}  // namespace

double ConversationMetrics::automation_fraction() const {
    return ratio(static_cast<double>(accepted_bot), accepted_non_user());
}

double ConversationMetrics::mean_human_upvotes() const {
    return ratio(static_cast<double>(human_upvotes_on_accepted), accepted_non_user());
}

double ConversationMetrics::mean_machine_upvotes() const {
    return ratio(static_cast<double>(machine_upvotes_on_accepted), accepted_non_user());
}

double ConversationMetrics::cost_per_message() const { return ratio(dollars, accepted_non_user()); }

ConversationMetrics& ConversationMetrics::operator+=(const ConversationMetrics& o) {
    user_messages += o.user_messages;
    accepted_worker += o.accepted_worker;
    accepted_bot += o.accepted_bot;
    human_upvotes_on_accepted += o.human_upvotes_on_accepted;
    machine_upvotes_on_accepted += o.machine_upvotes_on_accepted;
    points += o.points;
    dollars += o.dollars;
    return *this;
}

MetricsReport compute_metrics(const std::vector<Event>& events, const RewardLedger& ledger,
                              const RewardSchema& schema) {
    MetricsReport report;
    for (const auto& [id, conv] : replay_conversations(events)) {
        ConversationMetrics m;
        for (const auto& msg : conv.messages()) {
            if (msg.role == Role::User) {
                ++m.user_messages;
                continue;
            }
            if (msg.state != MessageState::Accepted) continue;
            (msg.role == Role::Bot ? m.accepted_bot : m.accepted_worker) += 1;
            m.human_upvotes_on_accepted += static_cast<std::size_t>(msg.human_upvotes());
            m.machine_upvotes_on_accepted += static_cast<std::size_t>(msg.machine_upvotes());
        }
        m.points = ledger.total_for_conversation(id);
        m.dollars = m.points * schema.dollars_per_point;
        report.per_conversation[id.value] = m;
        report.automation_enabled[id.value] = conv.automation_enabled();
        report.aggregate += m;
        (conv.automation_enabled() ? report.automated : report.control) += m;
    }
    return report;
}

MetricsReport compute_metrics(const std::vector<Event>& events, const RewardSchema& schema) {
    return compute_metrics(events, replay_ledger(events), schema);
}

nlohmann::json to_json(const ConversationMetrics& m) {
    return {{"user_messages", m.user_messages},
            {"accepted_worker", m.accepted_worker},
            {"accepted_bot", m.accepted_bot},
            {"accepted_non_user", m.accepted_non_user()},
            {"automation_fraction", m.automation_fraction()},
            {"mean_human_upvotes", m.mean_human_upvotes()},
            {"mean_machine_upvotes", m.mean_machine_upvotes()},
            {"points", m.points},
            {"dollars", m.dollars},
            {"cost_per_message", m.cost_per_message()}};
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [id, m] : r.per_conversation) {
        auto j = to_json(m);
        j["automation_enabled"] = r.automation_enabled.at(id);
        per[std::to_string(id)] = j;
    }
    return {{"aggregate", to_json(r.aggregate)},
            {"automated", to_json(r.automated)},
            {"control", to_json(r.control)},
            {"conversations", per}};
}

}  // namespace crowdbot
