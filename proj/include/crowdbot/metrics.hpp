#pragma once

#include <map>
#include <string>
#include <vector>

#include "crowdbot/event_log.hpp"
#include "crowdbot/voting.hpp"
#include "json.hpp"

namespace crowdbot {

struct ConversationMetrics {
    std::size_t user_messages = 0;
    std::size_t accepted_worker = 0;
    std::size_t accepted_bot = 0;
    std::size_t human_upvotes_on_accepted = 0;
    std::size_t machine_upvotes_on_accepted = 0;
    double points = 0.0;
    double dollars = 0.0;

    std::size_t accepted_non_user() const { return accepted_worker + accepted_bot; }
    /// accepted bot messages / accepted non-user messages (0 when none).
    double automation_fraction() const;
    double mean_human_upvotes() const;
    double mean_machine_upvotes() const;
    /// Ledger dollars per accepted non-user message (0 when none).
    double cost_per_message() const;

    ConversationMetrics& operator+=(const ConversationMetrics& o);
};

struct MetricsReport {
    std::map<std::uint64_t, ConversationMetrics> per_conversation;
    std::map<std::uint64_t, bool> automation_enabled;
    ConversationMetrics aggregate;
    /// Aggregates over automation-enabled and crowd-only conversations.
    ConversationMetrics automated;
    ConversationMetrics control;
};

/// Counts come from the replayed conversations; points come from `ledger`.
MetricsReport compute_metrics(const std::vector<Event>& events, const RewardLedger& ledger,
                              const RewardSchema& schema);
/// Same, with the ledger rebuilt from the log's points_update records.
MetricsReport compute_metrics(const std::vector<Event>& events, const RewardSchema& schema);

nlohmann::json to_json(const ConversationMetrics& m);
nlohmann::json to_json(const MetricsReport& r);

}  // namespace crowdbot
