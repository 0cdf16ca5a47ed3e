#pragma once

#include <map>
#include <string>
#include <vector>

#include "crowdbot/phase_config.hpp"
#include "crowdbot/types.hpp"
#include "json.hpp"

namespace crowdbot {

/// Vote counts that the acceptance rule looks at.
struct VoteTally {
    int human_up = 0;
    int machine_up = 0;
    int down = 0;
    bool bot_origin = false;

    static VoteTally of(const Message& m);
};

/// Weighted quorum plus the human co-sign rules:
///  - weight: (human_up + machine_up) * w_up - down * w_down >= active * threshold
///  - any machine upvote needs at least one human upvote beside it
///  - bot-origin messages need min_human_upvotes_bot_msg human upvotes
bool acceptance_check(const VoteTally& tally, int active_workers, const VoteWeights& weights,
                      int min_human_upvotes_bot_msg);
bool acceptance_check(const Message& msg, int active_workers, const VoteWeights& weights,
                      const PhaseConfig& phase);

enum class VoteOutcomeKind { Accepted, Pending, Ignored };

struct VoteOutcome {
    VoteOutcomeKind kind = VoteOutcomeKind::Pending;
    bool duplicate = false;

    friend bool operator==(const VoteOutcome&, const VoteOutcome&) = default;
};

struct RewardSchema {
    double r_upvote = 100.0;
    double r_agreement = 500.0;
    double r_proposal = 1000.0;
    double r_acceptance = 0.0;
    double dollars_per_point = 0.0001;

    void validate() const;
};

void to_json(nlohmann::json& j, const RewardSchema& s);
void from_json(const nlohmann::json& j, RewardSchema& s);

enum class GrantReason { Upvote, Agreement, Proposal, Acceptance };

std::string_view to_string(GrantReason r);
GrantReason grant_reason_from_string(std::string_view s);

struct Grant {
    ParticipantId worker;
    GrantReason reason = GrantReason::Upvote;
    double points = 0.0;
    MessageId message;
    ConversationId conversation;

    friend bool operator==(const Grant&, const Grant&) = default;
};

/// Per-worker point totals backed by an append-only grant log.
class RewardLedger {
public:
    void record(const Grant& g);

    double total() const;
    double points_of(const ParticipantId& worker) const;
    double total_for_conversation(ConversationId c) const;
    const std::map<ParticipantId, double>& totals() const { return totals_; }
    const std::vector<Grant>& grants() const { return grants_; }

    /// worker<delim>points<delim>dollars, one row per worker, sorted by id.
    std::string export_dsv(const RewardSchema& schema, char delim = ',') const;

    friend bool operator==(const RewardLedger&, const RewardLedger&) = default;

private:
    std::map<ParticipantId, double> totals_;
    std::vector<Grant> grants_;
};

/// Grants owed when `msg` is accepted: r_agreement to every human upvoter,
/// r_proposal (and r_acceptance when non-zero) to a human proposer.
/// Zero-point grants are omitted.
std::vector<Grant> acceptance_grants(const Message& msg, const RewardSchema& schema);

/// acceptance_grants() recorded straight into `ledger`.
std::vector<Grant> grant_rewards_on_accept(const Message& msg, RewardLedger& ledger, const RewardSchema& schema);

}  // namespace crowdbot
