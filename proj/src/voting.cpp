#include "crowdbot/voting.hpp"

#include <sstream>

#include "crowdbot/errors.hpp"

namespace crowdbot {

VoteTally VoteTally::of(const Message& m) {
    VoteTally t;
    for (const auto& v : m.votes) {
        if (v.polarity == Polarity::Down) {
            ++t.down;
        } else if (v.kind == VoterKind::Human) {
            ++t.human_up;
        } else {
            ++t.machine_up;
        }
    }
    t.bot_origin = m.is_bot_origin();
    return t;
}

bool acceptance_check(const VoteTally& tally, int active_workers, const VoteWeights& weights,
                      int min_human_upvotes_bot_msg) {
    const double weight = (tally.human_up + tally.machine_up) * weights.w_up - tally.down * weights.w_down;
    if (weight < active_workers * weights.threshold) return false;
    if (tally.machine_up > 0 && tally.human_up < 1) return false;
    if (tally.bot_origin && tally.human_up < min_human_upvotes_bot_msg) return false;
    return true;
}

bool acceptance_check(const Message& msg, int active_workers, const VoteWeights& weights,
                      const PhaseConfig& phase) {
    return acceptance_check(VoteTally::of(msg), active_workers, weights, phase.min_human_upvotes_bot_msg);
}

void RewardSchema::validate() const {
    if (r_upvote < 0 || r_agreement < 0 || r_proposal < 0 || r_acceptance < 0 || dollars_per_point < 0) {
        throw ValidationError("reward schema values must be non-negative");
    }
}

void to_json(nlohmann::json& j, const RewardSchema& s) {
    j = {{"r_upvote", s.r_upvote},
         {"r_agreement", s.r_agreement},
         {"r_proposal", s.r_proposal},
         {"r_acceptance", s.r_acceptance},
         {"dollars_per_point", s.dollars_per_point}};
}

void from_json(const nlohmann::json& j, RewardSchema& s) {
    RewardSchema d;
    s.r_upvote = j.value("r_upvote", d.r_upvote);
    s.r_agreement = j.value("r_agreement", d.r_agreement);
    s.r_proposal = j.value("r_proposal", d.r_proposal);
    s.r_acceptance = j.value("r_acceptance", d.r_acceptance);
    s.dollars_per_point = j.value("dollars_per_point", d.dollars_per_point);
}

std::string_view to_string(GrantReason r) {
    switch (r) {
        case GrantReason::Upvote: return "upvote";
        case GrantReason::Agreement: return "agreement";
        case GrantReason::Proposal: return "proposal";
        case GrantReason::Acceptance: return "acceptance";
    }
    return "?";
}

GrantReason grant_reason_from_string(std::string_view s) {
    if (s == "upvote") return GrantReason::Upvote;
    if (s == "agreement") return GrantReason::Agreement;
    if (s == "proposal") return GrantReason::Proposal;
    if (s == "acceptance") return GrantReason::Acceptance;
    throw ValidationError("unknown grant reason: " + std::string(s));
}

void RewardLedger::record(const Grant& g) {
    grants_.push_back(g);
    totals_[g.worker] += g.points;
}

double RewardLedger::total() const {
    double sum = 0.0;
    for (const auto& g : grants_) sum += g.points;
    return sum;
}

double RewardLedger::points_of(const ParticipantId& worker) const {
    auto it = totals_.find(worker);
    return it == totals_.end() ? 0.0 : it->second;
}

double RewardLedger::total_for_conversation(ConversationId c) const {
    double sum = 0.0;
    for (const auto& g : grants_) {
        if (g.conversation == c) sum += g.points;
    }
    return sum;
}

std::string RewardLedger::export_dsv(const RewardSchema& schema, char delim) const {
    std::ostringstream out;
    out.precision(17);
    out << "worker" << delim << "points" << delim << "dollars\n";
    for (const auto& [worker, points] : totals_) {
        out << worker << delim << points << delim << points * schema.dollars_per_point << '\n';
    }
    return out.str();
}

std::vector<Grant> acceptance_grants(const Message& msg, const RewardSchema& schema) {
    std::vector<Grant> out;
    auto add = [&](const ParticipantId& worker, GrantReason reason, double points) {
        if (points > 0.0) out.push_back(Grant{worker, reason, points, msg.id, msg.conversation});
    };
    for (const auto& v : msg.votes) {
        if (v.kind == VoterKind::Human && v.polarity == Polarity::Up) add(v.voter, GrantReason::Agreement, schema.r_agreement);
    }
    if (msg.role == Role::Worker) {
        add(msg.author, GrantReason::Proposal, schema.r_proposal);
        add(msg.author, GrantReason::Acceptance, schema.r_acceptance);
    }
    return out;
}

std::vector<Grant> grant_rewards_on_accept(const Message& msg, RewardLedger& ledger, const RewardSchema& schema) {
    auto grants = acceptance_grants(msg, schema);
    for (const auto& g : grants) ledger.record(g);
    return grants;
}

}  // namespace crowdbot
