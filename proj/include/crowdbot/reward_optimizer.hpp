#pragma once

#include <optional>
#include <vector>

#include "crowdbot/auto_voter.hpp"
#include "crowdbot/voting.hpp"

namespace crowdbot {

/// How often a mistaken machine upvote gets a candidate sent, and how many
/// human upvoters such a candidate carries on average.
struct MisfireParams {
    double p_misfire_given_bad = 0.692;
    double e_upvoted_workers = 0.569;

    void validate() const;
};

struct OperatingPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Points saved by a correct machine upvote: one upvote and one agreement reward.
double expected_good(const RewardSchema& schema);
/// Points lost by a mistaken machine upvote: P(misfire) * (agreement * E[upvoters] + proposal).
double expected_bad(const RewardSchema& schema, const MisfireParams& params);
/// tpr * expected_good - fpr * expected_bad, per candidate message.
double expected_save(double tpr, double fpr, const RewardSchema& schema, const MisfireParams& params);

/// Argmax of expected_save; exact ties go to the higher threshold.
/// Throws ValidationError on an empty list.
OperatingPoint sweep_thresholds(const std::vector<OperatingPoint>& points, const RewardSchema& schema,
                                const MisfireParams& params);

/// Operating points at every distinct validation confidence plus a grid of
/// `grid_step` over [0,1], sorted by threshold. `labels` are 1 for Upvote.
std::vector<OperatingPoint> operating_points(const std::vector<double>& confidences, const std::vector<int>& labels,
                                             double grid_step = 0.01);

/// Replays the logs, keeps the worker messages the model would upvote (as of
/// their proposal) and measures how many would be accepted with one extra
/// machine upvote, plus their mean count of human upvoters other than the
/// proposer. `weights` overrides each conversation's vote weights when set.
/// Throws ValidationError when the model would upvote nothing.
MisfireParams estimate_misfire_params(const VoteClassifierModel& model, const std::vector<std::vector<Event>>& logs,
                                      const VectorTable& table, std::optional<VoteWeights> weights = std::nullopt);

}  // namespace crowdbot
