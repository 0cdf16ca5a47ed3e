#include "crowdbot/reward_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "crowdbot/errors.hpp"

namespace crowdbot {

void MisfireParams::validate() const {
    if (p_misfire_given_bad < 0.0 || p_misfire_given_bad > 1.0) throw ValidationError("misfire rate must lie in [0,1]");
    if (e_upvoted_workers < 0.0) throw ValidationError("expected upvoters must be non-negative");
}

double expected_good(const RewardSchema& schema) { return schema.r_upvote + schema.r_agreement; }

double expected_bad(const RewardSchema& schema, const MisfireParams& params) {
    return params.p_misfire_given_bad * (schema.r_agreement * params.e_upvoted_workers + schema.r_proposal);
}

double expected_save(double tpr, double fpr, const RewardSchema& schema, const MisfireParams& params) {
    if (tpr < 0.0 || tpr > 1.0 || fpr < 0.0 || fpr > 1.0) throw ValidationError("tpr and fpr must lie in [0,1]");
    return tpr * expected_good(schema) - fpr * expected_bad(schema, params);
}

OperatingPoint sweep_thresholds(const std::vector<OperatingPoint>& points, const RewardSchema& schema,
                                const MisfireParams& params) {
    if (points.empty()) throw ValidationError("no operating points to sweep");
    const OperatingPoint* best = &points.front();
    double best_save = expected_save(best->tpr, best->fpr, schema, params);
    for (const auto& p : points) {
        const double s = expected_save(p.tpr, p.fpr, schema, params);
        if (s > best_save || (s == best_save && p.threshold > best->threshold)) {
            best = &p;
            best_save = s;
        }
    }
    return *best;
}

std::vector<OperatingPoint> operating_points(const std::vector<double>& confidences, const std::vector<int>& labels,
                                             double grid_step) {
    if (confidences.size() != labels.size()) throw ValidationError("confidences and labels differ in length");
    if (!(grid_step > 0.0)) throw ValidationError("grid step must be positive");
    std::set<double> thresholds(confidences.begin(), confidences.end());
    const int steps = static_cast<int>(std::round(1.0 / grid_step));
    for (int i = 0; i <= steps; ++i) thresholds.insert(std::min(1.0, i * grid_step));

    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    std::vector<OperatingPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < confidences.size(); ++i) {
            if (confidences[i] < t) continue;
            (labels[i] == 1 ? tp : fp) += 1;
        }
        OperatingPoint p;
        p.threshold = t;
        p.tpr = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
        p.fpr = negatives ? static_cast<double>(fp) / static_cast<double>(negatives) : 0.0;
        p.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
        p.recall = p.tpr;
        out.push_back(p);
    }
    return out;
}

MisfireParams estimate_misfire_params(const VoteClassifierModel& model, const std::vector<std::vector<Event>>& logs,
                                      const VectorTable& table, std::optional<VoteWeights> weights) {
    std::size_t would_vote = 0;
    std::size_t misfires = 0;
    double upvoters = 0.0;
    for (const auto& log : logs) {
        for (const auto& [id, conv] : replay_conversations(log)) {
            const VoteWeights w = weights.value_or(conv.phase().weights);
            for (const auto& m : conv.messages()) {
                if (m.role != Role::Worker || !m.is_terminal()) continue;
                if (predict_confidence(model, featurize(m, conv, table)) < model.confidence_threshold) continue;
                ++would_vote;
                VoteTally tally = VoteTally::of(m);
                tally.machine_up += 1;
                if (acceptance_check(tally, m.active_workers, w, conv.phase().min_human_upvotes_bot_msg)) ++misfires;
                const auto others = std::count_if(m.votes.begin(), m.votes.end(), [&](const Vote& v) {
                    return v.kind == VoterKind::Human && v.polarity == Polarity::Up && v.voter != m.author;
                });
                upvoters += static_cast<double>(others);
            }
        }
    }
    if (would_vote == 0) throw ValidationError("the model would upvote no message in these logs");
    const double n = static_cast<double>(would_vote);
    return MisfireParams{static_cast<double>(misfires) / n, upvoters / n};
}

}  // namespace crowdbot
