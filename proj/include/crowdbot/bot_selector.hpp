#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbot/embedding.hpp"
#include "crowdbot/types.hpp"
#include "json.hpp"

namespace crowdbot {

/// Beta prior shape; alpha and beta act as pseudo-counts of accepted and
/// not-accepted messages for a newly registered bot.
struct BetaShape {
    double alpha = 24.9;
    double beta = 58.1;

    void validate() const;
};

/// Method of moments for a beta distribution with mean mu and stddev sigma.
/// Requires sigma^2 < mu(1-mu).
BetaShape shape_from_moments(double mu, double sigma);

struct BotProfile {
    BotId bot_id;
    std::uint64_t accepted_count = 0;
    std::uint64_t seen_count = 0;
    std::vector<std::string> example_messages;
    std::vector<std::string> success_messages;
    Centroid centroid_sum;
    Timestamp online_since{0};

    /// True until the bot has any example or success message.
    bool zero_dist_mode() const { return example_messages.empty() && success_messages.empty(); }
    MessageVector centroid() const { return centroid_sum.mean(); }
};

/// (accepted + alpha) / (seen + alpha + beta).
double prior(const BotProfile& profile, const BetaShape& shape);

/// prior x similarity. An empty message vector (or a profile whose examples
/// were all out of vocabulary) gets the neutral similarity 0.5.
double score(const MessageVector& message, const BotProfile& profile, const MessageVector& overall_centroid,
             const BetaShape& shape);

BotProfile register_bot(const BotId& id, const std::vector<std::string>& example_messages, const VectorTable& table,
                        Timestamp online_since = Timestamp{0});

/// seen += 1; on acceptance also accepted += 1 and the message joins the
/// success set (centroid updated).
void record_outcome(BotProfile& profile, std::string_view user_message, bool accepted, const VectorTable& table);
/// accepted += 1 and success-set growth, without touching seen_count.
void record_acceptance(BotProfile& profile, std::string_view user_message, const VectorTable& table);

struct RankedBot {
    BotId bot_id;
    double score = 0.0;
    double prior = 0.0;
    double similarity = 0.0;
};

/// Descending score; exact ties ordered by bot id. Throws ValidationError on
/// an empty registry.
std::vector<RankedBot> rank_bots(const MessageVector& message, const std::vector<const BotProfile*>& bots,
                                 const MessageVector& overall_centroid, const BetaShape& shape);

/// Top-1 plus up to n_random distinct uniform draws from the lower ranks.
std::vector<BotId> select_bots(const std::vector<RankedBot>& ranked, std::mt19937_64& rng, int n_random);

/// How seen_count advances.
enum class SeenCountMode {
    PerUserMessage,  // every registered bot ticks once per user message
    PerInvocation,   // a bot ticks once per user message it answered
};

/// Owns every bot profile and the overall user-message centroid.
class BotSelector {
public:
    BotSelector(std::shared_ptr<const VectorTable> table, BetaShape shape = {},
                SeenCountMode mode = SeenCountMode::PerUserMessage);

    const BotProfile& register_bot(const BotId& id, const std::vector<std::string>& example_messages,
                                   Timestamp online_since = Timestamp{0});
    bool contains(const BotId& id) const { return profiles_.count(id) > 0; }
    const BotProfile& profile(const BotId& id) const;
    const std::map<BotId, BotProfile>& profiles() const { return profiles_; }
    std::vector<BotId> bot_ids() const;

    const BetaShape& shape() const { return shape_; }
    SeenCountMode mode() const { return mode_; }
    const VectorTable& table() const { return *table_; }
    MessageVector overall_centroid() const { return overall_.mean(); }

    /// Folds a user message into the overall centroid.
    void observe_user_message(std::string_view text);
    void tick_seen(const BotId& id);
    /// seen/accepted increments as recorded in the log.
    void apply_outcome(const BotId& id, std::string_view user_message, bool count_seen, bool accepted);

    std::vector<RankedBot> rank(std::string_view text) const;
    double prior_of(const BotId& id) const { return prior(profile(id), shape_); }

    nlohmann::json dump() const;

private:
    BotProfile& mutable_profile(const BotId& id);

    std::shared_ptr<const VectorTable> table_;
    BetaShape shape_;
    SeenCountMode mode_;
    std::map<BotId, BotProfile> profiles_;
    Centroid overall_;
};

}  // namespace crowdbot
