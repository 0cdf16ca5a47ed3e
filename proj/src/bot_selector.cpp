#include "crowdbot/bot_selector.hpp"

#include <algorithm>
#include <cmath>

#include "crowdbot/errors.hpp"

namespace crowdbot {

void BetaShape::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ValidationError("beta shape parameters must be positive");
}

BetaShape shape_from_moments(double mu, double sigma) {
    if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("mean must lie in (0,1)");
    if (!(sigma > 0.0)) throw ValidationError("stddev must be positive");
    const double var = sigma * sigma;
    if (!(var < mu * (1.0 - mu))) throw ValidationError("variance must be below mu(1-mu)");
    const double common = mu * (1.0 - mu) / var - 1.0;
    return BetaShape{mu * common, (1.0 - mu) * common};
}

double prior(const BotProfile& profile, const BetaShape& shape) {
    return (static_cast<double>(profile.accepted_count) + shape.alpha) /
           (static_cast<double>(profile.seen_count) + shape.alpha + shape.beta);
}

double score(const MessageVector& message, const BotProfile& profile, const MessageVector& overall_centroid,
             const BetaShape& shape) {
    const double p = prior(profile, shape);
    if (message.is_empty()) return p * 0.5;
    if (profile.zero_dist_mode()) return p * similarity_ratio(message, message, overall_centroid, true);
    const MessageVector centroid = profile.centroid();
    if (centroid.is_empty()) return p * 0.5;
    return p * similarity_ratio(message, centroid, overall_centroid, false);
}

BotProfile register_bot(const BotId& id, const std::vector<std::string>& example_messages, const VectorTable& table,
                        Timestamp online_since) {
    if (id.empty()) throw ValidationError("bot id must be non-empty");
    BotProfile p;
    p.bot_id = id;
    p.example_messages = example_messages;
    p.centroid_sum = Centroid(table.dimension());
    for (const auto& text : example_messages) p.centroid_sum.add(embed_message(text, table));
    p.online_since = online_since;
    return p;
}

void record_acceptance(BotProfile& profile, std::string_view user_message, const VectorTable& table) {
    ++profile.accepted_count;
    profile.success_messages.emplace_back(user_message);
    profile.centroid_sum.add(embed_message(user_message, table));
}

void record_outcome(BotProfile& profile, std::string_view user_message, bool accepted, const VectorTable& table) {
    ++profile.seen_count;
    if (accepted) record_acceptance(profile, user_message, table);
}

std::vector<RankedBot> rank_bots(const MessageVector& message, const std::vector<const BotProfile*>& bots,
                                 const MessageVector& overall_centroid, const BetaShape& shape) {
    if (bots.empty()) throw ValidationError("no bots registered");
    std::vector<RankedBot> out;
    out.reserve(bots.size());
    for (const BotProfile* b : bots) {
        const double p = prior(*b, shape);
        const double s = score(message, *b, overall_centroid, shape);
        out.push_back(RankedBot{b->bot_id, s, p, s / p});
    }
    std::sort(out.begin(), out.end(), [](const RankedBot& a, const RankedBot& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.bot_id < b.bot_id;
    });
    return out;
}

std::vector<BotId> select_bots(const std::vector<RankedBot>& ranked, std::mt19937_64& rng, int n_random) {
    std::vector<BotId> out;
    if (ranked.empty()) return out;
    out.push_back(ranked.front().bot_id);
    std::vector<std::size_t> rest;
    for (std::size_t i = 1; i < ranked.size(); ++i) rest.push_back(i);
    // Partial Fisher-Yates: the first n slots become a uniform draw without replacement.
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(n_random, 0)), rest.size());
    for (std::size_t k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, rest.size() - 1);
        std::swap(rest[k], rest[pick(rng)]);
        out.push_back(ranked[rest[k]].bot_id);
    }
    return out;
}

BotSelector::BotSelector(std::shared_ptr<const VectorTable> table, BetaShape shape, SeenCountMode mode)
    : table_(std::move(table)), shape_(shape), mode_(mode), overall_(table_ ? table_->dimension() : 0) {
    if (!table_) throw ValidationError("selector needs a vector table");
    shape_.validate();
}

const BotProfile& BotSelector::register_bot(const BotId& id, const std::vector<std::string>& example_messages,
                                            Timestamp online_since) {
    if (profiles_.count(id)) throw ValidationError("duplicate bot id: " + id);
    auto [it, _] = profiles_.emplace(id, crowdbot::register_bot(id, example_messages, *table_, online_since));
    return it->second;
}

const BotProfile& BotSelector::profile(const BotId& id) const {
    auto it = profiles_.find(id);
    if (it == profiles_.end()) throw NotFound("unknown bot " + id);
    return it->second;
}

BotProfile& BotSelector::mutable_profile(const BotId& id) {
    auto it = profiles_.find(id);
    if (it == profiles_.end()) throw NotFound("unknown bot " + id);
    return it->second;
}

std::vector<BotId> BotSelector::bot_ids() const {
    std::vector<BotId> ids;
    for (const auto& [id, _] : profiles_) ids.push_back(id);
    return ids;
}

void BotSelector::observe_user_message(std::string_view text) { overall_.add(embed_message(text, *table_)); }

void BotSelector::tick_seen(const BotId& id) { ++mutable_profile(id).seen_count; }

void BotSelector::apply_outcome(const BotId& id, std::string_view user_message, bool count_seen, bool accepted) {
    BotProfile& p = mutable_profile(id);
    if (count_seen) ++p.seen_count;
    if (accepted) record_acceptance(p, user_message, *table_);
}

std::vector<RankedBot> BotSelector::rank(std::string_view text) const {
    std::vector<const BotProfile*> bots;
    for (const auto& [_, p] : profiles_) bots.push_back(&p);
    return rank_bots(embed_message(text, *table_), bots, overall_.mean(), shape_);
}

nlohmann::json BotSelector::dump() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, p] : profiles_) {
        const MessageVector c = p.centroid();
        double norm = 0.0;
        for (double x : c.values) norm += x * x;
        out.push_back({{"bot_id", id},
                       {"prior", prior(p, shape_)},
                       {"accepted_count", p.accepted_count},
                       {"seen_count", p.seen_count},
                       {"examples", p.example_messages.size()},
                       {"successes", p.success_messages.size()},
                       {"zero_dist_mode", p.zero_dist_mode()},
                       {"centroid_norm", std::sqrt(norm)}});
    }
    return out;
}

}  // namespace crowdbot
