#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbot/conversation.hpp"
#include "crowdbot/embedding.hpp"
#include "crowdbot/event_log.hpp"
#include "json.hpp"

namespace crowdbot {

/// Version 1 layout (12 + 2d values):
///   0 token count            1 character length        2 distinct tokens
///   3 question-mark flag      4 URL flag
///   5 accepted in turn        6 non-accepted in turn    7 ordinal in turn
///   8 turn index              9 accepted in conversation
///  10 proposer acceptance rate (0.5 with no history)
///  11 proposer non-accepted count
///  12..12+d   message mean vector
///  12+d..12+2d last user message mean vector
inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr std::size_t kScalarFeatureCount = 12;

/// Raw-matrix models (no message schema) carry this version.
inline constexpr int kRawSchemaVersion = 0;

struct FeatureVector {
    int schema_version = kFeatureSchemaVersion;
    std::vector<double> values;
};

std::vector<std::string> feature_names(std::size_t embedding_dim);

/// Uses only records that precede the message's proposal in the log, so
/// later events never change the result.
FeatureVector featurize(const Message& msg, const Conversation& conv, const VectorTable& table);

enum class VoteLabel { Upvote, Downvote };
enum class LabelClass { Upvote, Downvote, Excluded };

/// Training-label rule for one terminal message:
///   Downvote: expired worker message with at least one downvote
///   Upvote:   accepted worker message with >= 1 upvote and no downvote,
///             unless it was accepted on the proposer's own vote because
///             threshold * active_workers < 1
///   Excluded: everything else, including every bot-origin message.
LabelClass classify_for_training(const Message& msg, const PhaseConfig& phase);

struct LabeledExample {
    FeatureVector features;
    VoteLabel label = VoteLabel::Upvote;
    ConversationId conversation;
    MessageId message;
};

struct LabelExtraction {
    std::vector<LabeledExample> examples;
    std::size_t upvote = 0;
    std::size_t downvote = 0;
    std::size_t excluded = 0;
};

/// Non-user messages of every log land in exactly one of the three buckets.
LabelExtraction extract_training_labels(const std::vector<std::vector<Event>>& logs, const VectorTable& table);

struct VoteClassifierModel {
    int schema_version = kFeatureSchemaVersion;
    std::size_t feature_count = 0;
    std::vector<double> weights;
    double bias = 0.0;
    double l2_lambda = 0.0;
    std::vector<double> mean;
    std::vector<double> stddev;
    double confidence_threshold = 0.7;
};

struct TrainOptions {
    double l2_lambda = 1e-3;
    int epochs = 1000;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

/// Mean logistic loss plus (lambda/2)|w|^2 (bias unpenalized), with its
/// analytic gradient. `labels` are 1 for Upvote, 0 for Downvote.
LossGradient logistic_loss_gradient(std::span<const double> w, double b, const std::vector<std::vector<double>>& rows,
                                    const std::vector<int>& labels, double lambda);

/// Standardizes with training statistics, then runs seeded full-batch
/// gradient descent. Throws ValidationError unless both classes appear.
VoteClassifierModel train_matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                 const TrainOptions& options, int schema_version = kRawSchemaVersion);
VoteClassifierModel train(const std::vector<LabeledExample>& examples, const TrainOptions& options);

/// P(Upvote). Throws ValidationError on a schema/length mismatch.
double predict_confidence(const VoteClassifierModel& model, std::span<const double> raw_features);
double predict_confidence(const VoteClassifierModel& model, const FeatureVector& features);

enum class VoteDecision { Upvote, Abstain };

/// The vote bot never downvotes and never votes on bot-origin messages, on
/// re-sent candidates the same worker already failed with, or twice.
VoteDecision maybe_vote(const VoteClassifierModel& model, const Message& msg, const Conversation& conv,
                        const VectorTable& table, std::string_view vote_bot_id = "vote-bot");

struct ClassReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvaluationReport {
    ClassReport upvote;
    ClassReport downvote;
};

/// Predicted Upvote iff confidence >= model.confidence_threshold.
EvaluationReport evaluate(const VoteClassifierModel& model, const std::vector<LabeledExample>& examples);
ClassReport class_report(std::size_t tp, std::size_t fp, std::size_t fn);

void to_json(nlohmann::json& j, const VoteClassifierModel& m);
void from_json(const nlohmann::json& j, VoteClassifierModel& m);
void save_model(const std::filesystem::path& path, const VoteClassifierModel& m);
VoteClassifierModel load_model(const std::filesystem::path& path);

}  // namespace crowdbot
