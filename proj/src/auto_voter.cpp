#include "crowdbot/auto_voter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "crowdbot/errors.hpp"

namespace crowdbot {

std::vector<std::string> feature_names(std::size_t embedding_dim) {
    std::vector<std::string> names = {"token_count",        "char_length",          "distinct_tokens",
                                      "has_question",       "has_url",              "turn_accepted",
                                      "turn_not_accepted",  "turn_ordinal",         "turn_index",
                                      "conv_accepted",      "proposer_accept_rate", "proposer_not_accepted"};
    for (std::size_t i = 0; i < embedding_dim; ++i) names.push_back("msg_vec_" + std::to_string(i));
    for (std::size_t i = 0; i < embedding_dim; ++i) names.push_back("user_vec_" + std::to_string(i));
    return names;
}

namespace {

std::size_t codepoints(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool has_url(std::string_view s) {
    return s.find("http://") != std::string_view::npos || s.find("https://") != std::string_view::npos ||
           s.find("www.") != std::string_view::npos;
}

// Accepted strictly before log position `seq`.
bool accepted_before(const Message& m, std::uint64_t seq) {
    return m.state == MessageState::Accepted && m.resolved_seq && *m.resolved_seq < seq;
}

double sigmoid(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

FeatureVector featurize(const Message& msg, const Conversation& conv, const VectorTable& table) {
    const std::uint64_t asof = msg.created_seq;
    const auto tokens = tokenize(msg.text);
    const std::set<std::string> distinct(tokens.begin(), tokens.end());

    double turn_accepted = 0, turn_not_accepted = 0;
    double conv_accepted = 0;
    double proposer_total = 0, proposer_accepted = 0;
    const Message* last_user = nullptr;
    for (const auto& m : conv.messages()) {
        if (m.created_seq >= asof) break;
        if (m.role == Role::User) {
            last_user = &m;
            continue;
        }
        const bool acc = accepted_before(m, asof);
        if (m.turn == msg.turn) (acc ? turn_accepted : turn_not_accepted) += 1;
        if (acc) conv_accepted += 1;
        if (m.author == msg.author) {
            proposer_total += 1;
            if (acc) proposer_accepted += 1;
        }
    }

    FeatureVector f;
    f.values.reserve(kScalarFeatureCount + 2 * table.dimension());
    f.values.push_back(static_cast<double>(tokens.size()));
    f.values.push_back(static_cast<double>(codepoints(msg.text)));
    f.values.push_back(static_cast<double>(distinct.size()));
    f.values.push_back(msg.text.find('?') != std::string::npos ? 1.0 : 0.0);
    f.values.push_back(has_url(msg.text) ? 1.0 : 0.0);
    f.values.push_back(turn_accepted);
    f.values.push_back(turn_not_accepted);
    f.values.push_back(turn_accepted + turn_not_accepted + 1.0);
    f.values.push_back(static_cast<double>(msg.turn));
    f.values.push_back(conv_accepted);
    f.values.push_back(proposer_total > 0 ? proposer_accepted / proposer_total : 0.5);
    f.values.push_back(proposer_total - proposer_accepted);

    const MessageVector mv = embed_message(msg.text, table);
    f.values.insert(f.values.end(), mv.values.begin(), mv.values.end());
    const MessageVector uv = last_user ? embed_message(last_user->text, table) : MessageVector::zeros(table.dimension());
    f.values.insert(f.values.end(), uv.values.begin(), uv.values.end());
    return f;
}

LabelClass classify_for_training(const Message& msg, const PhaseConfig& phase) {
    if (msg.role != Role::Worker) return LabelClass::Excluded;
    if (msg.state == MessageState::Expired && msg.downvotes() >= 1) return LabelClass::Downvote;
    if (msg.state == MessageState::Accepted && msg.upvotes() >= 1 && msg.downvotes() == 0) {
        if (phase.weights.threshold * msg.active_workers < 1.0) return LabelClass::Excluded;
        return LabelClass::Upvote;
    }
    return LabelClass::Excluded;
}

LabelExtraction extract_training_labels(const std::vector<std::vector<Event>>& logs, const VectorTable& table) {
    LabelExtraction out;
    for (const auto& log : logs) {
        for (const auto& [id, conv] : replay_conversations(log)) {
            for (const auto& m : conv.messages()) {
                if (m.role == Role::User) continue;
                switch (classify_for_training(m, conv.phase())) {
                    case LabelClass::Excluded: ++out.excluded; break;
                    case LabelClass::Upvote:
                        ++out.upvote;
                        out.examples.push_back({featurize(m, conv, table), VoteLabel::Upvote, id, m.id});
                        break;
                    case LabelClass::Downvote:
                        ++out.downvote;
                        out.examples.push_back({featurize(m, conv, table), VoteLabel::Downvote, id, m.id});
                        break;
                }
            }
        }
    }
    return out;
}

LossGradient logistic_loss_gradient(std::span<const double> w, double b, const std::vector<std::vector<double>>& rows,
                                    const std::vector<int>& labels, double lambda) {
    LossGradient out;
    out.grad_w.assign(w.size(), 0.0);
    const double n = static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double z = b;
        for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * rows[i][k];
        // log(1 + e^z) - y z, computed stably.
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        out.loss += softplus - labels[i] * z;
        const double r = sigmoid(z) - labels[i];
        for (std::size_t k = 0; k < w.size(); ++k) out.grad_w[k] += r * rows[i][k];
        out.grad_b += r;
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        out.grad_w[k] = out.grad_w[k] / n + lambda * w[k];
        sq += w[k] * w[k];
    }
    out.grad_b /= n;
    out.loss = out.loss / n + 0.5 * lambda * sq;
    return out;
}

VoteClassifierModel train_matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                 const TrainOptions& options, int schema_version) {
    if (rows.empty() || rows.size() != labels.size()) throw ValidationError("training set is empty or mislabeled");
    const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg) throw ValidationError("training needs at least one example of each class");
    const std::size_t dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != dim) throw ValidationError("ragged feature rows");
    }
    if (options.epochs < 0 || !(options.learning_rate > 0.0) || options.l2_lambda < 0.0) {
        throw ValidationError("bad training options");
    }

    VoteClassifierModel model;
    model.schema_version = schema_version;
    model.feature_count = dim;
    model.l2_lambda = options.l2_lambda;
    model.mean.assign(dim, 0.0);
    model.stddev.assign(dim, 0.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < dim; ++k) model.mean[k] += r[k] / n;
    }
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < dim; ++k) model.stddev[k] += (r[k] - model.mean[k]) * (r[k] - model.mean[k]) / n;
    }
    for (double& s : model.stddev) {
        s = std::sqrt(s);
        if (s < 1e-12) s = 1.0;
    }
    std::vector<std::vector<double>> z(rows.size(), std::vector<double>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < dim; ++k) z[i][k] = (rows[i][k] - model.mean[k]) / model.stddev[k];
    }

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> init(0.0, 0.01);
    model.weights.resize(dim);
    for (double& w : model.weights) w = init(rng);
    model.bias = 0.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const auto g = logistic_loss_gradient(model.weights, model.bias, z, labels, options.l2_lambda);
        for (std::size_t k = 0; k < dim; ++k) model.weights[k] -= options.learning_rate * g.grad_w[k];
        model.bias -= options.learning_rate * g.grad_b;
    }
    return model;
}

VoteClassifierModel train(const std::vector<LabeledExample>& examples, const TrainOptions& options) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (const auto& e : examples) {
        if (e.features.schema_version != kFeatureSchemaVersion) throw ValidationError("feature schema mismatch");
        rows.push_back(e.features.values);
        labels.push_back(e.label == VoteLabel::Upvote ? 1 : 0);
    }
    return train_matrix(rows, labels, options, kFeatureSchemaVersion);
}

double predict_confidence(const VoteClassifierModel& model, std::span<const double> raw_features) {
    if (raw_features.size() != model.feature_count || model.weights.size() != model.feature_count) {
        throw ValidationError("feature length " + std::to_string(raw_features.size()) + " does not match model (" +
                              std::to_string(model.feature_count) + ")");
    }
    double z = model.bias;
    for (std::size_t k = 0; k < raw_features.size(); ++k) {
        z += model.weights[k] * (raw_features[k] - model.mean[k]) / model.stddev[k];
    }
    double p = sigmoid(z);
    if (p >= 1.0) p = std::nextafter(1.0, 0.0);
    if (p <= 0.0) p = std::numeric_limits<double>::denorm_min();
    return p;
}

double predict_confidence(const VoteClassifierModel& model, const FeatureVector& features) {
    if (features.schema_version != model.schema_version) {
        throw ValidationError("feature schema v" + std::to_string(features.schema_version) + " vs model schema v" +
                              std::to_string(model.schema_version));
    }
    return predict_confidence(model, std::span<const double>(features.values));
}

VoteDecision maybe_vote(const VoteClassifierModel& model, const Message& msg, const Conversation& conv,
                        const VectorTable& table, std::string_view vote_bot_id) {
    if (msg.state != MessageState::Proposed || msg.role != Role::Worker) return VoteDecision::Abstain;
    if (msg.has_vote_from(vote_bot_id)) return VoteDecision::Abstain;
    for (const auto& m : conv.messages()) {
        if (m.created_seq >= msg.created_seq) break;
        if (m.author == msg.author && m.role == Role::Worker && m.text == msg.text &&
            m.state != MessageState::Accepted) {
            return VoteDecision::Abstain;
        }
    }
    const double confidence = predict_confidence(model, featurize(msg, conv, table));
    return confidence >= model.confidence_threshold ? VoteDecision::Upvote : VoteDecision::Abstain;
}

ClassReport class_report(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassReport r;
    r.support = tp + fn;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

EvaluationReport evaluate(const VoteClassifierModel& model, const std::vector<LabeledExample>& examples) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& e : examples) {
        const bool predicted_up = predict_confidence(model, e.features) >= model.confidence_threshold;
        const bool actual_up = e.label == VoteLabel::Upvote;
        if (predicted_up && actual_up) ++tp;
        else if (predicted_up) ++fp;
        else if (actual_up) ++fn;
        else ++tn;
    }
    return {class_report(tp, fp, fn), class_report(tn, fn, fp)};
}

void to_json(nlohmann::json& j, const VoteClassifierModel& m) {
    j = {{"schema_version", m.schema_version},
         {"feature_count", m.feature_count},
         {"weights", m.weights},
         {"bias", m.bias},
         {"l2_lambda", m.l2_lambda},
         {"mean", m.mean},
         {"stddev", m.stddev},
         {"confidence_threshold", m.confidence_threshold}};
}

void from_json(const nlohmann::json& j, VoteClassifierModel& m) {
    j.at("schema_version").get_to(m.schema_version);
    j.at("feature_count").get_to(m.feature_count);
    j.at("weights").get_to(m.weights);
    j.at("bias").get_to(m.bias);
    m.l2_lambda = j.value("l2_lambda", 0.0);
    j.at("mean").get_to(m.mean);
    j.at("stddev").get_to(m.stddev);
    m.confidence_threshold = j.value("confidence_threshold", 0.7);
    if (m.weights.size() != m.feature_count || m.mean.size() != m.feature_count ||
        m.stddev.size() != m.feature_count) {
        throw ValidationError("model vectors disagree with feature_count");
    }
}

void save_model(const std::filesystem::path& path, const VoteClassifierModel& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write model: " + path.string());
    out << nlohmann::json(m).dump(2) << '\n';
}

VoteClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model: " + path.string());
    try {
        return nlohmann::json::parse(in).get<VoteClassifierModel>();
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("bad model file: ") + ex.what(), 1);
    }
}

}  // namespace crowdbot
