#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crowdbot {

/// Lowercases ASCII, splits on (Unicode) whitespace and strips leading and
/// trailing ASCII punctuation from each token. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Immutable token -> vector table in the GloVe text layout.
class VectorTable {
public:
    static constexpr std::string_view kNormalization = "ascii-lower/unicode-ws/strip-punct";

    explicit VectorTable(std::size_t dimension = 0) : dimension_(dimension) {}

    /// Adds a token; later duplicates of the same (normalized) token are ignored.
    /// Returns false on duplicates. Throws ValidationError on a dimension mismatch.
    bool add(std::string_view token, std::vector<double> values);

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return index_.size(); }
    /// nullptr when the token is out of vocabulary. Lookup is case-folded.
    const double* find(std::string_view token) const;

private:
    std::size_t dimension_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> data_;
};

/// GloVe text format: `token v1 v2 ... vd` per line. The first line fixes d.
VectorTable load_vectors(const std::filesystem::path& path);

struct MessageVector {
    std::vector<double> values;
    std::size_t token_count = 0;

    bool is_empty() const { return token_count == 0; }
    std::size_t dimension() const { return values.size(); }

    static MessageVector zeros(std::size_t d) { return MessageVector{std::vector<double>(d, 0.0), 0}; }

    friend bool operator==(const MessageVector&, const MessageVector&) = default;
};

/// Mean of the in-vocabulary token vectors.
MessageVector embed_message(std::string_view text, const VectorTable& table);

/// Euclidean distance. Throws ValidationError on a dimension mismatch.
double distance(std::span<const double> u, std::span<const double> v);
double distance(const MessageVector& u, const MessageVector& v);

/// dist(msg, overall) / (dist(msg, bot) + dist(msg, overall)).
/// In zero-distance mode dist(msg, bot) is taken as 0. A 0/0 ratio is 0.5.
double similarity_ratio(const MessageVector& msg, const MessageVector& bot_centroid,
                        const MessageVector& overall_centroid, bool zero_dist_mode);

/// Running mean over non-empty message vectors.
class Centroid {
public:
    explicit Centroid(std::size_t d = 0) : sum_(d, 0.0) {}

    void add(const MessageVector& v);
    std::size_t count() const { return count_; }
    MessageVector mean() const;

private:
    std::vector<double> sum_;
    std::size_t count_ = 0;
};

}  // namespace crowdbot
