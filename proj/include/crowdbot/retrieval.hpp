#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbot/embedding.hpp"
#include "crowdbot/event_log.hpp"
#include "json.hpp"

namespace crowdbot {

struct QueryResponsePair {
    std::string query;
    MessageVector query_vector;
    std::string response;
    std::string source;
    int upvote_count = 0;
    int downvote_count = 0;
};

struct ExtractionOptions {
    /// Users and workers whose messages never enter the corpus.
    std::set<std::string> blocked_ids;
    /// Prefix for the `source` field; the conversation id is appended.
    std::string source_prefix = "conversation:";
};

/// One pair per accepted, downvote-free worker reply, keyed by the user
/// message(s) that opened its turn. Bot replies are never extracted.
std::vector<QueryResponsePair> extract_pairs(const std::vector<Event>& log, const ExtractionOptions& options = {});

struct PairStore {
    std::vector<QueryResponsePair> pairs;
    std::size_t dimension = 0;
    /// Pairs dropped because their query embedded to an empty vector.
    std::size_t dropped_empty = 0;
    nlohmann::json provenance = nlohmann::json::object();
};

/// Embeds each query; pairs with out-of-vocabulary-only queries are dropped.
PairStore build_store(std::vector<QueryResponsePair> pairs, const VectorTable& table);

/// Indices of the k nearest stored queries, ascending distance, ties by
/// insertion order.
std::vector<std::size_t> nearest_pairs(const MessageVector& query, const PairStore& store, std::size_t k);

/// Uniform pick among the k nearest; none for an empty store or message vector.
std::optional<std::string> retrieve(const MessageVector& message, const PairStore& store, std::size_t k,
                                    std::mt19937_64& rng);
std::optional<std::string> retrieve(std::string_view message, const PairStore& store, const VectorTable& table,
                                    std::size_t k, std::mt19937_64& rng);

/// Line-delimited {query, response, votes:{up,down}, source}. A leading
/// {"provenance": ...} record is optional.
void save_pairs(const std::filesystem::path& path, const std::vector<QueryResponsePair>& pairs,
                const nlohmann::json& provenance = nlohmann::json::object());
std::string format_pairs(const std::vector<QueryResponsePair>& pairs,
                         const nlohmann::json& provenance = nlohmann::json::object());
std::vector<QueryResponsePair> parse_pairs(std::istream& in, nlohmann::json* provenance = nullptr);
std::vector<QueryResponsePair> load_pairs(const std::filesystem::path& path, nlohmann::json* provenance = nullptr);
PairStore load_store(const std::filesystem::path& path, const VectorTable& table);

}  // namespace crowdbot
