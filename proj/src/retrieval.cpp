#include "crowdbot/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crowdbot/conversation.hpp"
#include "crowdbot/errors.hpp"

namespace crowdbot {

std::vector<QueryResponsePair> extract_pairs(const std::vector<Event>& log, const ExtractionOptions& options) {
    const auto conversations = replay_conversations(log);
    std::vector<QueryResponsePair> out;
    for (const auto& [id, conv] : conversations) {
        if (options.blocked_ids.count(conv.user_id())) continue;
        for (const auto& m : conv.messages()) {
            if (m.role != Role::Worker || m.state != MessageState::Accepted) continue;
            if (m.downvotes() != 0 || options.blocked_ids.count(m.author)) continue;
            std::string query = conv.query_text_for(m);
            if (query.empty()) continue;
            out.push_back(QueryResponsePair{std::move(query), {}, m.text, options.source_prefix + std::to_string(id.value),
                                            m.upvotes(), 0});
        }
    }
    return out;
}

PairStore build_store(std::vector<QueryResponsePair> pairs, const VectorTable& table) {
    PairStore store;
    store.dimension = table.dimension();
    for (auto& p : pairs) {
        p.query_vector = embed_message(p.query, table);
        if (p.query_vector.is_empty()) {
            ++store.dropped_empty;
            continue;
        }
        store.pairs.push_back(std::move(p));
    }
    return store;
}

std::vector<std::size_t> nearest_pairs(const MessageVector& query, const PairStore& store, std::size_t k) {
    std::vector<double> dist(store.pairs.size());
    for (std::size_t i = 0; i < store.pairs.size(); ++i) dist[i] = distance(query, store.pairs[i].query_vector);
    std::vector<std::size_t> idx(store.pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t n = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
    idx.resize(n);
    return idx;
}

std::optional<std::string> retrieve(const MessageVector& message, const PairStore& store, std::size_t k,
                                    std::mt19937_64& rng) {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (store.pairs.empty() || message.is_empty()) return std::nullopt;
    const auto top = nearest_pairs(message, store, k);
    std::uniform_int_distribution<std::size_t> pick(0, top.size() - 1);
    return store.pairs[top[pick(rng)]].response;
}

std::optional<std::string> retrieve(std::string_view message, const PairStore& store, const VectorTable& table,
                                    std::size_t k, std::mt19937_64& rng) {
    return retrieve(embed_message(message, table), store, k, rng);
}

std::string format_pairs(const std::vector<QueryResponsePair>& pairs, const nlohmann::json& provenance) {
    std::ostringstream out;
    if (!provenance.empty()) out << nlohmann::json{{"provenance", provenance}}.dump() << '\n';
    for (const auto& p : pairs) {
        nlohmann::json j = {{"query", p.query},
                            {"response", p.response},
                            {"votes", {{"up", p.upvote_count}, {"down", p.downvote_count}}},
                            {"source", p.source}};
        out << j.dump() << '\n';
    }
    return out.str();
}

void save_pairs(const std::filesystem::path& path, const std::vector<QueryResponsePair>& pairs,
                const nlohmann::json& provenance) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write pair file: " + path.string());
    out << format_pairs(pairs, provenance);
}

std::vector<QueryResponsePair> parse_pairs(std::istream& in, nlohmann::json* provenance) {
    std::vector<QueryResponsePair> out;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (j.contains("provenance")) {
                if (provenance) *provenance = j["provenance"];
                continue;
            }
            QueryResponsePair p;
            p.query = j.at("query").get<std::string>();
            p.response = j.at("response").get<std::string>();
            p.source = j.value("source", std::string());
            if (j.contains("votes")) {
                p.upvote_count = j["votes"].value("up", 0);
                p.downvote_count = j["votes"].value("down", 0);
            }
            if (p.downvote_count != 0) throw FormatError("stored pairs must carry zero downvotes", line_no);
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("bad pair record: ") + ex.what(), line_no);
        }
    }
    return out;
}

std::vector<QueryResponsePair> load_pairs(const std::filesystem::path& path, nlohmann::json* provenance) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open pair file: " + path.string());
    return parse_pairs(in, provenance);
}

PairStore load_store(const std::filesystem::path& path, const VectorTable& table) {
    nlohmann::json provenance = nlohmann::json::object();
    PairStore store = build_store(load_pairs(path, &provenance), table);
    store.provenance = provenance;
    return store;
}

}  // namespace crowdbot
