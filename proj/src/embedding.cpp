#include "crowdbot/embedding.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "crowdbot/errors.hpp"

namespace crowdbot {

namespace {

// Byte length of a whitespace code point starting at text[i], or 0.
std::size_t whitespace_at(std::string_view text, std::size_t i) {
    const auto b = [&](std::size_t k) { return static_cast<unsigned char>(text[i + k]); };
    const std::size_t left = text.size() - i;
    const unsigned char c = b(0);
    if (c == ' ' || (c >= 0x09 && c <= 0x0D)) return 1;
    if (left >= 2 && c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
    if (left >= 3) {
        if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;                  // U+1680
        if (c == 0xE2 && b(1) == 0x80 && (b(2) <= 0x8A || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF)) return 3;
        if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;                  // U+205F
        if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;                  // U+3000
    }
    return 0;
}

bool is_ascii_punct(char c) {
    return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c));
}

std::string normalize(std::string_view raw) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && is_ascii_punct(raw[b])) ++b;
    while (e > b && is_ascii_punct(raw[e - 1])) --e;
    std::string out(raw.substr(b, e - b));
    for (char& ch : out) {
        if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    std::size_t i = 0;
    auto flush = [&](std::size_t end) {
        if (end > start) {
            std::string t = normalize(text.substr(start, end - start));
            if (!t.empty()) tokens.push_back(std::move(t));
        }
    };
    while (i < text.size()) {
        if (std::size_t w = whitespace_at(text, i)) {
            flush(i);
            i += w;
            start = i;
        } else {
            ++i;
        }
    }
    flush(text.size());
    return tokens;
}

bool VectorTable::add(std::string_view token, std::vector<double> values) {
    if (dimension_ == 0) dimension_ = values.size();
    if (values.size() != dimension_ || dimension_ == 0) {
        throw ValidationError("vector dimension " + std::to_string(values.size()) + " does not match table dimension " +
                              std::to_string(dimension_));
    }
    std::string key = normalize(token);
    if (key.empty() || index_.count(key)) return false;
    index_.emplace(std::move(key), data_.size() / dimension_);
    data_.insert(data_.end(), values.begin(), values.end());
    return true;
}

const double* VectorTable::find(std::string_view token) const {
    auto it = index_.find(normalize(token));
    return it == index_.end() ? nullptr : data_.data() + it->second * dimension_;
}

VectorTable load_vectors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vector file: " + path.string());
    VectorTable table;
    std::string line;
    std::uint64_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (!rest.empty()) {
            auto b = rest.find_first_not_of(" \t");
            if (b == std::string_view::npos) break;
            rest.remove_prefix(b);
            auto e = rest.find_first_of(" \t");
            fields.push_back(rest.substr(0, e));
            rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
        }
        if (fields.size() < 2) throw FormatError("vector line needs a token and at least one value", line_no);
        std::vector<double> values;
        values.reserve(fields.size() - 1);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(fields[k].data(), fields[k].data() + fields[k].size(), v);
            if (ec != std::errc() || ptr != fields[k].data() + fields[k].size()) {
                throw FormatError("bad number '" + std::string(fields[k]) + "'", line_no);
            }
            values.push_back(v);
        }
        if (dim == 0) dim = values.size();
        if (values.size() != dim) {
            throw FormatError("expected " + std::to_string(dim) + " values, got " + std::to_string(values.size()),
                              line_no);
        }
        table.add(fields[0], std::move(values));
    }
    if (table.size() == 0) throw FormatError("vector file is empty", line_no);
    return table;
}

MessageVector embed_message(std::string_view text, const VectorTable& table) {
    MessageVector out = MessageVector::zeros(table.dimension());
    for (const auto& token : tokenize(text)) {
        const double* v = table.find(token);
        if (!v) continue;
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += v[i];
        ++out.token_count;
    }
    if (out.token_count > 0) {
        for (double& x : out.values) x /= static_cast<double>(out.token_count);
    }
    return out;
}

double distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ValidationError("dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double distance(const MessageVector& u, const MessageVector& v) { return distance(u.values, v.values); }

double similarity_ratio(const MessageVector& msg, const MessageVector& bot_centroid,
                        const MessageVector& overall_centroid, bool zero_dist_mode) {
    const double to_overall = distance(msg, overall_centroid);
    const double to_bot = zero_dist_mode ? 0.0 : distance(msg, bot_centroid);
    const double denom = to_bot + to_overall;
    if (denom == 0.0) return 0.5;
    return to_overall / denom;
}

void Centroid::add(const MessageVector& v) {
    if (v.is_empty()) return;
    if (sum_.empty()) sum_.assign(v.dimension(), 0.0);
    if (v.dimension() != sum_.size()) throw ValidationError("centroid dimension mismatch");
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += v.values[i];
    ++count_;
}

MessageVector Centroid::mean() const {
    MessageVector out{sum_, count_};
    if (count_ > 0) {
        for (double& x : out.values) x /= static_cast<double>(count_);
    }
    return out;
}

}  // namespace crowdbot
