#include "crowdbot/event_log.hpp"

#include <fstream>
#include <iterator>
#include <memory>

#include "crowdbot/errors.hpp"

namespace crowdbot {

std::string serialize(const Event& e) {
    nlohmann::json j = {{"seq", e.seq}, {"ts", e.ts.count()}, {"kind", e.kind}, {"payload", e.payload}};
    return j.dump();
}

Event parse_event(std::string_view line, std::uint64_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(std::string("unparseable event record: ") + ex.what(), line_no);
    }
    if (!j.is_object() || !j.contains("seq") || !j.contains("ts") || !j.contains("kind") ||
        !j["seq"].is_number_unsigned() || !j["ts"].is_number_integer() || !j["kind"].is_string()) {
        throw FormatError("event record missing seq/ts/kind", line_no);
    }
    Event e;
    e.seq = j["seq"].get<std::uint64_t>();
    e.ts = Timestamp{j["ts"].get<std::int64_t>()};
    e.kind = j["kind"].get<std::string>();
    e.payload = j.value("payload", nlohmann::json::object());
    return e;
}

std::vector<Event> read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open event log: " + path.string());
    std::vector<Event> out;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Event e = parse_event(line, line_no);
        if (!out.empty() && e.seq <= out.back().seq) {
            throw CorruptLog("sequence numbers not strictly increasing", e.seq);
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_log(const std::filesystem::path& path, const std::vector<Event>& events) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write event log: " + path.string());
    for (const auto& e : events) out << serialize(e) << '\n';
}

EventLog EventLog::open_file(const std::filesystem::path& path) {
    std::vector<Event> existing;
    if (std::filesystem::exists(path)) {
        // A crash mid-append leaves a torn final line. That record was never
        // acknowledged, so it is dropped before new records are appended.
        std::ifstream raw(path, std::ios::binary);
        const std::string content((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
        raw.close();
        if (!content.empty() && content.back() != '\n') {
            const auto keep = content.find_last_of('\n');
            std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
        }
        existing = read_log(path);
    }
    auto stream = std::make_shared<std::ofstream>(path, std::ios::app);
    if (!*stream) throw Error("cannot open event log for append: " + path.string());
    EventLog log([stream](const std::string& line) {
        *stream << line << '\n';
        stream->flush();
        if (!*stream) throw Error("event log write failed");
    });
    log.adopt(std::move(existing));
    return log;
}

Event EventLog::append(Timestamp ts, std::string_view kind, nlohmann::json payload) {
    Event e{next_seq_, ts, std::string(kind), std::move(payload)};
    if (sink_) sink_(serialize(e));
    ++next_seq_;
    events_.push_back(e);
    if (listener_) listener_(e);
    return e;
}

void EventLog::adopt(std::vector<Event> events) {
    for (auto& e : events) {
        if (e.seq < next_seq_) throw CorruptLog("adopted record out of order", e.seq);
        next_seq_ = e.seq + 1;
        events_.push_back(std::move(e));
    }
}

}  // namespace crowdbot
