#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbot/types.hpp"
#include "json.hpp"

namespace crowdbot {

namespace event_kind {
inline constexpr std::string_view ConversationOpened = "conversation_opened";
inline constexpr std::string_view ConversationClosed = "conversation_closed";
inline constexpr std::string_view WorkerJoined = "worker_joined";
inline constexpr std::string_view WorkerLeft = "worker_left";
inline constexpr std::string_view UserMessage = "user_message";
inline constexpr std::string_view MessageProposed = "message_proposed";
inline constexpr std::string_view MessageAccepted = "message_accepted";
inline constexpr std::string_view MessageExpired = "message_expired";
inline constexpr std::string_view VoteCast = "vote_cast";
inline constexpr std::string_view PointsUpdate = "points_update";
inline constexpr std::string_view FactAdded = "fact_added";
inline constexpr std::string_view BotDeclined = "bot_declined";
inline constexpr std::string_view SelectorSeen = "selector_seen";
inline constexpr std::string_view SelectorOutcome = "selector_outcome";
}  // namespace event_kind

/// One record of the append-only log: {seq, ts, kind, payload}.
struct Event {
    std::uint64_t seq = 0;
    Timestamp ts{0};
    std::string kind;
    nlohmann::json payload;

    friend bool operator==(const Event&, const Event&) = default;
};

std::string serialize(const Event& e);
/// Parses one line. `line_no` is reported in the FormatError on failure.
Event parse_event(std::string_view line, std::uint64_t line_no);

/// Reads a line-delimited log file. Sequence numbers must be strictly increasing.
std::vector<Event> read_log(const std::filesystem::path& path);
void write_log(const std::filesystem::path& path, const std::vector<Event>& events);

/// Append-only event log. Every record is handed to the sink (and the sink
/// must have returned) before append() returns, so callers can apply the
/// effect only after the record is durable.
class EventLog {
public:
    using Sink = std::function<void(const std::string& line)>;
    using Listener = std::function<void(const Event&)>;

    EventLog() = default;
    explicit EventLog(Sink sink) : sink_(std::move(sink)) {}

    /// Opens (or creates) a log file; existing records are loaded and new
    /// ones are appended and flushed one line at a time.
    static EventLog open_file(const std::filesystem::path& path);

    Event append(Timestamp ts, std::string_view kind, nlohmann::json payload);

    /// Adopts already-persisted records (used when replaying).
    void adopt(std::vector<Event> events);

    const std::vector<Event>& events() const { return events_; }
    std::uint64_t next_seq() const { return next_seq_; }
    std::size_t size() const { return events_.size(); }

    /// Called after each successful append.
    void set_listener(Listener l) { listener_ = std::move(l); }

private:
    Sink sink_;
    Listener listener_;
    std::vector<Event> events_;
    std::uint64_t next_seq_ = 1;
};

}  // namespace crowdbot
