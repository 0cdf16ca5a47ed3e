#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "crowdbot/bot_selector.hpp"
#include "crowdbot/orchestrator.hpp"
#include "crowdbot/registry.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace crowdbot {

/// Service configuration file (JSON):
///   host, port, log_path, phase (preset name or object), rewards,
///   embedding_path, registry_path, model_path, seed, bot_deadline_ms,
///   seen_count_mode ("per_user_message" | "per_invocation"),
///   prior_mean, prior_stddev, tick_interval_ms
/// Relative paths resolve against the config file's directory.
struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path log_path = "events.jsonl";
    PhaseConfig phase = PhaseConfig::phase2();
    RewardSchema rewards;
    std::optional<std::filesystem::path> embedding_path;
    std::optional<std::filesystem::path> registry_path;
    std::optional<std::filesystem::path> model_path;
    std::uint64_t seed = 0;
    int bot_deadline_ms = 5000;
    SeenCountMode seen_count_mode = SeenCountMode::PerUserMessage;
    double prior_mean = 0.3;
    double prior_stddev = 0.05;
    int tick_interval_ms = 100;

    void validate() const;
};

ServiceConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ServiceConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& c);

SeenCountMode seen_count_mode_from_string(const std::string& s);
std::string to_string(SeenCountMode m);

/// Embedding table, bots, selector and model built from a config.
struct Runtime {
    std::shared_ptr<const VectorTable> table;
    BotRegistry registry;
    std::shared_ptr<BotSelector> selector;
    std::shared_ptr<const VoteClassifierModel> model;
};

Runtime build_runtime(const ServiceConfig& config);

/// Raised for malformed or unknown command frames.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Event kinds broadcast to clients.
bool is_client_event(std::string_view kind);

/// Thread-safe front of an Orchestrator: every command and tick runs under
/// one mutex, except bot calls, which run unlocked between prepare and
/// apply.
class Service {
public:
    Service(Orchestrator orchestrator, PhaseConfig phase, Clock clock, std::chrono::milliseconds bot_deadline);
    ~Service();

    /// Executes one client command frame {"type": ..., ...}. Throws
    /// ProtocolError for bad frames and crowdbot::Error for rejected commands.
    nlohmann::json handle_command(const nlohmann::json& frame);

    /// Client events with seq > since; blocks up to `wait` for new ones.
    std::vector<Event> events_since(std::uint64_t since, std::chrono::milliseconds wait,
                                    std::optional<std::uint64_t> conversation = std::nullopt);

    /// Closes idle conversations and runs every due tick.
    void tick();

    nlohmann::json snapshot() const;
    nlohmann::json conversation_json(std::uint64_t id) const;
    nlohmann::json metrics_json() const;
    std::string ledger_dsv() const;

    /// Binds and serves until stop(). Returns false when binding fails.
    /// Port 0 binds an ephemeral port (see port()).
    bool listen(const std::string& host, int port, int tick_interval_ms = 100);
    /// Binds without blocking; serve_forever() must be called afterwards.
    int bind(const std::string& host, int port);
    void serve_forever(int tick_interval_ms = 100);
    void stop();
    int port() const { return port_; }
    bool running() const;

private:
    void install_routes();
    void notify();

    mutable std::mutex mu_;
    std::condition_variable cv_;
    Orchestrator orch_;
    PhaseConfig phase_;
    Clock clock_;
    std::chrono::milliseconds bot_deadline_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<bool> stopping_{false};
    int port_ = 0;
};

/// Loads config, restores state from the log and serves. Throws on invalid
/// config or bind failure.
void serve(const ServiceConfig& config);

Clock system_clock();

}  // namespace crowdbot
