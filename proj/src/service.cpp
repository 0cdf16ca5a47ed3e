#include "crowdbot/service.hpp"

#include <fstream>
#include <thread>

#include "crowdbot/errors.hpp"
#include "crowdbot/metrics.hpp"
#include "httplib.h"

namespace crowdbot {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <typename T>
T field(const nlohmann::json& frame, const char* name) {
    if (!frame.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
    try {
        return frame.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError(std::string("field '") + name + "' has the wrong type");
    }
}

nlohmann::json event_json(const Event& e) {
    return {{"seq", e.seq}, {"ts", e.ts.count()}, {"kind", e.kind}, {"payload", e.payload}};
}

void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

SeenCountMode seen_count_mode_from_string(const std::string& s) {
    if (s == "per_user_message") return SeenCountMode::PerUserMessage;
    if (s == "per_invocation") return SeenCountMode::PerInvocation;
    throw ValidationError("unknown seen_count_mode '" + s + "'");
}

std::string to_string(SeenCountMode m) {
    return m == SeenCountMode::PerUserMessage ? "per_user_message" : "per_invocation";
}

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) throw ValidationError("port out of range");
    if (bot_deadline_ms < 0) throw ValidationError("bot_deadline_ms must be non-negative");
    if (tick_interval_ms <= 0) throw ValidationError("tick_interval_ms must be positive");
    phase.validate();
    rewards.validate();
    shape_from_moments(prior_mean, prior_stddev);
}

ServiceConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ServiceConfig c;
    try {
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        if (j.contains("log_path")) c.log_path = resolve(base_dir, j["log_path"].get<std::string>());
        else c.log_path = base_dir / c.log_path;
        if (j.contains("phase")) c.phase = j["phase"].get<PhaseConfig>();
        if (j.contains("rewards")) c.rewards = j["rewards"].get<RewardSchema>();
        if (j.contains("embedding_path")) c.embedding_path = resolve(base_dir, j["embedding_path"].get<std::string>());
        if (j.contains("registry_path")) c.registry_path = resolve(base_dir, j["registry_path"].get<std::string>());
        if (j.contains("model_path")) c.model_path = resolve(base_dir, j["model_path"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.bot_deadline_ms = j.value("bot_deadline_ms", c.bot_deadline_ms);
        if (j.contains("seen_count_mode")) {
            c.seen_count_mode = seen_count_mode_from_string(j["seen_count_mode"].get<std::string>());
        }
        c.prior_mean = j.value("prior_mean", c.prior_mean);
        c.prior_stddev = j.value("prior_stddev", c.prior_stddev);
        c.tick_interval_ms = j.value("tick_interval_ms", c.tick_interval_ms);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("bad config: ") + ex.what());
    }
    c.validate();
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(path.string() + ": " + ex.what(), 1);
    }
    return parse_config(j, path.parent_path());
}

nlohmann::json to_json(const ServiceConfig& c) {
    nlohmann::json j = {{"host", c.host},
                        {"port", c.port},
                        {"log_path", c.log_path.string()},
                        {"phase", c.phase},
                        {"rewards", c.rewards},
                        {"seed", c.seed},
                        {"bot_deadline_ms", c.bot_deadline_ms},
                        {"seen_count_mode", to_string(c.seen_count_mode)},
                        {"prior_mean", c.prior_mean},
                        {"prior_stddev", c.prior_stddev},
                        {"tick_interval_ms", c.tick_interval_ms}};
    if (c.embedding_path) j["embedding_path"] = c.embedding_path->string();
    if (c.registry_path) j["registry_path"] = c.registry_path->string();
    if (c.model_path) j["model_path"] = c.model_path->string();
    return j;
}

Runtime build_runtime(const ServiceConfig& config) {
    Runtime rt;
    rt.table = std::make_shared<const VectorTable>(config.embedding_path ? load_vectors(*config.embedding_path)
                                                                         : VectorTable{});
    if (config.registry_path) rt.registry = load_registry(*config.registry_path, rt.table);
    rt.selector = std::make_shared<BotSelector>(rt.table, shape_from_moments(config.prior_mean, config.prior_stddev),
                                                config.seen_count_mode);
    for (const auto& b : rt.registry.bots) rt.selector->register_bot(b.bot->id(), b.examples);
    if (config.model_path) rt.model = std::make_shared<const VoteClassifierModel>(load_model(*config.model_path));
    return rt;
}

bool is_client_event(std::string_view kind) {
    return kind == event_kind::ConversationOpened || kind == event_kind::ConversationClosed ||
           kind == event_kind::WorkerJoined || kind == event_kind::WorkerLeft || kind == event_kind::UserMessage ||
           kind == event_kind::MessageProposed || kind == event_kind::MessageAccepted ||
           kind == event_kind::MessageExpired || kind == event_kind::VoteCast || kind == event_kind::PointsUpdate ||
           kind == event_kind::FactAdded;
}

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<Timestamp>(std::chrono::system_clock::now().time_since_epoch());
    };
}

Service::Service(Orchestrator orchestrator, PhaseConfig phase, Clock clock, std::chrono::milliseconds bot_deadline)
    : orch_(std::move(orchestrator)), phase_(std::move(phase)), clock_(std::move(clock)), bot_deadline_(bot_deadline) {
    phase_.validate();
    if (!clock_) throw ValidationError("service needs a clock");
}

Service::~Service() { stop(); }

void Service::notify() { cv_.notify_all(); }

nlohmann::json Service::handle_command(const nlohmann::json& frame) {
    if (!frame.is_object()) throw ProtocolError("command frame must be an object");
    const auto type = field<std::string>(frame, "type");
    nlohmann::json result = {{"ok", true}};
    {
        std::lock_guard lock(mu_);
        const Timestamp now = clock_();
        auto conv = [&] { return ConversationId{field<std::uint64_t>(frame, "conversation")}; };
        if (type == "open") {
            std::optional<bool> automation;
            if (frame.contains("automation")) automation = field<bool>(frame, "automation");
            result["conversation"] = orch_.open_conversation(field<std::string>(frame, "user"), phase_, automation, now).value;
        } else if (type == "join") {
            orch_.join_worker(conv(), field<std::string>(frame, "worker"), now);
        } else if (type == "user_message") {
            result["message"] = to_json(orch_.post_user_message(conv(), field<std::string>(frame, "text"), now));
        } else if (type == "propose") {
            result["message"] =
                to_json(orch_.propose(conv(), field<std::string>(frame, "worker"), field<std::string>(frame, "text"), now));
        } else if (type == "upvote" || type == "downvote") {
            const auto out = orch_.vote(conv(), MessageId{field<std::uint64_t>(frame, "message_id")},
                                        field<std::string>(frame, "worker"),
                                        type == "upvote" ? Polarity::Up : Polarity::Down, now);
            result["outcome"] = out.kind == VoteOutcomeKind::Accepted  ? "accepted"
                                : out.kind == VoteOutcomeKind::Pending ? "pending"
                                                                       : "ignored";
            result["duplicate"] = out.duplicate;
        } else if (type == "add_fact") {
            orch_.add_fact(conv(), field<std::string>(frame, "worker"), field<std::string>(frame, "text"), now);
        } else if (type == "leave") {
            orch_.leave_worker(conv(), field<std::string>(frame, "worker"), now);
        } else {
            throw ProtocolError("unknown command '" + type + "'");
        }
        result["seq"] = orch_.engine().log().next_seq() - 1;
    }
    notify();
    return result;
}

std::vector<Event> Service::events_since(std::uint64_t since, std::chrono::milliseconds wait,
                                         std::optional<std::uint64_t> conversation) {
    auto collect = [&] {
        std::vector<Event> out;
        for (const auto& e : orch_.engine().log().events()) {
            if (e.seq <= since || !is_client_event(e.kind)) continue;
            if (conversation && e.payload.value("conversation", std::uint64_t{0}) != *conversation) continue;
            out.push_back(e);
        }
        return out;
    };
    std::unique_lock lock(mu_);
    auto out = collect();
    const auto until = std::chrono::steady_clock::now() + wait;
    while (out.empty() && !stopping_) {
        if (cv_.wait_until(lock, until) == std::cv_status::timeout) {
            out = collect();
            break;
        }
        out = collect();
    }
    return out;
}

void Service::tick() {
    std::vector<TickPlan> plans;
    {
        std::lock_guard lock(mu_);
        const Timestamp now = clock_();
        orch_.close_idle(now);
        for (ConversationId c : orch_.due_conversations(now)) {
            plans.push_back(orch_.prepare_tick(c, now));
            orch_.mark_ticked(c, now);
        }
    }
    for (auto& plan : plans) {
        auto results = Orchestrator::execute_tick(plan, bot_deadline_);
        std::lock_guard lock(mu_);
        plan.now = std::max(plan.now, clock_());
        orch_.apply_tick(plan, results);
    }
    notify();
}

nlohmann::json Service::snapshot() const {
    std::lock_guard lock(mu_);
    auto j = orch_.engine().snapshot();
    j["selector"] = orch_.selector().dump();
    j["next_seq"] = orch_.engine().log().next_seq();
    return j;
}

nlohmann::json Service::conversation_json(std::uint64_t id) const {
    std::lock_guard lock(mu_);
    return crowdbot::snapshot(orch_.engine().conversation(ConversationId{id}));
}

nlohmann::json Service::metrics_json() const {
    std::lock_guard lock(mu_);
    return to_json(compute_metrics(orch_.engine().log().events(), orch_.engine().ledger(), orch_.engine().schema()));
}

std::string Service::ledger_dsv() const {
    std::lock_guard lock(mu_);
    return orch_.engine().ledger().export_dsv(orch_.engine().schema());
}

void Service::install_routes() {
    auto& s = *server_;
    s.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json frame;
        try {
            frame = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            reply_json(res, 400, {{"ok", false}, {"error", "protocol"}, {"message", "body is not JSON"}});
            return;
        }
        try {
            reply_json(res, 200, handle_command(frame));
        } catch (const ProtocolError& ex) {
            reply_json(res, 400, {{"ok", false}, {"error", "protocol"}, {"message", ex.what()}});
        } catch (const NotFound& ex) {
            reply_json(res, 404, {{"ok", false}, {"error", "not_found"}, {"message", ex.what()}});
        } catch (const Error& ex) {
            reply_json(res, 409, {{"ok", false}, {"error", "rejected"}, {"message", ex.what()}});
        }
    });
    s.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const std::uint64_t since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
            const auto wait = std::chrono::milliseconds(
                req.has_param("timeout_ms") ? std::stoll(req.get_param_value("timeout_ms")) : 0);
            std::optional<std::uint64_t> conv;
            if (req.has_param("conversation")) conv = std::stoull(req.get_param_value("conversation"));
            nlohmann::json out = nlohmann::json::array();
            for (const auto& e : events_since(since, std::min(wait, std::chrono::milliseconds{30000}), conv)) {
                out.push_back(event_json(e));
            }
            reply_json(res, 200, {{"events", out}});
        } catch (const std::logic_error&) {
            reply_json(res, 400, {{"ok", false}, {"error", "protocol"}, {"message", "bad query parameter"}});
        }
    });
    s.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t since = 0;
        try {
            if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
        } catch (const std::logic_error&) {
            reply_json(res, 400, {{"ok", false}, {"error", "protocol"}, {"message", "bad since"}});
            return;
        }
        auto cursor = std::make_shared<std::uint64_t>(since);
        res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
            if (stopping_) return false;
            for (const auto& e : events_since(*cursor, std::chrono::milliseconds{1000})) {
                const std::string frame = "id: " + std::to_string(e.seq) + "\nevent: " + e.kind +
                                          "\ndata: " + event_json(e).dump() + "\n\n";
                if (!sink.write(frame.data(), frame.size())) return false;
                *cursor = e.seq;
            }
            return !stopping_;
        });
    });
    s.Get("/api/snapshot", [this](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, snapshot()); });
    s.Get(R"(/api/conversations/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            reply_json(res, 200, conversation_json(std::stoull(req.matches[1].str())));
        } catch (const NotFound& ex) {
            reply_json(res, 404, {{"ok", false}, {"error", "not_found"}, {"message", ex.what()}});
        }
    });
    s.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, metrics_json()); });
    s.Get("/api/ledger", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(ledger_dsv(), "text/csv");
    });
    s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, {{"ok", true}}); });
}

int Service::bind(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    install_routes();
    stopping_ = false;
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) port_ = 0;
    } else {
        port_ = server_->bind_to_port(host, port) ? port : 0;
    }
    if (port_ == 0) server_.reset();
    return port_;
}

void Service::serve_forever(int tick_interval_ms) {
    if (!server_) throw Error("service is not bound");
    std::thread ticker([this, tick_interval_ms] {
        while (!stopping_) {
            try {
                tick();
            } catch (const std::exception&) {
                // A failing tick must not take the service down; the next
                // one starts from the persisted state.
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(tick_interval_ms));
        }
    });
    server_->listen_after_bind();
    stopping_ = true;
    notify();
    ticker.join();
}

bool Service::listen(const std::string& host, int port, int tick_interval_ms) {
    if (bind(host, port) == 0) return false;
    serve_forever(tick_interval_ms);
    return true;
}

void Service::stop() {
    stopping_ = true;
    notify();
    if (server_) server_->stop();
}

bool Service::running() const { return server_ && server_->is_running(); }

void serve(const ServiceConfig& config) {
    config.validate();
    Runtime rt = build_runtime(config);
    OrchestratorOptions opts;
    opts.seed = config.seed;
    opts.bot_deadline = std::chrono::milliseconds{config.bot_deadline_ms};
    auto orch = Orchestrator::restore(EventLog::open_file(config.log_path), config.rewards, rt.selector,
                                      rt.registry.instances(), rt.model, opts);
    Service service(std::move(orch), config.phase, system_clock(), opts.bot_deadline);
    if (!service.listen(config.host, config.port, config.tick_interval_ms)) {
        throw Error("cannot bind " + config.host + ":" + std::to_string(config.port));
    }
}

}  // namespace crowdbot
