#include "crowdbot/sim.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "crowdbot/errors.hpp"
#include "crowdbot/registry.hpp"

namespace crowdbot {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::int64_t to_ms(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1000.0)); }

/// Rounds a latency up to the 100 ms virtual-clock grid.
std::int64_t latency_ms(double seconds) { return static_cast<std::int64_t>(std::ceil(seconds * 10.0 - 1e-9)) * 100; }

WorkerPolicy parse_worker(const nlohmann::json& j) {
    WorkerPolicy w;
    w.id = j.at("id").get<std::string>();
    w.p_correct = j.value("p_correct", w.p_correct);
    if (j.contains("latency_seconds")) {
        const auto& l = j["latency_seconds"];
        w.latency_min = l.at(0).get<double>();
        w.latency_max = l.at(1).get<double>();
    }
    w.join_seconds = j.value("join_seconds", w.join_seconds);
    if (j.contains("leave_seconds") && !j["leave_seconds"].is_null()) w.leave_seconds = j["leave_seconds"].get<double>();
    w.propose_probability = j.value("propose_probability", w.propose_probability);
    w.p_good_proposal = j.value("p_good_proposal", w.p_good_proposal);
    w.validate();
    return w;
}

ScriptedMessage parse_message(const nlohmann::json& j) {
    ScriptedMessage m;
    m.at_seconds = j.at("at_seconds").get<double>();
    m.text = j.at("text").get<std::string>();
    m.topic = j.value("topic", m.topic);
    m.good_reply = j.value("good_reply", m.good_reply);
    m.bad_reply = j.value("bad_reply", m.bad_reply);
    return m;
}

SelectionStats finish(SelectionStats s) {
    s.precision = s.predicted ? static_cast<double>(s.true_positive) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.actual ? static_cast<double>(s.true_positive) / static_cast<double>(s.actual) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

nlohmann::json stats_json(const std::map<BotId, SelectionStats>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [bot, s] : m) {
        j[bot] = {{"predicted", s.predicted},
                  {"actual", s.actual},
                  {"true_positive", s.true_positive},
                  {"precision", s.precision},
                  {"recall", s.recall},
                  {"f1", s.f1}};
    }
    return j;
}

}  // namespace

void WorkerPolicy::validate() const {
    if (id.empty()) throw ValidationError("worker id must be non-empty");
    if (p_correct < 0.0 || p_correct > 1.0) throw ValidationError("p_correct must lie in [0,1]");
    if (propose_probability < 0.0 || propose_probability > 1.0) {
        throw ValidationError("propose_probability must lie in [0,1]");
    }
    if (p_good_proposal < 0.0 || p_good_proposal > 1.0) throw ValidationError("p_good_proposal must lie in [0,1]");
    if (latency_min < 0.0 || latency_max < latency_min) throw ValidationError("latencies must satisfy 0 <= min <= max");
    if (join_seconds < 0.0) throw ValidationError("join time must be non-negative");
}

void Scenario::validate() const {
    phase.validate();
    rewards.validate();
    shape.validate();
    if (!(duration_seconds > 0.0)) throw ValidationError("scenario duration must be positive");
    if (!table) throw ValidationError("scenario needs a vector table");
    for (const auto& c : conversations) {
        for (const auto& w : c.workers) w.validate();
        for (const auto& m : c.messages) {
            if (m.text.empty()) throw ValidationError("scripted user messages must be non-empty");
        }
    }
}

Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    Scenario s;
    try {
        s.seed = j.value("seed", s.seed);
        if (j.contains("phase")) s.phase = j["phase"].get<PhaseConfig>();
        if (j.contains("rewards")) s.rewards = j["rewards"].get<RewardSchema>();
        s.duration_seconds = j.value("duration_seconds", s.duration_seconds);
        if (j.contains("seen_count_mode")) {
            const auto mode = j["seen_count_mode"].get<std::string>();
            if (mode == "per_user_message") s.seen_count_mode = SeenCountMode::PerUserMessage;
            else if (mode == "per_invocation") s.seen_count_mode = SeenCountMode::PerInvocation;
            else throw ValidationError("unknown seen_count_mode '" + mode + "'");
        }
        if (j.contains("embedding")) {
            s.table = std::make_shared<const VectorTable>(load_vectors(resolve(base_dir, j["embedding"].get<std::string>())));
        } else if (j.contains("vectors")) {
            std::size_t d = 0;
            for (const auto& [tok, v] : j["vectors"].items()) {
                d = v.size();
                break;
            }
            auto table = std::make_shared<VectorTable>(d);
            for (const auto& [tok, v] : j["vectors"].items()) table->add(tok, v.get<std::vector<double>>());
            s.table = std::move(table);
        }
        if (j.contains("model")) {
            s.model = std::make_shared<const VoteClassifierModel>(load_model(resolve(base_dir, j["model"].get<std::string>())));
        }
        if (j.contains("bots")) {
            const BotRegistry reg = parse_registry({{"bots", j["bots"]}}, base_dir, s.table);
            for (const auto& rb : reg.bots) {
                SimBot b{rb.bot, rb.examples, {}};
                for (const auto& t : rb.meta.value("topics", nlohmann::json::array())) b.topics.insert(t.get<std::string>());
                s.bots.push_back(std::move(b));
            }
        }
        for (const auto& cj : j.value("conversations", nlohmann::json::array())) {
            ScenarioConversation c;
            c.user = cj.value("user", c.user);
            c.start_seconds = cj.value("start_seconds", 0.0);
            if (cj.contains("automation") && !cj["automation"].is_null()) c.automation = cj["automation"].get<bool>();
            for (const auto& w : cj.value("workers", nlohmann::json::array())) c.workers.push_back(parse_worker(w));
            for (const auto& m : cj.value("messages", nlohmann::json::array())) c.messages.push_back(parse_message(m));
            const int repeat = cj.value("repeat", 1);
            const double every = cj.value("repeat_every_seconds", 0.0);
            if (repeat < 1) throw ValidationError("repeat must be at least 1");
            for (int r = 0; r < repeat; ++r) {
                ScenarioConversation copy = c;
                copy.start_seconds = c.start_seconds + every * r;
                if (repeat > 1) copy.user = c.user + "-" + std::to_string(r + 1);
                s.conversations.push_back(std::move(copy));
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed scenario: ") + ex.what());
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(path.string() + ": " + ex.what(), 1);
    }
    return parse_scenario(j, path.parent_path());
}

SimResult run_sim(const Scenario& scenario) {
    scenario.validate();
    auto selector = std::make_shared<BotSelector>(scenario.table, scenario.shape, scenario.seen_count_mode);
    std::vector<std::shared_ptr<const Bot>> bots;
    std::map<BotId, const SimBot*> bot_info;
    for (const auto& b : scenario.bots) {
        selector->register_bot(b.bot->id(), b.examples);
        bots.push_back(b.bot);
        bot_info[b.bot->id()] = &b;
    }
    OrchestratorOptions opts;
    opts.seed = scenario.seed;
    opts.bot_deadline = std::chrono::milliseconds{0};
    Orchestrator orch(Engine(EventLog{}, scenario.rewards), selector, bots, scenario.model, opts);

    SimResult result;
    std::mt19937_64 rng(scenario.seed);
    auto bernoulli = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
    auto draw_latency = [&](const WorkerPolicy& w) {
        return latency_ms(std::uniform_real_distribution<double>(w.latency_min, w.latency_max)(rng));
    };

    using Action = std::function<void(std::int64_t)>;
    std::multimap<std::pair<std::int64_t, std::uint64_t>, Action> queue;
    std::uint64_t order = 0;
    auto schedule = [&](std::int64_t at, Action a) { queue.emplace(std::make_pair(at, order++), std::move(a)); };

    struct LiveConversation {
        const ScenarioConversation* script = nullptr;
        std::optional<ConversationId> id;
        std::size_t scanned = 0;
    };
    std::vector<LiveConversation> live(scenario.conversations.size());
    std::map<std::uint64_t, const ScriptedMessage*> scripted;

    auto scan = [&](std::int64_t t) {
        for (auto& lc : live) {
            if (!lc.id) continue;
            const Conversation& conv = orch.engine().conversation(*lc.id);
            const auto& msgs = conv.messages();
            for (; lc.scanned < msgs.size(); ++lc.scanned) {
                const Message m = msgs[lc.scanned];
                if (conv.closed()) continue;
                const ConversationId cid = *lc.id;
                if (m.role == Role::User) {
                    const ScriptedMessage* sm = scripted.at(m.id.value);
                    for (const auto& w : lc.script->workers) {
                        if (!conv.is_active_worker(w.id, Timestamp{t}) || !bernoulli(w.propose_probability)) continue;
                        const bool good = bernoulli(w.p_good_proposal);
                        const std::string text = good ? sm->good_reply : sm->bad_reply;
                        schedule(t + draw_latency(w), [&, cid, text, good, worker = w.id](std::int64_t now) {
                            const Message p = orch.propose(cid, worker, text, Timestamp{now});
                            result.quality[p.id.value] = good;
                        });
                    }
                    continue;
                }
                if (m.origin_bot && !result.quality.count(m.id.value)) {
                    const Message* user = conv.latest_user_message();
                    const std::string topic = user ? result.topics[user->id.value] : std::string();
                    const auto& topics = bot_info.at(*m.origin_bot)->topics;
                    result.quality[m.id.value] = topics.count("*") > 0 || (!topic.empty() && topics.count(topic) > 0);
                }
                if (m.state != MessageState::Proposed) continue;
                const bool good = result.quality.count(m.id.value) ? result.quality[m.id.value] : false;
                for (const auto& w : lc.script->workers) {
                    if (w.id == m.author || !conv.is_active_worker(w.id, Timestamp{t})) continue;
                    const bool correct = bernoulli(w.p_correct);
                    const Polarity pol = (good == correct) ? Polarity::Up : Polarity::Down;
                    schedule(t + draw_latency(w), [&, cid, pol, mid = m.id, worker = w.id](std::int64_t now) {
                        const Conversation& c = orch.engine().conversation(cid);
                        if (c.closed() || !c.is_active_worker(worker, Timestamp{now})) return;
                        if (c.message(mid).state != MessageState::Proposed) return;
                        orch.vote(cid, mid, worker, pol, Timestamp{now});
                    });
                }
            }
        }
    };

    for (std::size_t i = 0; i < scenario.conversations.size(); ++i) {
        live[i].script = &scenario.conversations[i];
        const std::int64_t start = to_ms(scenario.conversations[i].start_seconds);
        schedule(start, [&, i, start](std::int64_t now) {
            LiveConversation& lc = live[i];
            const ScenarioConversation& sc = *lc.script;
            lc.id = orch.open_conversation(sc.user, scenario.phase, sc.automation, Timestamp{now});
            const ConversationId cid = *lc.id;
            for (const auto& w : sc.workers) {
                schedule(start + to_ms(w.join_seconds), [&, cid, worker = w.id](std::int64_t t) {
                    orch.join_worker(cid, worker, Timestamp{t});
                });
                if (w.leave_seconds) {
                    schedule(start + to_ms(*w.leave_seconds), [&, cid, worker = w.id](std::int64_t t) {
                        const Conversation& c = orch.engine().conversation(cid);
                        if (!c.closed() && c.is_active_worker(worker, Timestamp{t})) orch.leave_worker(cid, worker, Timestamp{t});
                    });
                }
            }
            for (const auto& sm : sc.messages) {
                schedule(start + to_ms(sm.at_seconds), [&, cid, msg = &sm](std::int64_t t) {
                    const Message m = orch.post_user_message(cid, msg->text, Timestamp{t});
                    scripted[m.id.value] = msg;
                    result.topics[m.id.value] = msg->topic;
                });
            }
        });
    }

    const std::int64_t end = to_ms(scenario.duration_seconds);
    for (std::int64_t t = 0; t <= end; t += 100) {
        while (!queue.empty() && queue.begin()->first.first <= t) {
            Action a = std::move(queue.begin()->second);
            queue.erase(queue.begin());
            try {
                a(t);
            } catch (const Error&) {
                // Actions racing a close or a departure are dropped.
            }
            scan(t);
        }
        for (auto& report : orch.run_due_ticks(Timestamp{t})) {
            if (report.user_message && !report.ranking.empty()) {
                result.first_top1.emplace(report.user_message->value, report.ranking.front().bot_id);
            }
            result.ticks.push_back(std::move(report));
        }
        scan(t);
        orch.close_idle(Timestamp{t});
    }
    for (auto& lc : live) {
        if (lc.id && !orch.engine().conversation(*lc.id).closed()) {
            orch.close_conversation(*lc.id, "sim_end", Timestamp{end});
        }
    }

    result.events = orch.engine().log().events();
    result.metrics = compute_metrics(result.events, scenario.rewards);
    result.selector_dump = orch.selector().dump();
    return result;
}

std::map<BotId, std::vector<PriorPoint>> prior_trajectories(const std::vector<Event>& events,
                                                            const std::vector<BotId>& bots, const BetaShape& shape) {
    struct Counts {
        double seen = 0.0;
        double accepted = 0.0;
    };
    std::map<BotId, Counts> counts;
    std::map<BotId, std::vector<PriorPoint>> out;
    auto push = [&](std::uint64_t seq, const BotId& b) {
        const Counts& c = counts[b];
        out[b].push_back(PriorPoint{seq, b, (c.accepted + shape.alpha) / (c.seen + shape.alpha + shape.beta)});
    };
    for (const auto& b : bots) push(0, b);
    for (const auto& e : events) {
        if (e.kind == event_kind::SelectorSeen) {
            for (const auto& jb : e.payload.at("bots")) {
                const auto b = jb.get<std::string>();
                if (!out.count(b)) continue;
                counts[b].seen += 1.0;
                push(e.seq, b);
            }
        } else if (e.kind == event_kind::SelectorOutcome) {
            const auto b = e.payload.at("bot").get<std::string>();
            if (!out.count(b)) continue;
            counts[b].seen += e.payload.at("seen_delta").get<int>();
            counts[b].accepted += e.payload.at("accepted_delta").get<int>();
            push(e.seq, b);
        }
    }
    return out;
}

double monte_carlo_reward(double tpr, double fpr, const RewardSchema& schema, const MisfireParams& params,
                          std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("n must be at least 1");
    if (tpr < 0.0 || tpr > 1.0 || fpr < 0.0 || fpr > 1.0) throw ValidationError("tpr and fpr must lie in [0,1]");
    params.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::poisson_distribution<int> upvoters(params.e_upvoted_workers > 0.0 ? params.e_upvoted_workers : 1.0);
    const double good = expected_good(schema);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        if (u(rng) < tpr) r += good;  // good vote
        if (u(rng) < fpr && u(rng) < params.p_misfire_given_bad) {  // misfire
            const int k = params.e_upvoted_workers > 0.0 ? upvoters(rng) : 0;
            r -= schema.r_agreement * k + schema.r_proposal;
        }
        sum += r;
    }
    return sum / static_cast<double>(n);
}

ConvergenceReport selector_convergence_experiment(const Scenario& scenario, std::size_t window) {
    ConvergenceReport report;
    report.window = window;
    report.sim = run_sim(scenario);
    std::vector<BotId> ids;
    for (const auto& b : scenario.bots) {
        ids.push_back(b.bot->id());
        report.first_window[b.bot->id()];
        report.overall[b.bot->id()];
    }
    for (const auto& [user_id, top] : report.sim.first_top1) {
        const std::string& topic = report.sim.topics.at(user_id);
        if (topic.empty()) continue;
        const bool in_window = report.evaluated < window;
        for (const auto& b : scenario.bots) {
            const BotId& id = b.bot->id();
            const bool predicted = top == id;
            const bool actual = b.topics.count(topic) > 0;
            for (auto* stats : {&report.overall[id], in_window ? &report.first_window[id] : nullptr}) {
                if (!stats) continue;
                stats->predicted += predicted;
                stats->actual += actual;
                stats->true_positive += predicted && actual;
            }
        }
        ++report.evaluated;
    }
    for (auto& [_, s] : report.first_window) s = finish(s);
    for (auto& [_, s] : report.overall) s = finish(s);
    report.trajectories = prior_trajectories(report.sim.events, ids, scenario.shape);
    return report;
}

nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json traj = nlohmann::json::object();
    for (const auto& [bot, pts] : r.trajectories) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : pts) arr.push_back({{"seq", p.seq}, {"prior", p.prior}});
        traj[bot] = arr;
    }
    return {{"window", r.window},
            {"evaluated", r.evaluated},
            {"first_window", stats_json(r.first_window)},
            {"overall", stats_json(r.overall)},
            {"trajectories", traj}};
}

}  // namespace crowdbot
