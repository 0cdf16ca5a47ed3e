#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "crowdbot/auto_voter.hpp"
#include "crowdbot/errors.hpp"
#include "crowdbot/metrics.hpp"
#include "crowdbot/retrieval.hpp"
#include "crowdbot/reward_optimizer.hpp"
#include "crowdbot/service.hpp"
#include "crowdbot/sim.hpp"

using namespace crowdbot;

namespace {

std::vector<std::vector<Event>> read_logs(const std::vector<std::string>& paths) {
    std::vector<std::vector<Event>> logs;
    for (const auto& p : paths) logs.push_back(read_log(p));
    return logs;
}

VectorTable table_or_empty(const std::string& path) { return path.empty() ? VectorTable{} : load_vectors(path); }

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

std::vector<double> confidences_of(const VoteClassifierModel& model, const LabelExtraction& data,
                                   std::vector<int>& labels) {
    std::vector<double> conf;
    for (const auto& ex : data.examples) {
        conf.push_back(predict_confidence(model, ex.features));
        labels.push_back(ex.label == VoteLabel::Upvote ? 1 : 0);
    }
    return conf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowd-AI conversational orchestration engine"};
    app.require_subcommand(1);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the orchestrator service");
    std::string config_path;
    serve_cmd->add_option("--config", config_path, "Service config file")->required()->check(CLI::ExistingFile);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run a scenario in virtual time");
    std::string scenario_path, sim_log, sim_trace;
    std::optional<std::uint64_t> sim_seed;
    sim_cmd->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim_seed, "Override the scenario seed");
    sim_cmd->add_option("--log-out", sim_log, "Write the event log here");
    sim_cmd->add_option("--trace-out", sim_trace, "Write per-tick trace (JSON lines) here");

    // train-voter
    auto* train_cmd = app.add_subcommand("train-voter", "Train the vote classifier from event logs");
    std::vector<std::string> train_logs;
    std::string embedding_path, model_out;
    TrainOptions topts;
    double train_threshold = 0.7;
    train_cmd->add_option("--log", train_logs, "Event log(s)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--embedding", embedding_path, "GloVe-format vectors")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", model_out, "Model output path")->required();
    train_cmd->add_option("--lambda", topts.l2_lambda, "L2 penalty");
    train_cmd->add_option("--epochs", topts.epochs, "Gradient descent epochs");
    train_cmd->add_option("--lr", topts.learning_rate, "Learning rate");
    train_cmd->add_option("--seed", topts.seed, "Seed");
    train_cmd->add_option("--threshold", train_threshold, "Confidence threshold stored in the model");

    // eval-voter
    auto* eval_cmd = app.add_subcommand("eval-voter", "Evaluate a vote classifier on event logs");
    std::string model_path;
    std::vector<std::string> eval_logs;
    eval_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--log", eval_logs, "Event log(s)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--embedding", embedding_path, "GloVe-format vectors")->check(CLI::ExistingFile);

    // optimize-threshold
    auto* opt_cmd = app.add_subcommand("optimize-threshold", "Pick the confidence threshold by expected reward");
    std::vector<std::string> val_logs, misfire_logs;
    MisfireParams mparams;
    RewardSchema schema;
    std::string delim = ",";
    std::string table_out;
    bool write_model = false;
    double grid_step = 0.01;
    opt_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    opt_cmd->add_option("--log", val_logs, "Validation event log(s)")->required()->check(CLI::ExistingFile);
    opt_cmd->add_option("--embedding", embedding_path, "GloVe-format vectors")->check(CLI::ExistingFile);
    opt_cmd->add_option("--misfire-rate", mparams.p_misfire_given_bad, "P(misfire | bad upvote)");
    opt_cmd->add_option("--upvoters", mparams.e_upvoted_workers, "Expected human upvoters on a misfire");
    opt_cmd->add_option("--estimate-from", misfire_logs, "Estimate misfire parameters from these logs")
        ->check(CLI::ExistingFile);
    opt_cmd->add_option("--grid-step", grid_step, "Threshold grid step");
    opt_cmd->add_option("--delimiter", delim, "Table delimiter");
    opt_cmd->add_option("--table-out", table_out, "Write the table here instead of stdout");
    opt_cmd->add_flag("--write-model", write_model, "Store the chosen threshold in the model file");

    // extract-pairs
    auto* pairs_cmd = app.add_subcommand("extract-pairs", "Extract query/response pairs from event logs");
    std::vector<std::string> pair_logs, blocked;
    std::string pairs_out;
    pairs_cmd->add_option("--log", pair_logs, "Event log(s)")->required()->check(CLI::ExistingFile);
    pairs_cmd->add_option("--out", pairs_out, "Pair file (JSON lines)")->required();
    pairs_cmd->add_option("--block", blocked, "Participant ids to leave out");

    // retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Answer a query from a pair file");
    std::string pairs_path, query;
    std::size_t k = 2;
    std::uint64_t retrieve_seed = 0;
    retrieve_cmd->add_option("--pairs", pairs_path, "Pair file")->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--embedding", embedding_path, "GloVe-format vectors")->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("-k", k, "Neighbours to draw from");
    retrieve_cmd->add_option("--seed", retrieve_seed, "Seed");
    retrieve_cmd->add_option("query", query, "Query text")->required();

    // eval-selector
    auto* sel_cmd = app.add_subcommand("eval-selector", "Top-1 selector precision/recall on a scenario");
    std::size_t window = 20;
    sel_cmd->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    sel_cmd->add_option("--window", window, "First evaluation window size");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "Deployment metrics of an event log");
    std::string log_path;
    double dollars_per_point = schema.dollars_per_point;
    metrics_cmd->add_option("--log", log_path, "Event log")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--dollars-per-point", dollars_per_point, "Point to dollar rate");

    // ledger
    auto* ledger_cmd = app.add_subcommand("ledger", "Export worker points from an event log");
    ledger_cmd->add_option("--log", log_path, "Event log")->required()->check(CLI::ExistingFile);
    ledger_cmd->add_option("--delimiter", delim, "Delimiter");
    ledger_cmd->add_option("--dollars-per-point", dollars_per_point, "Point to dollar rate");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "Mean word vector of a message");
    std::string text;
    embed_cmd->add_option("--embedding", embedding_path, "GloVe-format vectors")->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("text", text, "Message text")->required();

    // selector
    auto* selector_cmd = app.add_subcommand("selector", "Dump selector state rebuilt from a config and log");
    selector_cmd->add_option("--config", config_path, "Service config file")->required()->check(CLI::ExistingFile);
    selector_cmd->add_option("--log", log_path, "Event log (defaults to the config's)")->check(CLI::ExistingFile);
    selector_cmd->add_option("--rank", query, "Also rank the bots for this message");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            serve(load_config(config_path));
        } else if (*sim_cmd) {
            Scenario scenario = load_scenario(scenario_path);
            if (sim_seed) scenario.seed = *sim_seed;
            SimResult r = run_sim(scenario);
            if (!sim_log.empty()) write_log(sim_log, r.events);
            if (!sim_trace.empty()) {
                std::ostringstream trace;
                for (const auto& t : r.ticks) {
                    nlohmann::json ranking = nlohmann::json::array();
                    for (const auto& rb : t.ranking) ranking.push_back({{"bot", rb.bot_id}, {"score", rb.score}});
                    trace << nlohmann::json{{"conversation", t.conversation.value},
                                            {"invoked", t.invoked},
                                            {"proposals", t.proposals.size()},
                                            {"machine_vote", t.machine_vote ? nlohmann::json(t.machine_vote->value)
                                                                            : nlohmann::json()},
                                            {"ranking", ranking}}
                                 .dump()
                          << '\n';
                }
                write_text(sim_trace, trace.str());
            }
            std::cout << to_json(r.metrics).dump(2) << '\n';
        } else if (*train_cmd) {
            const VectorTable table = table_or_empty(embedding_path);
            const auto data = extract_training_labels(read_logs(train_logs), table);
            std::cerr << "labels: upvote=" << data.upvote << " downvote=" << data.downvote
                      << " excluded=" << data.excluded << '\n';
            VoteClassifierModel model = train(data.examples, topts);
            model.confidence_threshold = train_threshold;
            save_model(model_out, model);
            const auto rep = evaluate(model, data.examples);
            std::cout << "training F1 upvote=" << rep.upvote.f1 << " downvote=" << rep.downvote.f1 << '\n';
        } else if (*eval_cmd) {
            const VectorTable table = table_or_empty(embedding_path);
            const auto model = load_model(model_path);
            const auto data = extract_training_labels(read_logs(eval_logs), table);
            const auto rep = evaluate(model, data.examples);
            nlohmann::json j;
            for (const auto& [name, c] : {std::pair{"upvote", rep.upvote}, std::pair{"downvote", rep.downvote}}) {
                j[name] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
            }
            std::cout << j.dump(2) << '\n';
        } else if (*opt_cmd) {
            if (delim.size() != 1) throw ValidationError("delimiter must be one character");
            const VectorTable table = table_or_empty(embedding_path);
            VoteClassifierModel model = load_model(model_path);
            if (!misfire_logs.empty()) mparams = estimate_misfire_params(model, read_logs(misfire_logs), table, std::nullopt);
            const auto data = extract_training_labels(read_logs(val_logs), table);
            std::vector<int> labels;
            const auto conf = confidences_of(model, data, labels);
            const auto points = operating_points(conf, labels, grid_step);
            const auto best = sweep_thresholds(points, schema, mparams);
            std::ostringstream out;
            out << std::setprecision(6);
            out << "threshold" << delim << "precision" << delim << "recall" << delim << "fpr" << delim
                << "expected_save\n";
            for (const auto& p : points) {
                out << p.threshold << delim << p.precision << delim << p.recall << delim << p.fpr << delim
                    << expected_save(p.tpr, p.fpr, schema, mparams) << '\n';
            }
            write_text(table_out, out.str());
            std::cerr << "misfire_rate=" << mparams.p_misfire_given_bad << " upvoters=" << mparams.e_upvoted_workers
                      << '\n';
            std::cout << "chosen threshold " << best.threshold << " (expected save "
                      << expected_save(best.tpr, best.fpr, schema, mparams) << ")\n";
            if (write_model) {
                model.confidence_threshold = best.threshold;
                save_model(model_path, model);
            }
        } else if (*pairs_cmd) {
            ExtractionOptions eo;
            eo.blocked_ids.insert(blocked.begin(), blocked.end());
            std::vector<QueryResponsePair> all;
            for (const auto& p : pair_logs) {
                auto pairs = extract_pairs(read_log(p), eo);
                all.insert(all.end(), pairs.begin(), pairs.end());
            }
            save_pairs(pairs_out, all, {{"logs", pair_logs}});
            std::cout << all.size() << " pairs\n";
        } else if (*retrieve_cmd) {
            const VectorTable table = load_vectors(embedding_path);
            const PairStore store = load_store(pairs_path, table);
            std::mt19937_64 rng(retrieve_seed);
            auto answer = retrieve(query, store, table, k, rng);
            if (!answer) {
                std::cout << "(decline)\n";
                return 3;
            }
            std::cout << *answer << '\n';
        } else if (*sel_cmd) {
            const Scenario scenario = load_scenario(scenario_path);
            std::cout << to_json(selector_convergence_experiment(scenario, window)).dump(2) << '\n';
        } else if (*metrics_cmd) {
            RewardSchema s;
            s.dollars_per_point = dollars_per_point;
            std::cout << to_json(compute_metrics(read_log(log_path), s)).dump(2) << '\n';
        } else if (*ledger_cmd) {
            if (delim.size() != 1) throw ValidationError("delimiter must be one character");
            RewardSchema s;
            s.dollars_per_point = dollars_per_point;
            std::cout << replay_ledger(read_log(log_path)).export_dsv(s, delim[0]);
        } else if (*embed_cmd) {
            const VectorTable table = load_vectors(embedding_path);
            const MessageVector v = embed_message(text, table);
            std::cout << nlohmann::json{{"tokens", v.token_count}, {"vector", v.values}}.dump() << '\n';
        } else if (*selector_cmd) {
            const ServiceConfig cfg = load_config(config_path);
            Runtime rt = build_runtime(cfg);
            EventLog log;
            log.adopt(read_log(log_path.empty() ? cfg.log_path : std::filesystem::path(log_path)));
            const auto orch =
                Orchestrator::restore(std::move(log), cfg.rewards, rt.selector, rt.registry.instances(), rt.model);
            nlohmann::json j = orch.selector().dump();
            if (!query.empty()) {
                nlohmann::json ranking = nlohmann::json::array();
                for (const auto& rb : orch.selector().rank(query)) {
                    ranking.push_back({{"bot", rb.bot_id}, {"score", rb.score}, {"prior", rb.prior},
                                       {"similarity", rb.similarity}});
                }
                j = {{"profiles", j}, {"ranking", ranking}};
            }
            std::cout << j.dump(2) << '\n';
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
