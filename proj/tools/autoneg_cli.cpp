// Command-line surface for the negotiation platform: scenario generation,
// strategy/classifier training, pool review, head-to-head sessions,
// tournaments and reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autoneg/autoneg.hpp"

namespace fs = std::filesystem;
using namespace autoneg;

namespace {

// Files created by the running command; removed again if it fails so a
// nonzero exit never leaves partial outputs behind.
std::vector<fs::path> g_written;

void note_output(const fs::path& p) { g_written.push_back(p); }

void remove_partial_outputs() {
    for (const fs::path& p : g_written) {
        std::error_code ec;
        fs::remove_all(p, ec);
    }
}

fs::path resolve_out(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("AUTONEG_OUT_ROOT")) return fs::path(root) / p;
    return p;
}

void write_text_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out << text;
    note_output(p);
}

// Every command echoes its effective configuration next to its outputs.
void echo_config(const fs::path& where, const nlohmann::ordered_json& j) {
    write_text_file(where, j.dump(2) + "\n");
}

// agent references: "boulware" | "tit_for_tat" | "random" |
// "bundle:<file>" | "pool:<dir>"
NegotiatorFactory resolve_agent(const std::string& ref) {
    if (ref.rfind("bundle:", 0) == 0)
        return make_bundle_negotiator(load_bundle(resolve_out(ref.substr(7)).string()));
    if (ref.rfind("pool:", 0) == 0) {
        auto pool = std::make_shared<StrategyPool>(
            load_pool(resolve_out(ref.substr(5)).string()));
        return make_rl_agent(std::move(pool));
    }
    return make_baseline_factory(ref);
}

SacConfig preset_by_name(const std::string& name) {
    if (name == "desk") return SacConfig::desk();
    if (name == "full") return SacConfig{};
    throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
}

int cmd_gen_scenario(std::uint64_t seed, std::size_t cardinality, double opposition_target,
                     const std::string& out) {
    Scenario sc = generate_scenario(seed, cardinality, opposition_target);
    const fs::path path = resolve_out(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_scenario(path.string(), sc);
    note_output(path);
    nlohmann::ordered_json cfg;
    cfg["command"] = "gen-scenario";
    cfg["seed"] = seed;
    cfg["cardinality"] = cardinality;
    cfg["opposition"] = opposition_target;
    cfg["achieved_opposition"] = opposition(sc);
    cfg["achieved_cardinality"] = sc.outcome_space.size();
    echo_config(path.string() + ".config.json", cfg);
    std::cout << "scenario written to " << path.string() << " (cardinality "
              << sc.outcome_space.size() << ", opposition " << fmt_double(opposition(sc))
              << ")\n";
    return 0;
}

int cmd_train_strategy(const std::string& opponent, const std::string& scenario_path,
                       const std::string& preset, std::uint64_t seed, const std::string& out,
                       int epochs_override, int deadline_override) {
    Scenario sc = load_scenario(resolve_out(scenario_path).string());
    SacConfig cfg = preset_by_name(preset);
    if (epochs_override > 0) cfg.epochs = epochs_override;
    if (deadline_override > 0) cfg.deadline_rounds = deadline_override;
    TrainResult result = train_sac(opponent, sc, cfg, seed, fs::path(scenario_path).stem());

    const fs::path path = resolve_out(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_bundle(path.string(), result.bundle);
    note_output(path);
    const fs::path curve = path.parent_path() / (path.stem().string() + "_curve.csv");
    write_training_curve_csv(curve.string(), result.curve);
    note_output(curve);

    nlohmann::ordered_json cfgj;
    cfgj["command"] = "train-strategy";
    cfgj["opponent"] = opponent;
    cfgj["scenario"] = scenario_path;
    cfgj["preset"] = preset;
    cfgj["seed"] = seed;
    cfgj["epochs"] = cfg.epochs;
    cfgj["deadline_rounds"] = cfg.deadline_rounds;
    cfgj["config_hash"] = cfg.hash();
    cfgj["initial_mean_utility"] = result.initial_mean_utility;
    cfgj["final_mean_utility"] = result.final_mean_utility;
    echo_config(path.string() + ".config.json", cfgj);
    std::cout << "bundle written to " << path.string() << " (mean utility "
              << fmt_double(result.initial_mean_utility) << " -> "
              << fmt_double(result.final_mean_utility) << ")\n";
    return 0;
}

std::vector<std::string> parse_id_list_or_pool(const std::string& ref) {
    const fs::path as_dir = resolve_out(ref);
    if (fs::exists(as_dir / "pool.json")) return load_pool(as_dir.string()).class_order();
    std::vector<std::string> ids;
    std::stringstream ss(ref);
    std::string id;
    while (std::getline(ss, id, ','))
        if (!id.empty()) ids.push_back(id);
    return ids;
}

int cmd_train_classifier(const std::string& pool_ref, const std::string& scenario_path,
                         std::size_t k, int sessions_per_class, int epochs, std::uint64_t seed,
                         const std::string& out) {
    Scenario sc = load_scenario(resolve_out(scenario_path).string());
    const std::vector<std::string> ids = parse_id_list_or_pool(pool_ref);
    WindowDataset ds = build_dataset(ids, sc, sessions_per_class, k, derive_seed(seed, 1));
    ClassifierTrainOptions opts;
    opts.epochs = epochs;
    opts.seed = derive_seed(seed, 2);
    ClassifierModel model = train_classifier(ds, opts);

    const fs::path dir = resolve_out(out);
    fs::create_directories(dir);
    save_classifier((dir / "classifier.json").string(), model);
    note_output(dir / "classifier.json");
    save_dataset((dir / "dataset.json").string(), ds);
    note_output(dir / "dataset.json");

    nlohmann::ordered_json cfg;
    cfg["command"] = "train-classifier";
    cfg["pool"] = pool_ref;
    cfg["classes"] = ids;
    cfg["scenario"] = scenario_path;
    cfg["k"] = k;
    cfg["sessions_per_class"] = sessions_per_class;
    cfg["epochs"] = epochs;
    cfg["seed"] = seed;
    cfg["windows"] = ds.size();
    cfg["validation_accuracy"] = model.validation_accuracy;
    echo_config(dir / "config.json", cfg);
    std::cout << "classifier written to " << (dir / "classifier.json").string()
              << " (validation accuracy " << fmt_double(model.validation_accuracy) << ")\n";
    return 0;
}

int cmd_make_pool(const std::vector<std::string>& bundle_paths,
                  const std::string& classifier_path, const std::string& out) {
    StrategyPool pool;
    for (const std::string& b : bundle_paths) {
        StrategyBundle bundle = load_bundle(resolve_out(b).string());
        pool.entries.push_back({bundle.trained_vs, std::move(bundle)});
    }
    if (!classifier_path.empty())
        pool.classifier = load_classifier(resolve_out(classifier_path).string());
    const fs::path dir = resolve_out(out);
    save_pool(dir.string(), pool);
    note_output(dir);
    std::cout << "pool written to " << dir.string() << " with " << pool.size()
              << " strategies\n";
    return 0;
}

ReviewerConfig reviewer_config_from_json(const nlohmann::ordered_json& j) {
    ReviewerConfig cfg;
    cfg.eval_scenario = load_scenario(resolve_out(j.at("eval_scenario")).string());
    cfg.eval_scenario_id = fs::path(j.at("eval_scenario").get<std::string>()).stem();
    if (j.contains("alpha")) cfg.alpha_threshold = j.at("alpha").get<double>();
    if (j.contains("beta")) cfg.beta_threshold = j.at("beta").get<double>();
    if (j.contains("eval_sessions")) cfg.eval_sessions = j.at("eval_sessions").get<int>();
    if (j.contains("deadline_rounds"))
        cfg.deadline_rounds = j.at("deadline_rounds").get<int>();
    cfg.sac = preset_by_name(j.value("sac_preset", std::string("desk")));
    if (j.contains("sac_epochs")) cfg.sac.epochs = j.at("sac_epochs").get<int>();
    if (j.contains("classifier_epochs"))
        cfg.classifier.epochs = j.at("classifier_epochs").get<int>();
    if (j.contains("classifier_sessions_per_class"))
        cfg.classifier_sessions_per_class = j.at("classifier_sessions_per_class").get<int>();
    if (j.contains("classifier_k")) cfg.classifier_k = j.at("classifier_k").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

int cmd_review(const std::string& candidate, const std::string& pool_dir,
               const std::string& config_path) {
    std::ifstream in(resolve_out(config_path));
    if (!in) throw Error("cannot open reviewer config: " + config_path);
    nlohmann::ordered_json j;
    in >> j;
    ReviewerConfig cfg = reviewer_config_from_json(j);

    const fs::path dir = resolve_out(pool_dir);
    StrategyPool pool = load_pool(dir.string());
    ReviewDecision decision = review_new_negotiator(candidate, pool, cfg);

    nlohmann::ordered_json report = review_to_json(decision);
    write_text_file(dir / ("review_" + candidate + ".json"), report.dump(2) + "\n");
    if (decision.accepted) save_pool(dir.string(), decision.pool);
    std::cout << "review of '" << candidate << "': "
              << (decision.accepted ? "ACCEPT" : "REJECT") << " (e_s "
              << fmt_double(decision.e_s) << " vs alpha*e_f "
              << fmt_double(cfg.alpha_threshold * decision.e_f) << ")\n";
    for (const CrossEvalRow& r : decision.cross_evaluation)
        std::cout << "  cross-eval vs " << r.negotiator_id << ": candidate "
                  << fmt_double(r.candidate_score) << " incumbent "
                  << fmt_double(r.incumbent_score) << (r.replaced ? " -> replaced" : "")
                  << "\n";
    return 0;
}

int cmd_negotiate(const std::string& agent_a, const std::string& agent_b,
                  const std::string& scenario_path, int sessions, int deadline,
                  std::uint64_t seed, const std::string& out) {
    Scenario sc = load_scenario(resolve_out(scenario_path).string());
    NegotiatorFactory make_a = resolve_agent(agent_a);
    NegotiatorFactory make_b = resolve_agent(agent_b);
    const fs::path dir = resolve_out(out);
    fs::create_directories(dir);

    CsvWriter outcomes((dir / "outcomes.csv").string());
    note_output(dir / "outcomes.csv");
    outcomes.row({"session", "agreement", "outcome_id", "utility_a", "utility_b", "rounds"});
    for (int i = 0; i < sessions; ++i) {
        SessionConfig per{deadline, derive_seed(seed, 100 + static_cast<std::uint64_t>(i))};
        auto a = make_a();
        auto b = make_b();
        SessionResult res;
        Scenario run_sc = sc;
        if (i % 2 == 0) {
            res = run_session(*a, *b, run_sc, per);
        } else {
            run_sc = Scenario{sc.outcome_space, sc.profile_b, sc.profile_a};
            res = run_session(*b, *a, run_sc, per);
            std::swap(res.outcome.utility_a, res.outcome.utility_b);
        }
        const fs::path trace_path = dir / ("trace_" + std::to_string(i) + ".csv");
        std::ofstream tf(trace_path);
        export_trace_csv(tf, res.trace, run_sc);
        note_output(trace_path);
        outcomes.row({fmt_int(i), res.outcome.agreement ? "1" : "0",
                      res.outcome.agreement
                          ? fmt_int(static_cast<long long>(
                                sc.outcome_space.index_of(*res.outcome.agreement)))
                          : "",
                      fmt_double(res.outcome.utility_a), fmt_double(res.outcome.utility_b),
                      fmt_int(res.outcome.rounds_used)});
    }

    nlohmann::ordered_json cfg;
    cfg["command"] = "negotiate";
    cfg["agent_a"] = agent_a;
    cfg["agent_b"] = agent_b;
    cfg["scenario"] = scenario_path;
    cfg["sessions"] = sessions;
    cfg["deadline_rounds"] = deadline;
    cfg["seed"] = seed;
    echo_config(dir / "config.json", cfg);
    std::cout << sessions << " sessions written to " << dir.string() << "\n";
    return 0;
}

int cmd_tournament(const std::string& spec_path, const std::string& out) {
    std::ifstream in(resolve_out(spec_path));
    if (!in) throw Error("cannot open tournament spec: " + spec_path);
    nlohmann::ordered_json j;
    in >> j;

    TournamentSpec spec;
    for (const auto& ja : j.at("agents"))
        spec.agents.push_back(
            {ja.at("name").get<std::string>(), resolve_agent(ja.at("ref").get<std::string>())});
    for (const auto& js : j.at("scenarios")) {
        const std::string path = js.get<std::string>();
        spec.scenarios.push_back(
            {fs::path(path).stem().string(), load_scenario(resolve_out(path).string())});
    }
    spec.sessions_per_pair = j.value("sessions_per_pair", 100);
    spec.deadline_rounds = j.value("deadline_rounds", 100);
    spec.seed = j.value("seed", 0);
    spec.jobs = j.value("jobs", 1);
    std::size_t focal = 0;
    if (j.contains("focal")) {
        const std::string name = j.at("focal").get<std::string>();
        for (std::size_t i = 0; i < spec.agents.size(); ++i)
            if (spec.agents[i].name == name) focal = i;
    }

    TournamentResult result = run_tournament(spec);
    BenchmarkReport report = make_report(spec, result, focal);
    const fs::path dir = resolve_out(out);
    write_report_csvs(dir.string(), report, result.records);
    note_output(dir);
    echo_config(dir / "config.json", j);
    std::cout << "tournament report written to " << dir.string() << "\n";
    for (std::size_t a = 0; a < report.agent_names.size(); ++a)
        std::cout << "  S[" << report.agent_names[a] << "] = " << fmt_double(report.S[a])
                  << "  O[" << report.agent_names[a] << "] = " << fmt_double(report.O[a])
                  << "\n";
    return 0;
}

int cmd_report(const std::string& tournament_dir) {
    const fs::path dir = resolve_out(tournament_dir);
    std::ifstream sj(dir / "summary.json");
    if (!sj) throw Error("no summary.json in " + dir.string());
    nlohmann::ordered_json j;
    sj >> j;
    const auto agents = j.at("agents").get<std::vector<std::string>>();
    const auto domains = j.at("domains").get<std::vector<std::string>>();

    // rebuild the records from the raw session log
    std::ifstream in(dir / "sessions.csv");
    if (!in) throw Error("no sessions.csv in " + dir.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<SessionRecord> records;
    const auto index_of = [](const std::vector<std::string>& v, const std::string& x) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] == x) return static_cast<int>(i);
        throw StructuralError("unknown name in sessions.csv: " + x);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 8) throw StructuralError("malformed sessions.csv row: " + line);
        SessionRecord r;
        r.a = index_of(agents, cells[0]);
        r.b = index_of(agents, cells[1]);
        r.d = index_of(domains, cells[2]);
        r.session = std::stoi(cells[3]);
        r.utility_a = std::stod(cells[4]);
        r.utility_b = std::stod(cells[5]);
        r.agreement = cells[6] == "1";
        r.rounds = std::stoi(cells[7]);
        records.push_back(r);
    }

    UtilityTensor tensor = aggregate_tensor(agents.size(), domains.size(), records);
    std::cout << "self-utility benchmark (S), higher is better\n";
    for (std::size_t a = 0; a < agents.size(); ++a)
        std::cout << "  " << agents[a] << ": " << fmt_double(self_utility_benchmark(tensor, a))
                  << "\n";
    std::cout << "utility-against-opponent benchmark (O), lower marks a harder opponent\n";
    for (std::size_t a = 0; a < agents.size(); ++a)
        std::cout << "  " << agents[a] << ": " << fmt_double(opponent_benchmark(tensor, a))
                  << "\n";
    std::cout << "domain benchmark (D)\n";
    for (std::size_t d = 0; d < domains.size(); ++d)
        std::cout << "  " << domains[d] << ": " << fmt_double(domain_benchmark(tensor, d))
                  << "\n";
    // consistency with the stored summary
    const auto stored_S = j.at("S").get<std::vector<double>>();
    for (std::size_t a = 0; a < agents.size(); ++a) {
        if (std::fabs(stored_S[a] - self_utility_benchmark(tensor, a)) > 1e-12)
            throw Error("stored summary disagrees with raw session log for " + agents[a]);
    }
    std::cout << "raw-log re-aggregation matches the stored summary\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"autoneg: adaptive negotiation agents, training and benchmarks"};
    app.require_subcommand(1);

    // gen-scenario
    std::uint64_t gs_seed = 0;
    std::size_t gs_card = 100;
    double gs_opp = 0.2;
    std::string gs_out;
    auto* gen = app.add_subcommand("gen-scenario", "generate a synthetic scenario file");
    gen->add_option("--seed", gs_seed, "generator seed")->required();
    gen->add_option("--cardinality", gs_card, "target outcome-space size")->required();
    gen->add_option("--opposition", gs_opp, "target opposition in [0, 1.41)")->required();
    gen->add_option("--out", gs_out, "output scenario file")->required();

    // train-strategy
    std::string ts_opponent, ts_scenario, ts_preset = "desk", ts_out;
    std::uint64_t ts_seed = 0;
    int ts_epochs = 0, ts_deadline = 0;
    auto* train = app.add_subcommand("train-strategy",
                                     "train a bidding strategy against a base negotiator");
    train->add_option("--opponent", ts_opponent, "base negotiator id")->required();
    train->add_option("--scenario", ts_scenario, "scenario file")->required();
    train->add_option("--preset", ts_preset, "desk or full");
    train->add_option("--seed", ts_seed, "training seed")->required();
    train->add_option("--out", ts_out, "output bundle file")->required();
    train->add_option("--epochs", ts_epochs, "override training iterations");
    train->add_option("--deadline-rounds", ts_deadline, "override episode deadline");

    // train-classifier
    std::string tc_pool, tc_scenario, tc_out;
    std::size_t tc_k = 20;
    int tc_sessions = 60, tc_epochs = 35;
    std::uint64_t tc_seed = 0;
    auto* clf = app.add_subcommand("train-classifier",
                                   "train the opponent classifier for a set of negotiators");
    clf->add_option("--pool", tc_pool, "pool directory or comma-separated negotiator ids")
        ->required();
    clf->add_option("--scenario", tc_scenario, "scenario file")->required();
    clf->add_option("--k", tc_k, "window length");
    clf->add_option("--sessions-per-class", tc_sessions, "simulated sessions per class");
    clf->add_option("--epochs", tc_epochs, "training epochs");
    clf->add_option("--seed", tc_seed, "seed")->required();
    clf->add_option("--out", tc_out, "output directory")->required();

    // make-pool
    std::vector<std::string> mp_bundles;
    std::string mp_classifier, mp_out;
    auto* mp = app.add_subcommand("make-pool",
                                  "assemble a strategy pool from bundles and a classifier");
    mp->add_option("--bundles", mp_bundles, "bundle files, in class order")->required();
    mp->add_option("--classifier", mp_classifier, "classifier file (omit for a single bundle)");
    mp->add_option("--out", mp_out, "pool directory")->required();

    // review
    std::string rv_candidate, rv_pool, rv_config;
    auto* rv = app.add_subcommand("review",
                                  "evaluate a candidate negotiator and mutate the pool");
    rv->add_option("--candidate", rv_candidate, "candidate negotiator id")->required();
    rv->add_option("--pool-dir", rv_pool, "pool directory to review into")->required();
    rv->add_option("--config", rv_config, "reviewer config json")->required();

    // negotiate
    std::string ng_a, ng_b, ng_scenario, ng_out;
    int ng_sessions = 10, ng_deadline = 100;
    std::uint64_t ng_seed = 0;
    auto* ng = app.add_subcommand("negotiate", "run head-to-head sessions with trace export");
    ng->add_option("--agent-a", ng_a, "agent id / bundle:<file> / pool:<dir>")->required();
    ng->add_option("--agent-b", ng_b, "agent id / bundle:<file> / pool:<dir>")->required();
    ng->add_option("--scenario", ng_scenario, "scenario file")->required();
    ng->add_option("--sessions", ng_sessions, "session count");
    ng->add_option("--deadline-rounds", ng_deadline, "deadline in rounds");
    ng->add_option("--seed", ng_seed, "seed")->required();
    ng->add_option("--out", ng_out, "output directory")->required();

    // tournament
    std::string tn_spec, tn_out;
    auto* tn = app.add_subcommand("tournament", "run a tournament from a spec file");
    tn->add_option("--spec", tn_spec, "tournament spec json")->required();
    tn->add_option("--out", tn_out, "report directory")->required();

    // report
    std::string rp_dir;
    auto* rp = app.add_subcommand("report", "summarize a tournament directory");
    rp->add_option("--tournament-dir", rp_dir, "directory written by `tournament`")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_scenario(gs_seed, gs_card, gs_opp, gs_out);
        if (train->parsed())
            return cmd_train_strategy(ts_opponent, ts_scenario, ts_preset, ts_seed, ts_out,
                                      ts_epochs, ts_deadline);
        if (clf->parsed())
            return cmd_train_classifier(tc_pool, tc_scenario, tc_k, tc_sessions, tc_epochs,
                                        tc_seed, tc_out);
        if (mp->parsed()) return cmd_make_pool(mp_bundles, mp_classifier, mp_out);
        if (rv->parsed()) return cmd_review(rv_candidate, rv_pool, rv_config);
        if (ng->parsed())
            return cmd_negotiate(ng_a, ng_b, ng_scenario, ng_sessions, ng_deadline, ng_seed,
                                 ng_out);
        if (tn->parsed()) return cmd_tournament(tn_spec, tn_out);
        if (rp->parsed()) return cmd_report(rp_dir);
    } catch (const std::exception& e) {
        remove_partial_outputs();
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
