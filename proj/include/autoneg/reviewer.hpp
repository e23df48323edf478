#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoneg/baselines.hpp"
#include "autoneg/classifier.hpp"
#include "autoneg/pool.hpp"
#include "autoneg/sac.hpp"
#include "autoneg/stats.hpp"
#include "autoneg/switching.hpp"

namespace autoneg {

struct ReviewerConfig {
    double alpha_threshold = 1.1;
    double beta_threshold = 1.1;
    int eval_sessions = 50;
    int deadline_rounds = 100;
    Scenario eval_scenario;
    std::string eval_scenario_id;
    SacConfig sac = SacConfig::desk();
    ClassifierTrainOptions classifier;
    int classifier_sessions_per_class = 60;
    std::size_t classifier_k = 20;
    SwitchConfig switching;
    std::uint64_t seed = 0;
};

struct EvalScore {
    double mean = 0.0;
    int sessions = 0;
    double stddev = 0.0;
};

// Mean utility of `strategy` against `opponent` over seeded, balanced
// sessions in one scenario. Session failures count as reservation.
inline EvalScore eval_score(const NegotiatorFactory& opponent, const NegotiatorFactory& strategy,
                            const Scenario& scenario, int sessions, int deadline_rounds,
                            std::uint64_t seed) {
    if (sessions < 1) throw ConfigError("eval_sessions must be >= 1");
    BalancedRuns runs = run_balanced_sessions(strategy, opponent, scenario,
                                              SessionConfig{deadline_rounds, seed}, sessions);
    std::vector<double> utilities;
    utilities.reserve(runs.outcomes.size());
    for (const SessionOutcome& o : runs.outcomes) utilities.push_back(o.utility_a);
    const Summary s = summarize(utilities);
    return EvalScore{s.mean, static_cast<int>(s.n), s.stddev};
}

struct CrossEvalRow {
    std::string negotiator_id;
    double candidate_score = 0.0;  // Eval(N_k, candidate)
    double incumbent_score = 0.0;  // Eval(N_k, s_k)
    bool replaced = false;
};

struct ReviewDecision {
    std::string candidate_id;
    bool accepted = false;
    double e_f = 0.0;  // Eval(candidate, current agent)
    double e_s = 0.0;  // Eval(candidate, freshly trained strategy)
    double alpha_threshold = 0.0;
    double beta_threshold = 0.0;
    std::vector<CrossEvalRow> cross_evaluation;
    StrategyPool pool;  // resulting pool; identical to the input on reject
    std::vector<TrainCurvePoint> training_curve;
};

namespace detail {

inline NegotiatorFactory pool_agent_factory(const StrategyPool& pool,
                                            const SwitchConfig& switching) {
    auto shared = std::make_shared<StrategyPool>(pool);
    return make_rl_agent(std::move(shared), switching);
}

inline void retrain_pool_classifier(StrategyPool& pool, const ReviewerConfig& cfg,
                                    std::uint64_t seed) {
    if (pool.size() < 2) {
        pool.classifier.reset();
        return;
    }
    WindowDataset ds =
        build_dataset(pool.class_order(), cfg.eval_scenario, cfg.classifier_sessions_per_class,
                      cfg.classifier_k, derive_seed(seed, 1),
                      DatasetOptions{cfg.deadline_rounds, 0});
    ClassifierTrainOptions opts = cfg.classifier;
    opts.seed = derive_seed(seed, 2);
    pool.classifier = train_classifier(ds, opts);
}

}  // namespace detail

// Candidate negotiator flow: train a strategy against it, compare with the
// current agent, and on acceptance grow the pool, retrain the classifier
// for the enlarged class set, then cross-evaluate the new strategy against
// the incumbent pairs.
inline ReviewDecision review_new_negotiator(const std::string& candidate_id,
                                            const StrategyPool& pool,
                                            const ReviewerConfig& cfg) {
    NegotiatorFactory candidate = make_baseline_factory(candidate_id);

    ReviewDecision decision;
    decision.candidate_id = candidate_id;
    decision.alpha_threshold = cfg.alpha_threshold;
    decision.beta_threshold = cfg.beta_threshold;
    decision.pool = pool;

    TrainResult trained;
    try {
        trained = train_sac(candidate_id, cfg.eval_scenario, cfg.sac, derive_seed(cfg.seed, 10),
                            cfg.eval_scenario_id);
    } catch (const std::exception& e) {
        throw Error(std::string("reviewer: training against candidate failed: ") + e.what());
    }
    decision.training_curve = trained.curve;

    const std::uint64_t eval_seed = derive_seed(cfg.seed, 20);
    decision.e_f = eval_score(candidate, detail::pool_agent_factory(pool, cfg.switching),
                              cfg.eval_scenario, cfg.eval_sessions, cfg.deadline_rounds,
                              eval_seed)
                       .mean;
    decision.e_s = eval_score(candidate, make_bundle_negotiator(trained.bundle),
                              cfg.eval_scenario, cfg.eval_sessions, cfg.deadline_rounds,
                              eval_seed)
                       .mean;
    decision.accepted = decision.e_s >= cfg.alpha_threshold * decision.e_f;
    if (!decision.accepted) return decision;

    decision.pool.entries.push_back({candidate_id, trained.bundle});
    detail::retrain_pool_classifier(decision.pool, cfg, derive_seed(cfg.seed, 30));

    // cross-evaluation against the incumbent pairs
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const std::string& nk = pool.entries[k].negotiator_id;
        NegotiatorFactory base = make_baseline_factory(nk);
        const std::uint64_t cross_seed = derive_seed(cfg.seed, 40 + k);
        CrossEvalRow row;
        row.negotiator_id = nk;
        row.candidate_score = eval_score(base, make_bundle_negotiator(trained.bundle),
                                         cfg.eval_scenario, cfg.eval_sessions,
                                         cfg.deadline_rounds, cross_seed)
                                  .mean;
        row.incumbent_score = eval_score(base, make_bundle_negotiator(pool.entries[k].bundle),
                                         cfg.eval_scenario, cfg.eval_sessions,
                                         cfg.deadline_rounds, cross_seed)
                                  .mean;
        row.replaced = row.candidate_score >= cfg.beta_threshold * row.incumbent_score;
        if (row.replaced) decision.pool.entries[k].bundle = trained.bundle;
        decision.cross_evaluation.push_back(std::move(row));
    }
    decision.pool.validate();
    return decision;
}

// Candidate strategy flow: per base negotiator, replace the incumbent pair
// when the candidate clears the beta threshold. The class set is unchanged,
// so the classifier stays as is.
inline ReviewDecision review_new_strategy(const StrategyBundle& candidate,
                                          const StrategyPool& pool, const ReviewerConfig& cfg) {
    ReviewDecision decision;
    decision.candidate_id = "strategy:" + candidate.trained_vs;
    decision.alpha_threshold = cfg.alpha_threshold;
    decision.beta_threshold = cfg.beta_threshold;
    decision.pool = pool;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const std::string& nk = pool.entries[k].negotiator_id;
        NegotiatorFactory base = make_baseline_factory(nk);
        const std::uint64_t cross_seed = derive_seed(cfg.seed, 40 + k);
        CrossEvalRow row;
        row.negotiator_id = nk;
        row.candidate_score = eval_score(base, make_bundle_negotiator(candidate),
                                         cfg.eval_scenario, cfg.eval_sessions,
                                         cfg.deadline_rounds, cross_seed)
                                  .mean;
        row.incumbent_score = eval_score(base, make_bundle_negotiator(pool.entries[k].bundle),
                                         cfg.eval_scenario, cfg.eval_sessions,
                                         cfg.deadline_rounds, cross_seed)
                                  .mean;
        row.replaced = row.candidate_score >= cfg.beta_threshold * row.incumbent_score;
        if (row.replaced) decision.pool.entries[k].bundle = candidate;
        decision.cross_evaluation.push_back(std::move(row));
    }
    decision.accepted = false;
    for (const CrossEvalRow& r : decision.cross_evaluation)
        if (r.replaced) decision.accepted = true;
    return decision;
}

inline nlohmann::ordered_json review_to_json(const ReviewDecision& d) {
    nlohmann::ordered_json j;
    j["candidate"] = d.candidate_id;
    j["e_f"] = d.e_f;
    j["e_s"] = d.e_s;
    j["alpha_threshold"] = d.alpha_threshold;
    j["beta_threshold"] = d.beta_threshold;
    j["decision"] = d.accepted ? "accept" : "reject";
    j["cross_evaluation"] = nlohmann::ordered_json::array();
    for (const CrossEvalRow& r : d.cross_evaluation) {
        nlohmann::ordered_json jr;
        jr["negotiator"] = r.negotiator_id;
        jr["candidate_score"] = r.candidate_score;
        jr["incumbent_score"] = r.incumbent_score;
        jr["replaced"] = r.replaced;
        j["cross_evaluation"].push_back(std::move(jr));
    }
    j["pool"] = d.pool.class_order();
    return j;
}

}  // namespace autoneg
