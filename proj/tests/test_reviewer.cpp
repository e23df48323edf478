#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "autoneg/reviewer.hpp"

using namespace autoneg;

namespace {

StrategyBundle constant_bundle(double target_utility, const std::string& trained_vs) {
    Network net(7, 1, {LayerSpec::dense(2, Activation::linear)});
    net.biases()[0].data[0] = std::atanh(2.0 * target_utility - 1.0);
    net.biases()[0].data[1] = -5.0;
    StrategyBundle b;
    b.actor = std::move(net);
    b.acceptance = AcceptancePolicy::ac_next();
    b.trained_vs = trained_vs;
    return b;
}

class AcceptAll : public Negotiator {
public:
    void on_session_start(const NegotiationContext& ctx) override { space_ = ctx.space; }
    Action act(double, const std::optional<Outcome>& standing,
               const std::optional<Outcome>&) override {
        if (standing) return Action::accept();
        return Action::offer(space_->outcome_at(0));
    }

private:
    const OutcomeSpace* space_ = nullptr;
};

ReviewerConfig tiny_reviewer_config(std::uint64_t seed) {
    ReviewerConfig cfg;
    cfg.eval_scenario = generate_scenario(71, 90, 0.2);
    cfg.eval_scenario_id = "unit-eval";
    cfg.eval_sessions = 12;
    cfg.deadline_rounds = 25;
    cfg.sac = SacConfig::desk();
    cfg.sac.critic_layers = {12, 12};
    cfg.sac.actor_layers = {12, 12};
    cfg.sac.epochs = 150;
    cfg.sac.initial_collect_steps = 60;
    cfg.sac.batch = 24;
    cfg.sac.deadline_rounds = 15;
    cfg.sac.eval_period = 0;
    cfg.classifier.epochs = 2;
    cfg.classifier_sessions_per_class = 3;
    cfg.classifier_k = 10;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("eval score equals the trace-derived mean against an accept-all opponent") {
    ReviewerConfig cfg = tiny_reviewer_config(1);
    StrategyBundle b = constant_bundle(0.62, "x");
    auto strategy = make_bundle_negotiator(b);
    auto opponent = [] { return std::make_unique<AcceptAll>(); };
    const std::uint64_t seed = 99;
    EvalScore s = eval_score(opponent, strategy, cfg.eval_scenario, 8, cfg.deadline_rounds, seed);

    // independent oracle: rerun the same balanced block and read the traces
    BalancedRuns runs = run_balanced_sessions(strategy, opponent, cfg.eval_scenario,
                                              SessionConfig{cfg.deadline_rounds, seed}, 8);
    KahanSum mean;
    for (const SessionOutcome& o : runs.outcomes) mean.add(o.utility_a);
    REQUIRE_THAT(s.mean, Catch::Matchers::WithinAbs(mean.mean(), 1e-15));
    REQUIRE(s.sessions == 8);

    EvalScore one = eval_score(opponent, strategy, cfg.eval_scenario, 1, cfg.deadline_rounds, 7);
    BalancedRuns single = run_balanced_sessions(strategy, opponent, cfg.eval_scenario,
                                                SessionConfig{cfg.deadline_rounds, 7}, 1);
    REQUIRE(one.mean == single.outcomes[0].utility_a);

    EvalScore again = eval_score(opponent, strategy, cfg.eval_scenario, 8, cfg.deadline_rounds,
                                 seed);
    REQUIRE(again.mean == s.mean);
}

TEST_CASE("identical candidate strategy never replaces at beta = 1.1") {
    ReviewerConfig cfg = tiny_reviewer_config(2);
    StrategyPool pool;
    pool.entries.push_back({"random", constant_bundle(0.7, "random")});
    ReviewDecision d = review_new_strategy(pool.entries[0].bundle, pool, cfg);
    REQUIRE_FALSE(d.accepted);
    REQUIRE(d.cross_evaluation.size() == 1);
    REQUIRE(d.cross_evaluation[0].candidate_score == d.cross_evaluation[0].incumbent_score);
    REQUIRE_FALSE(d.cross_evaluation[0].replaced);
    REQUIRE(bundle_to_json(d.pool.entries[0].bundle).dump() ==
            bundle_to_json(pool.entries[0].bundle).dump());
}

TEST_CASE("dominating candidate strategy replaces the incumbent") {
    ReviewerConfig cfg = tiny_reviewer_config(3);
    StrategyPool pool;
    // incumbent gives nearly everything away; any sane strategy dominates
    pool.entries.push_back({"random", constant_bundle(0.05, "random")});
    StrategyBundle candidate = constant_bundle(0.9, "random");
    ReviewDecision d = review_new_strategy(candidate, pool, cfg);
    REQUIRE(d.cross_evaluation[0].candidate_score >
            1.1 * d.cross_evaluation[0].incumbent_score);
    REQUIRE(d.cross_evaluation[0].replaced);
    REQUIRE(d.accepted);
    REQUIRE(bundle_to_json(d.pool.entries[0].bundle).dump() ==
            bundle_to_json(candidate).dump());
}

TEST_CASE("empty pool review is a no-op") {
    ReviewerConfig cfg = tiny_reviewer_config(4);
    StrategyPool pool;
    ReviewDecision d = review_new_strategy(constant_bundle(0.5, "x"), pool, cfg);
    REQUIRE_FALSE(d.accepted);
    REQUIRE(d.cross_evaluation.empty());
    REQUIRE(d.pool.size() == 0);
}

TEST_CASE("negotiator review applies the alpha rule and mutates only on accept") {
    ReviewerConfig cfg = tiny_reviewer_config(5);
    StrategyPool pool;
    pool.entries.push_back({"random", constant_bundle(0.55, "random")});

    ReviewDecision d = review_new_negotiator("boulware", pool, cfg);
    REQUIRE(d.accepted == (d.e_s >= cfg.alpha_threshold * d.e_f));
    if (d.accepted) {
        REQUIRE(d.pool.size() == 2);
        REQUIRE(d.pool.class_order() ==
                std::vector<std::string>{"random", "boulware"});
        REQUIRE(d.pool.classifier.has_value());
        REQUIRE(d.pool.classifier->class_order == d.pool.class_order());
        REQUIRE(d.cross_evaluation.size() == 1);
    } else {
        REQUIRE(d.pool.size() == 1);
        REQUIRE_FALSE(d.pool.classifier.has_value());
        REQUIRE(bundle_to_json(d.pool.entries[0].bundle).dump() ==
                bundle_to_json(pool.entries[0].bundle).dump());
    }
    REQUIRE(review_to_json(d).contains("decision"));
}

TEST_CASE("review decisions are deterministic given seeds") {
    ReviewerConfig cfg = tiny_reviewer_config(6);
    StrategyPool pool;
    pool.entries.push_back({"random", constant_bundle(0.5, "random")});
    ReviewDecision a = review_new_negotiator("tit_for_tat", pool, cfg);
    ReviewDecision b = review_new_negotiator("tit_for_tat", pool, cfg);
    REQUIRE(a.accepted == b.accepted);
    REQUIRE(a.e_f == b.e_f);
    REQUIRE(a.e_s == b.e_s);
    REQUIRE(review_to_json(a).dump() == review_to_json(b).dump());
}

TEST_CASE("unknown candidate ids are configuration errors") {
    ReviewerConfig cfg = tiny_reviewer_config(7);
    StrategyPool pool;
    pool.entries.push_back({"random", constant_bundle(0.5, "random")});
    REQUIRE_THROWS_AS(review_new_negotiator("atlas3", pool, cfg), ConfigError);
}
