#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "autoneg/benchmark.hpp"
#include "autoneg/baselines.hpp"

using namespace autoneg;

namespace {

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

TournamentSpec small_spec(int sessions = 12, std::uint64_t seed = 42) {
    TournamentSpec spec;
    spec.agents.push_back({"boulware", make_baseline_factory("boulware")});
    spec.agents.push_back({"tit_for_tat", make_baseline_factory("tit_for_tat")});
    spec.agents.push_back({"random", make_baseline_factory("random")});
    spec.scenarios.push_back({"d0", generate_scenario(81, 60, 0.15)});
    spec.scenarios.push_back({"d1", generate_scenario(83, 80, 0.3)});
    spec.sessions_per_pair = sessions;
    spec.deadline_rounds = 30;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("benchmark formulas on hand-built tensors") {
    // |A| = 2, |D| = 1: S_a = (0.5 + 0.7) / 2
    UtilityTensor t(2, 1);
    t.at(0, 0, 0) = 0.5;
    t.at(0, 1, 0) = 0.7;
    t.at(1, 0, 0) = 0.4;
    t.at(1, 1, 0) = 0.9;
    REQUIRE_THAT(self_utility_benchmark(t, 0), Catch::Matchers::WithinAbs(0.6, 1e-15));
    // O_0 with one opponent: mean over domains of U[1][0][d]
    REQUIRE_THAT(opponent_benchmark(t, 0), Catch::Matchers::WithinAbs(0.4, 1e-15));
    // D_0 = mean over a of per-agent means
    REQUIRE_THAT(domain_benchmark(t, 0),
                 Catch::Matchers::WithinAbs(((0.5 + 0.7) / 2 + (0.4 + 0.9) / 2) / 2, 1e-15));

    // constant tensor: every benchmark equals the constant
    UtilityTensor c(3, 2);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t d = 0; d < 2; ++d) c.at(a, b, d) = 0.37;
    REQUIRE_THAT(self_utility_benchmark(c, 1), Catch::Matchers::WithinAbs(0.37, 1e-15));
    REQUIRE_THAT(opponent_benchmark(c, 2), Catch::Matchers::WithinAbs(0.37, 1e-15));
    REQUIRE_THAT(domain_benchmark(c, 0), Catch::Matchers::WithinAbs(0.37, 1e-15));
}

TEST_CASE("hand-computed 3-agent 2-domain table") {
    UtilityTensor t(3, 2);
    double v = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t d = 0; d < 2; ++d) t.at(a, b, d) = (v += 0.01);
    // O_1 = (U[0][1][0] + U[0][1][1] + U[2][1][0] + U[2][1][1]) / 4
    const double expected =
        (t.at(0, 1, 0) + t.at(0, 1, 1) + t.at(2, 1, 0) + t.at(2, 1, 1)) / 4.0;
    REQUIRE_THAT(opponent_benchmark(t, 1), Catch::Matchers::WithinAbs(expected, 1e-15));
    // lower O means opponents extract less: ordering check
    UtilityTensor soft(2, 1), hard(2, 1);
    soft.at(1, 0, 0) = 0.9;  // opponents do well against agent 0
    hard.at(1, 0, 0) = 0.2;  // opponents do poorly
    REQUIRE(opponent_benchmark(hard, 0) < opponent_benchmark(soft, 0));
    REQUIRE_THROWS_AS(opponent_benchmark(UtilityTensor(1, 1), 0), ConfigError);
}

TEST_CASE("always-accept agents give a finite, sane tensor") {
    TournamentSpec spec;
    spec.agents.push_back({"acc_a", [] { return std::make_unique<AcceptAll>(); }});
    spec.agents.push_back({"acc_b", [] { return std::make_unique<AcceptAll>(); }});
    spec.scenarios.push_back({"d0", generate_scenario(85, 50, 0.2)});
    spec.sessions_per_pair = 8;
    spec.deadline_rounds = 10;
    spec.seed = 5;
    TournamentResult r = run_tournament(spec);
    REQUIRE(r.session_errors == 0);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
            const double u = r.tensor.at(a, b, 0);
            REQUIRE(std::isfinite(u));
            REQUIRE(u >= 0.0);
            REQUIRE(u <= 1.0);
        }
    // every session ended in the first round with an agreement
    for (const SessionRecord& rec : r.records) {
        REQUIRE(rec.agreement);
        REQUIRE(rec.rounds == 1);
    }
}

TEST_CASE("identical agents are swap-symmetric within noise") {
    TournamentSpec spec;
    spec.agents.push_back({"rand_a", make_baseline_factory("random")});
    spec.agents.push_back({"rand_b", make_baseline_factory("random")});
    spec.scenarios.push_back({"d0", generate_scenario(87, 60, 0.2)});
    spec.sessions_per_pair = 200;
    spec.deadline_rounds = 20;
    spec.seed = 6;
    TournamentResult r = run_tournament(spec);
    REQUIRE_THAT(r.tensor.at(0, 1, 0),
                 Catch::Matchers::WithinAbs(r.tensor.at(1, 0, 0), 0.1));
}

TEST_CASE("tournament runs are deterministic and parallel-invariant") {
    TournamentSpec spec = small_spec();
    TournamentResult r1 = run_tournament(spec);
    TournamentResult r2 = run_tournament(spec);
    spec.jobs = 4;
    TournamentResult r4 = run_tournament(spec);
    REQUIRE(r1.records.size() == r2.records.size());
    REQUIRE(r1.records.size() == r4.records.size());
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
        REQUIRE(r1.records[i].utility_a == r2.records[i].utility_a);
        REQUIRE(r1.records[i].utility_a == r4.records[i].utility_a);
        REQUIRE(r1.records[i].utility_b == r4.records[i].utility_b);
    }
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t d = 0; d < 2; ++d)
                REQUIRE(r1.tensor.at(a, b, d) == r4.tensor.at(a, b, d));
}

TEST_CASE("benchmarks equal brute-force re-aggregation of the raw records") {
    TournamentSpec spec = small_spec(10, 43);
    TournamentResult r = run_tournament(spec);
    const std::size_t A = 3, D = 2;
    // independent re-aggregation: plain sums straight from the records
    std::vector<double> sum(A * A * D, 0.0);
    std::vector<int> cnt(A * A * D, 0);
    const auto idx = [&](int a, int b, int d) { return (a * 3 + b) * 2 + d; };
    for (const SessionRecord& rec : r.records) {
        sum[idx(rec.a, rec.b, rec.d)] += rec.utility_a;
        cnt[idx(rec.a, rec.b, rec.d)] += 1;
        if (rec.a != rec.b) {
            sum[idx(rec.b, rec.a, rec.d)] += rec.utility_b;
            cnt[idx(rec.b, rec.a, rec.d)] += 1;
        } else {
            sum[idx(rec.a, rec.a, rec.d)] += rec.utility_b;
            cnt[idx(rec.a, rec.a, rec.d)] += 1;
        }
    }
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = 0; b < A; ++b)
            for (std::size_t d = 0; d < D; ++d)
                REQUIRE_THAT(r.tensor.at(a, b, d),
                             Catch::Matchers::WithinAbs(
                                 sum[idx(a, b, d)] / cnt[idx(a, b, d)], 1e-12));
    // S_a from raw logs
    for (std::size_t a = 0; a < A; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < A; ++b)
            for (std::size_t d = 0; d < D; ++d) s += r.tensor.at(a, b, d);
        REQUIRE_THAT(self_utility_benchmark(r.tensor, a),
                     Catch::Matchers::WithinAbs(s / (A * D), 1e-12));
    }
}

TEST_CASE("report carries benchmark vectors, error bars and corrected tests") {
    TournamentSpec spec = small_spec(16, 44);
    TournamentResult r = run_tournament(spec);
    BenchmarkReport rep = make_report(spec, r, 0);
    REQUIRE(rep.S.size() == 3);
    REQUIRE(rep.O.size() == 3);
    REQUIRE(rep.D.size() == 2);
    REQUIRE(rep.S_std_domains.size() == 3);
    // significance families: (A-1) self + (A-1) opponent + D domain rows
    REQUIRE(rep.significance.size() == 2 + 2 + 2);
    for (const SignificanceRow& row : rep.significance) {
        if (row.benchmark == "domain") {
            REQUIRE_THAT(row.threshold, Catch::Matchers::WithinAbs(0.05 / 2, 1e-15));
        } else {
            REQUIRE_THAT(row.threshold, Catch::Matchers::WithinAbs(0.05 / 2, 1e-15));
        }
        REQUIRE(row.p >= 0.0);
        REQUIRE(row.p <= 1.0);
        REQUIRE(row.significant == (row.p < row.threshold));
    }
}

TEST_CASE("report files are written and reproducible") {
    TournamentSpec spec = small_spec(6, 45);
    TournamentResult r = run_tournament(spec);
    BenchmarkReport rep = make_report(spec, r, 0);
    const std::string dir = "bench_report_test_out";
    write_report_csvs(dir, rep, r.records);
    for (const char* f : {"self_utility.csv", "opponent.csv", "domain.csv", "pvalues.csv",
                          "long.csv", "sessions.csv", "summary.json"}) {
        std::ifstream in(std::filesystem::path(dir) / f);
        REQUIRE(in.good());
    }
    std::filesystem::remove_all(dir);
}
