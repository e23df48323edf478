#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "autoneg/domain.hpp"
#include "autoneg/protocol.hpp"
#include "autoneg/stats.hpp"
#include "autoneg/text.hpp"

namespace autoneg {

struct AgentSpec {
    std::string name;
    NegotiatorFactory factory;
};

struct NamedScenario {
    std::string id;
    Scenario scenario;
};

struct TournamentSpec {
    std::vector<AgentSpec> agents;
    std::vector<NamedScenario> scenarios;
    int sessions_per_pair = 100;
    int deadline_rounds = 100;
    std::uint64_t seed = 0;
    int jobs = 1;  // independent pair x scenario cells may run concurrently
};

// One session of an unordered pair in one domain; the canonical raw log row.
struct SessionRecord {
    int a = 0, b = 0, d = 0;
    int session = 0;
    double utility_a = 0.0, utility_b = 0.0;
    bool agreement = false;
    int rounds = 0;
};

// U[a][b][d]: mean utility achieved by a against b in domain d. The
// diagonal holds self-play, averaged over both seats.
class UtilityTensor {
public:
    UtilityTensor() = default;
    UtilityTensor(std::size_t agents, std::size_t domains)
        : A_(agents), D_(domains), u_(agents * agents * domains, 0.0) {}

    std::size_t agents() const { return A_; }
    std::size_t domains() const { return D_; }
    double& at(std::size_t a, std::size_t b, std::size_t d) {
        return u_[(a * A_ + b) * D_ + d];
    }
    double at(std::size_t a, std::size_t b, std::size_t d) const {
        return u_[(a * A_ + b) * D_ + d];
    }

private:
    std::size_t A_ = 0, D_ = 0;
    std::vector<double> u_;
};

struct TournamentResult {
    UtilityTensor tensor;
    std::vector<SessionRecord> records;
    int session_errors = 0;
};

// Aggregates the tensor from the raw records with compensated summation.
// Exposed so reports and oracles share one code path.
inline UtilityTensor aggregate_tensor(std::size_t agents, std::size_t domains,
                                      const std::vector<SessionRecord>& records) {
    UtilityTensor t(agents, domains);
    std::vector<KahanSum> fwd(agents * agents * domains), rev(agents * agents * domains);
    const auto idx = [&](std::size_t a, std::size_t b, std::size_t d) {
        return (a * agents + b) * domains + d;
    };
    for (const SessionRecord& r : records) {
        fwd[idx(r.a, r.b, r.d)].add(r.utility_a);
        rev[idx(r.a, r.b, r.d)].add(r.utility_b);
    }
    for (std::size_t a = 0; a < agents; ++a) {
        for (std::size_t b = 0; b < agents; ++b) {
            for (std::size_t d = 0; d < domains; ++d) {
                if (a == b) {
                    const KahanSum& f = fwd[idx(a, a, d)];
                    const KahanSum& g = rev[idx(a, a, d)];
                    if (f.count())
                        t.at(a, a, d) = (f.sum() + g.sum()) /
                                        static_cast<double>(f.count() + g.count());
                } else if (a < b) {
                    const KahanSum& f = fwd[idx(a, b, d)];
                    if (f.count()) t.at(a, b, d) = f.mean();
                } else {
                    const KahanSum& g = rev[idx(b, a, d)];
                    if (g.count()) t.at(a, b, d) = g.mean();
                }
            }
        }
    }
    return t;
}

// Runs every unordered agent pair (self-play included) in every scenario.
// Cells are independent; with jobs > 1 they run on a small thread pool and
// results are still assembled in a fixed order, so output is identical.
inline TournamentResult run_tournament(const TournamentSpec& spec) {
    if (spec.agents.size() < 2) throw ConfigError("tournament needs at least 2 agents");
    if (spec.scenarios.empty()) throw ConfigError("tournament needs at least 1 scenario");
    const std::size_t A = spec.agents.size();
    const std::size_t D = spec.scenarios.size();

    struct Cell {
        std::size_t a, b, d;
        std::uint64_t seed;
        BalancedRuns runs;
    };
    std::vector<Cell> cells;
    std::uint64_t cell_counter = 0;
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = a; b < A; ++b)
            for (std::size_t d = 0; d < D; ++d)
                cells.push_back({a, b, d, derive_seed(spec.seed, 9000 + cell_counter++), {}});

    const auto run_cell = [&](Cell& cell) {
        cell.runs = run_balanced_sessions(spec.agents[cell.a].factory,
                                          spec.agents[cell.b].factory,
                                          spec.scenarios[cell.d].scenario,
                                          SessionConfig{spec.deadline_rounds, cell.seed},
                                          spec.sessions_per_pair);
    };

    if (spec.jobs <= 1) {
        for (Cell& c : cells) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const int n_threads = std::min<int>(spec.jobs, static_cast<int>(cells.size()));
        for (int t = 0; t < n_threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells.size();
                     i = next.fetch_add(1))
                    run_cell(cells[i]);
            });
        }
        for (std::thread& w : workers) w.join();
    }

    TournamentResult result;
    for (const Cell& c : cells) {
        result.session_errors += c.runs.errors;
        for (std::size_t i = 0; i < c.runs.outcomes.size(); ++i) {
            const SessionOutcome& o = c.runs.outcomes[i];
            SessionRecord r;
            r.a = static_cast<int>(c.a);
            r.b = static_cast<int>(c.b);
            r.d = static_cast<int>(c.d);
            r.session = static_cast<int>(i);
            r.utility_a = o.utility_a;
            r.utility_b = o.utility_b;
            r.agreement = o.agreement.has_value();
            r.rounds = o.rounds_used;
            result.records.push_back(r);
        }
    }
    result.tensor = aggregate_tensor(A, D, result.records);
    return result;
}

// S_a: mean utility of a over every opponent (self included) and domain.
inline double self_utility_benchmark(const UtilityTensor& t, std::size_t a) {
    KahanSum s;
    for (std::size_t d = 0; d < t.domains(); ++d)
        for (std::size_t b = 0; b < t.agents(); ++b) s.add(t.at(a, b, d));
    return s.sum() / static_cast<double>(t.agents() * t.domains());
}

// O_a: mean utility the other agents achieve against a.
inline double opponent_benchmark(const UtilityTensor& t, std::size_t a) {
    if (t.agents() < 2) throw ConfigError("opponent benchmark undefined for a single agent");
    KahanSum s;
    for (std::size_t d = 0; d < t.domains(); ++d)
        for (std::size_t b = 0; b < t.agents(); ++b)
            if (b != a) s.add(t.at(b, a, d));
    return s.sum() / static_cast<double>((t.agents() - 1) * t.domains());
}

// D_d: per-agent mean over opponents, averaged over agents.
inline double domain_benchmark(const UtilityTensor& t, std::size_t d) {
    KahanSum outer;
    for (std::size_t a = 0; a < t.agents(); ++a) {
        KahanSum inner;
        for (std::size_t b = 0; b < t.agents(); ++b) inner.add(t.at(a, b, d));
        outer.add(inner.sum() / static_cast<double>(t.agents()));
    }
    return outer.sum() / static_cast<double>(t.agents());
}

struct SignificanceRow {
    std::string benchmark;  // "self_utility" | "opponent" | "domain"
    std::string comparison;
    double mean_focal = 0.0, mean_other = 0.0;
    double t = 0.0, df = 0.0, p = 1.0;
    double threshold = 0.05;
    bool significant = false;
};

struct BenchmarkReport {
    std::vector<std::string> agent_names;
    std::vector<std::string> scenario_ids;
    UtilityTensor tensor;
    std::vector<double> S, O;         // per agent
    std::vector<double> D;            // per domain
    std::vector<double> S_std_domains, O_std_domains;  // spread of per-domain scores
    std::vector<SignificanceRow> significance;
    int session_errors = 0;
};

namespace detail {

// Session-level utility samples earned by agent x, optionally restricted
// to one domain; self-play contributes both seats.
inline std::vector<double> utilities_of_agent(const std::vector<SessionRecord>& records, int x,
                                              int domain = -1) {
    std::vector<double> xs;
    for (const SessionRecord& r : records) {
        if (domain >= 0 && r.d != domain) continue;
        if (r.a == x) xs.push_back(r.utility_a);
        if (r.b == x) xs.push_back(r.utility_b);
    }
    return xs;
}

// Utilities earned by other agents while facing x (self-play excluded).
inline std::vector<double> utilities_against_agent(const std::vector<SessionRecord>& records,
                                                   int x) {
    std::vector<double> xs;
    for (const SessionRecord& r : records) {
        if (r.a == r.b) continue;
        if (r.a == x) xs.push_back(r.utility_b);
        if (r.b == x) xs.push_back(r.utility_a);
    }
    return xs;
}

}  // namespace detail

// Pure function of the tournament output. Significance follows the
// published protocol: Welch t-tests of the focal agent against every other
// agent (self-utility and opponent benchmarks) and against the field per
// domain, each family Bonferroni-corrected at 0.05.
inline BenchmarkReport make_report(const TournamentSpec& spec, const TournamentResult& result,
                                   std::size_t focal = 0) {
    const std::size_t A = spec.agents.size();
    const std::size_t D = spec.scenarios.size();
    BenchmarkReport rep;
    for (const AgentSpec& a : spec.agents) rep.agent_names.push_back(a.name);
    for (const NamedScenario& s : spec.scenarios) rep.scenario_ids.push_back(s.id);
    rep.tensor = result.tensor;
    rep.session_errors = result.session_errors;
    for (std::size_t a = 0; a < A; ++a) {
        rep.S.push_back(self_utility_benchmark(result.tensor, a));
        rep.O.push_back(opponent_benchmark(result.tensor, a));
        // error bars: spread over domains of the per-domain scores
        std::vector<double> s_d, o_d;
        for (std::size_t d = 0; d < D; ++d) {
            KahanSum s, o;
            for (std::size_t b = 0; b < A; ++b) {
                s.add(result.tensor.at(a, b, d));
                if (b != a) o.add(result.tensor.at(b, a, d));
            }
            s_d.push_back(s.sum() / static_cast<double>(A));
            o_d.push_back(o.sum() / static_cast<double>(A - 1));
        }
        rep.S_std_domains.push_back(summarize(s_d).stddev);
        rep.O_std_domains.push_back(summarize(o_d).stddev);
    }
    for (std::size_t d = 0; d < D; ++d) rep.D.push_back(domain_benchmark(result.tensor, d));

    const std::size_t m_agents = A - 1;
    const auto focal_s = detail::utilities_of_agent(result.records, static_cast<int>(focal));
    const auto focal_o = detail::utilities_against_agent(result.records, static_cast<int>(focal));
    for (std::size_t b = 0; b < A; ++b) {
        if (b == focal) continue;
        {
            const auto other = detail::utilities_of_agent(result.records, static_cast<int>(b));
            const TTestResult t = welch_t_test(focal_s, other);
            SignificanceRow row{"self_utility",
                                rep.agent_names[focal] + " vs " + rep.agent_names[b],
                                summarize(focal_s).mean,
                                summarize(other).mean,
                                t.t,
                                t.df,
                                t.p,
                                bonferroni_threshold(m_agents),
                                t.p < bonferroni_threshold(m_agents)};
            rep.significance.push_back(std::move(row));
        }
        {
            const auto other = detail::utilities_against_agent(result.records,
                                                               static_cast<int>(b));
            const TTestResult t = welch_t_test(focal_o, other);
            SignificanceRow row{"opponent",
                                rep.agent_names[focal] + " vs " + rep.agent_names[b],
                                summarize(focal_o).mean,
                                summarize(other).mean,
                                t.t,
                                t.df,
                                t.p,
                                bonferroni_threshold(m_agents),
                                t.p < bonferroni_threshold(m_agents)};
            rep.significance.push_back(std::move(row));
        }
    }
    for (std::size_t d = 0; d < D; ++d) {
        std::vector<double> focal_d =
            detail::utilities_of_agent(result.records, static_cast<int>(focal),
                                       static_cast<int>(d));
        std::vector<double> field;
        for (const SessionRecord& r : result.records) {
            if (r.d != static_cast<int>(d)) continue;
            if (r.a != static_cast<int>(focal)) field.push_back(r.utility_a);
            if (r.b != static_cast<int>(focal)) field.push_back(r.utility_b);
        }
        const TTestResult t = welch_t_test(focal_d, field);
        SignificanceRow row{"domain",
                            rep.agent_names[focal] + " vs field in " + rep.scenario_ids[d],
                            summarize(focal_d).mean,
                            summarize(field).mean,
                            t.t,
                            t.df,
                            t.p,
                            bonferroni_threshold(D),
                            t.p < bonferroni_threshold(D)};
        rep.significance.push_back(std::move(row));
    }
    return rep;
}

// --- report files -------------------------------------------------------------

inline void write_report_csvs(const std::string& dir, const BenchmarkReport& rep,
                              const std::vector<SessionRecord>& records) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        CsvWriter csv((fs::path(dir) / "self_utility.csv").string());
        csv.row({"agent", "S", "std_over_domains"});
        for (std::size_t a = 0; a < rep.agent_names.size(); ++a)
            csv.row({rep.agent_names[a], fmt_double(rep.S[a]),
                     fmt_double(rep.S_std_domains[a])});
    }
    {
        CsvWriter csv((fs::path(dir) / "opponent.csv").string());
        csv.row({"agent", "O", "std_over_domains"});
        for (std::size_t a = 0; a < rep.agent_names.size(); ++a)
            csv.row({rep.agent_names[a], fmt_double(rep.O[a]),
                     fmt_double(rep.O_std_domains[a])});
    }
    {
        CsvWriter csv((fs::path(dir) / "domain.csv").string());
        csv.row({"domain", "D"});
        for (std::size_t d = 0; d < rep.scenario_ids.size(); ++d)
            csv.row({rep.scenario_ids[d], fmt_double(rep.D[d])});
    }
    {
        CsvWriter csv((fs::path(dir) / "pvalues.csv").string());
        csv.row({"benchmark", "comparison", "mean_focal", "mean_other", "t", "df", "p",
                 "threshold", "significant"});
        for (const SignificanceRow& r : rep.significance)
            csv.row({r.benchmark, r.comparison, fmt_double(r.mean_focal),
                     fmt_double(r.mean_other), fmt_double(r.t), fmt_double(r.df),
                     fmt_double(r.p), fmt_double(r.threshold), r.significant ? "1" : "0"});
    }
    {
        // plot-ready long format: one row per (agent, opponent, domain)
        CsvWriter csv((fs::path(dir) / "long.csv").string());
        csv.row({"agent", "opponent", "domain", "mean", "std", "n"});
        const std::size_t A = rep.agent_names.size();
        for (std::size_t a = 0; a < A; ++a) {
            for (std::size_t b = 0; b < A; ++b) {
                for (std::size_t d = 0; d < rep.scenario_ids.size(); ++d) {
                    std::vector<double> xs;
                    for (const SessionRecord& r : records) {
                        if (r.d != static_cast<int>(d)) continue;
                        if (r.a == static_cast<int>(a) && r.b == static_cast<int>(b))
                            xs.push_back(r.utility_a);
                        if (r.b == static_cast<int>(a) && r.a == static_cast<int>(b))
                            xs.push_back(r.utility_b);
                    }
                    const Summary s = summarize(xs);
                    csv.row({rep.agent_names[a], rep.agent_names[b], rep.scenario_ids[d],
                             fmt_double(s.mean), fmt_double(s.stddev),
                             fmt_int(static_cast<long long>(s.n))});
                }
            }
        }
    }
    {
        CsvWriter csv((fs::path(dir) / "sessions.csv").string());
        csv.row({"agent_a", "agent_b", "domain", "session", "utility_a", "utility_b",
                 "agreement", "rounds"});
        for (const SessionRecord& r : records)
            csv.row({rep.agent_names[r.a], rep.agent_names[r.b], rep.scenario_ids[r.d],
                     fmt_int(r.session), fmt_double(r.utility_a), fmt_double(r.utility_b),
                     r.agreement ? "1" : "0", fmt_int(r.rounds)});
    }
    {
        nlohmann::ordered_json j;
        j["agents"] = rep.agent_names;
        j["domains"] = rep.scenario_ids;
        j["S"] = rep.S;
        j["O"] = rep.O;
        j["D"] = rep.D;
        j["session_errors"] = rep.session_errors;
        std::ofstream out(fs::path(dir) / "summary.json");
        out << j.dump(2) << '\n';
    }
}

}  // namespace autoneg
