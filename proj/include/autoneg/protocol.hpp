#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "autoneg/domain.hpp"
#include "autoneg/errors.hpp"
#include "autoneg/rng.hpp"
#include "autoneg/text.hpp"

namespace autoneg {

enum class ActionKind { offer, accept, end_negotiation };

struct Action {
    ActionKind kind = ActionKind::end_negotiation;
    Outcome outcome;  // meaningful for offers only

    static Action offer(Outcome o) { return {ActionKind::offer, std::move(o)}; }
    static Action accept() { return {ActionKind::accept, {}}; }
    static Action end() { return {ActionKind::end_negotiation, {}}; }
};

struct SessionConfig {
    int deadline_rounds = 100;  // T; one round = one turn for each side
    std::uint64_t seed = 0;
};

struct TraceStep {
    int round;             // 1-based
    int actor;             // 0 = side a, 1 = side b
    double relative_time;  // round / T
    Action action;
};

struct SessionTrace {
    int deadline_rounds = 0;
    std::vector<TraceStep> steps;
};

struct SessionOutcome {
    std::optional<Outcome> agreement;
    double utility_a = 0.0;  // agreement utility, or reservation on no agreement
    double utility_b = 0.0;
    int rounds_used = 0;
    std::optional<int> violation_by;  // actor that broke protocol, if any
};

// Everything a negotiator is allowed to know at session start: its own
// profile, the shared outcome space and deadline, and a private seed.
// The opponent's profile is never exposed.
struct NegotiationContext {
    const OutcomeSpace* space = nullptr;
    PreferenceProfile profile;
    SessionConfig config;
    std::uint64_t seed = 0;
};

class Negotiator {
public:
    virtual ~Negotiator() = default;
    virtual void on_session_start(const NegotiationContext& ctx) = 0;
    // standing: the opponent's most recent offer, if any. own_last: this
    // negotiator's own most recent offer, if any.
    virtual Action act(double t_r, const std::optional<Outcome>& standing,
                       const std::optional<Outcome>& own_last) = 0;
};

using NegotiatorFactory = std::function<std::unique_ptr<Negotiator>()>;

// Turn-by-turn engine for the stacked alternating offers protocol. Both
// run_session and the RL environment drive their sessions through this,
// so acceptance/deadline semantics cannot drift between the two.
class SessionDriver {
public:
    SessionDriver(const Scenario& scenario, const SessionConfig& config)
        : scenario_(&scenario), config_(config) {
        if (config.deadline_rounds < 1) throw ConfigError("deadline_rounds must be >= 1");
        trace_.deadline_rounds = config.deadline_rounds;
    }

    bool done() const { return done_; }
    int current_actor() const { return actor_; }
    int round() const { return round_; }
    double t_r() const { return static_cast<double>(round_) / config_.deadline_rounds; }

    // Offer currently on the table for `actor`, i.e. the other side's last offer.
    const std::optional<Outcome>& standing_for(int actor) const { return last_offer_[1 - actor]; }
    const std::optional<Outcome>& own_last(int actor) const { return last_offer_[actor]; }

    void submit(const Action& action) {
        if (done_) throw StateError("session already finished");
        const int actor = actor_;
        trace_.steps.push_back({round_, actor, t_r(), action});
        switch (action.kind) {
            case ActionKind::accept:
                if (!last_offer_[1 - actor]) {
                    // Accept with nothing on the table: protocol violation,
                    // scored as a walk-away by the violator.
                    violation_by_ = actor;
                    finish(std::nullopt);
                    return;
                }
                finish(last_offer_[1 - actor]);
                return;
            case ActionKind::end_negotiation:
                finish(std::nullopt);
                return;
            case ActionKind::offer:
                scenario_->outcome_space.check(action.outcome);
                last_offer_[actor] = action.outcome;
                break;
        }
        if (actor_ == 0) {
            actor_ = 1;
        } else {
            actor_ = 0;
            if (round_ == config_.deadline_rounds) {
                finish(std::nullopt);  // deadline
                return;
            }
            ++round_;
        }
    }

    SessionOutcome outcome() const {
        if (!done_) throw StateError("session still running");
        return outcome_;
    }

    const SessionTrace& trace() const { return trace_; }

private:
    void finish(const std::optional<Outcome>& agreement) {
        done_ = true;
        outcome_.agreement = agreement;
        outcome_.rounds_used = round_;
        outcome_.violation_by = violation_by_;
        if (agreement) {
            outcome_.utility_a = scenario_->profile_a.utility.value(*agreement);
            outcome_.utility_b = scenario_->profile_b.utility.value(*agreement);
        } else {
            outcome_.utility_a = scenario_->profile_a.reservation_value;
            outcome_.utility_b = scenario_->profile_b.reservation_value;
        }
    }

    const Scenario* scenario_;
    SessionConfig config_;
    SessionTrace trace_;
    std::optional<Outcome> last_offer_[2];
    int actor_ = 0;
    int round_ = 1;
    bool done_ = false;
    std::optional<int> violation_by_;
    SessionOutcome outcome_;
};

struct SessionResult {
    SessionOutcome outcome;
    SessionTrace trace;
};

// Runs one complete session, neg_a moving first.
inline SessionResult run_session(Negotiator& neg_a, Negotiator& neg_b, const Scenario& scenario,
                                 const SessionConfig& config) {
    NegotiationContext ctx_a{&scenario.outcome_space, scenario.profile_a, config,
                             derive_seed(config.seed, 1)};
    NegotiationContext ctx_b{&scenario.outcome_space, scenario.profile_b, config,
                             derive_seed(config.seed, 2)};
    neg_a.on_session_start(ctx_a);
    neg_b.on_session_start(ctx_b);
    SessionDriver driver(scenario, config);
    Negotiator* sides[2] = {&neg_a, &neg_b};
    while (!driver.done()) {
        const int actor = driver.current_actor();
        Action a = sides[actor]->act(driver.t_r(), driver.standing_for(actor),
                                     driver.own_last(actor));
        driver.submit(a);
    }
    return {driver.outcome(), driver.trace()};
}

// `count` independent sessions with per-session derived seeds. The first
// mover alternates (even session index: neg_a starts) so repeated-session
// means carry no first-mover bias. utility_a always refers to side a.
inline std::vector<SessionOutcome> run_many(const NegotiatorFactory& make_a,
                                            const NegotiatorFactory& make_b,
                                            const Scenario& scenario, const SessionConfig& config,
                                            int count) {
    if (count < 1) throw ConfigError("session count must be >= 1");
    std::vector<SessionOutcome> results;
    results.reserve(count);
    for (int i = 0; i < count; ++i) {
        SessionConfig per = config;
        per.seed = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(i));
        auto a = make_a();
        auto b = make_b();
        if (i % 2 == 0) {
            results.push_back(run_session(*a, *b, scenario, per).outcome);
        } else {
            Scenario swapped{scenario.outcome_space, scenario.profile_b, scenario.profile_a};
            SessionOutcome o = run_session(*b, *a, swapped, per).outcome;
            std::swap(o.utility_a, o.utility_b);
            if (o.violation_by) o.violation_by = 1 - *o.violation_by;
            results.push_back(std::move(o));
        }
    }
    return results;
}

struct BalancedRuns {
    std::vector<SessionOutcome> outcomes;  // utility_a always = side a's utility
    int errors = 0;                        // sessions scored as reservation after an exception
};

// Session block balanced over first-mover role and profile assignment
// (all four combinations cycle every four sessions). Building block for
// tournament cells and reviewer evaluations. Per-session failures are
// scored as reservation for both sides and counted, not rethrown.
inline BalancedRuns run_balanced_sessions(const NegotiatorFactory& make_a,
                                          const NegotiatorFactory& make_b,
                                          const Scenario& scenario, const SessionConfig& config,
                                          int count) {
    if (count < 1) throw ConfigError("session count must be >= 1");
    BalancedRuns runs;
    runs.outcomes.reserve(count);
    for (int i = 0; i < count; ++i) {
        const bool swap_profiles = i % 2 == 1;
        const bool b_first = (i / 2) % 2 == 1;
        SessionConfig per = config;
        per.seed = derive_seed(config.seed, 500 + static_cast<std::uint64_t>(i));
        Scenario run_scenario{scenario.outcome_space,
                              swap_profiles ? scenario.profile_b : scenario.profile_a,
                              swap_profiles ? scenario.profile_a : scenario.profile_b};
        SessionOutcome o;
        try {
            auto a = make_a();
            auto b = make_b();
            o = b_first ? run_session(*b, *a, run_scenario, per).outcome
                        : run_session(*a, *b, run_scenario, per).outcome;
            if (b_first) {
                std::swap(o.utility_a, o.utility_b);
                if (o.violation_by) o.violation_by = 1 - *o.violation_by;
            }
        } catch (const std::exception&) {
            o = SessionOutcome{};
            o.utility_a = swap_profiles ? scenario.profile_b.reservation_value
                                        : scenario.profile_a.reservation_value;
            o.utility_b = swap_profiles ? scenario.profile_a.reservation_value
                                        : scenario.profile_b.reservation_value;
            ++runs.errors;
        }
        runs.outcomes.push_back(std::move(o));
    }
    return runs;
}

// Analytics-only export; negotiators never see the opponent-utility column.
inline void export_trace_csv(std::ostream& out, const SessionTrace& trace,
                             const Scenario& scenario) {
    out << "round,actor,action,outcome_id,u_self_of_offer,u_other_of_offer\n";
    for (const TraceStep& s : trace.steps) {
        out << s.round << ',' << (s.actor == 0 ? 'a' : 'b') << ',';
        switch (s.action.kind) {
            case ActionKind::offer: {
                const auto& self = s.actor == 0 ? scenario.profile_a : scenario.profile_b;
                const auto& other = s.actor == 0 ? scenario.profile_b : scenario.profile_a;
                out << "offer," << scenario.outcome_space.index_of(s.action.outcome) << ','
                    << fmt_double(self.utility.value(s.action.outcome)) << ','
                    << fmt_double(other.utility.value(s.action.outcome));
                break;
            }
            case ActionKind::accept:
                out << "accept,,,";
                break;
            case ActionKind::end_negotiation:
                out << "end,,,";
                break;
        }
        out << '\n';
    }
}

}  // namespace autoneg
