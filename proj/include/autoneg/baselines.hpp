#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "autoneg/domain.hpp"
#include "autoneg/protocol.hpp"

namespace autoneg {

// Faratin-family time-dependent concession. F(t) = k0 + (1-k0) * t^(1/e);
// e < 1 concedes late (Boulware), e > 1 concedes early (Conceder).
struct TimeDependentParams {
    double e = 0.2;  // Boulware preset
    double k0 = 0.0;
    double u_min = 0.0;
    double u_max = 1.0;
};

inline double boulware_target(double t_r, const TimeDependentParams& p) {
    const double f = p.k0 + (1.0 - p.k0) * std::pow(t_r, 1.0 / p.e);
    return p.u_min + (p.u_max - p.u_min) * (1.0 - f);
}

// Registry preset. The aspiration floor keeps the agent from conceding to
// zero at the deadline, where any constant hardline bidder would otherwise
// extract the whole surplus.
inline TimeDependentParams boulware_preset() { return {0.2, 0.0, 0.5, 1.0}; }

constexpr std::uint32_t kFullHistory = 0xffffffffu;

// AC_next, AC_time and their disjunction AC_combi.
struct AcceptancePolicy {
    enum class Kind { ac_next, ac_time, ac_combi };
    Kind kind = Kind::ac_combi;
    double t_acc = 0.99;
    std::uint32_t window = kFullHistory;

    static AcceptancePolicy ac_next() { return {Kind::ac_next, 0.0, 1}; }
    static AcceptancePolicy ac_time(double t_acc, std::uint32_t w) {
        return {Kind::ac_time, t_acc, w};
    }
    static AcceptancePolicy ac_combi(double t_acc = 0.99, std::uint32_t w = kFullHistory) {
        return {Kind::ac_combi, t_acc, w};
    }
};

// `recent` holds the utilities (self axis) of previous opponent offers,
// excluding the standing one under consideration.
inline bool accept_decision(const AcceptancePolicy& policy, double t_r, double u_in,
                            double u_next, std::span<const double> recent) {
    const auto ac_next = [&] { return u_in >= u_next; };
    // Strict improvement over the window: a constant bid stream never ties
    // itself into an endgame acceptance.
    const auto ac_time = [&] {
        if (t_r < policy.t_acc) return false;
        double best = 0.0;
        const std::size_t w = std::min<std::size_t>(recent.size(), policy.window);
        for (std::size_t i = recent.size() - w; i < recent.size(); ++i)
            best = std::max(best, recent[i]);
        return u_in > best;
    };
    switch (policy.kind) {
        case AcceptancePolicy::Kind::ac_next:
            return ac_next();
        case AcceptancePolicy::Kind::ac_time:
            return ac_time();
        case AcceptancePolicy::Kind::ac_combi:
            return ac_next() || ac_time();
    }
    return false;
}

// Shared plumbing for the concrete negotiators: profile index, opponent
// offer history on the self axis, acceptance wiring. Subclasses provide
// the target utility for the next bid and optionally the bid itself.
class BaselineNegotiator : public Negotiator {
public:
    explicit BaselineNegotiator(AcceptancePolicy acceptance = AcceptancePolicy::ac_combi())
        : acceptance_(acceptance) {}

    void on_session_start(const NegotiationContext& ctx) override {
        ctx_ = ctx;
        index_ = ProfileIndex(*ctx.space, ctx.profile);
        opponent_history_.clear();
        rng_ = std::make_unique<Rng>(ctx.seed);
        reset_strategy();
    }

    Action act(double t_r, const std::optional<Outcome>& standing,
               const std::optional<Outcome>& own_last) override {
        (void)own_last;
        double u_in = -1.0;
        if (standing) {
            u_in = ctx_.profile.utility.value(*standing);
            opponent_history_.push_back(u_in);
        }
        const double u_next = next_target(t_r);
        if (standing) {
            std::span<const double> recent(opponent_history_.data(),
                                           opponent_history_.size() - 1);
            if (accept_decision(acceptance_, t_r, u_in, u_next, recent)) return Action::accept();
        }
        return make_bid(u_next);
    }

protected:
    virtual void reset_strategy() {}
    // Utility this negotiator plans to realize with its next offer.
    virtual double next_target(double t_r) = 0;
    virtual Action make_bid(double u_next) {
        return Action::offer(
            index_.space().outcome_at(index_.inverse_floored(u_next, reservation(), false)));
    }

    double reservation() const { return ctx_.profile.reservation_value; }
    const std::vector<double>& opponent_history() const { return opponent_history_; }
    const ProfileIndex& index() const { return index_; }
    Rng& rng() { return *rng_; }

private:
    NegotiationContext ctx_;
    ProfileIndex index_;
    AcceptancePolicy acceptance_;
    std::vector<double> opponent_history_;
    std::unique_ptr<Rng> rng_;
};

class TimeDependentNegotiator : public BaselineNegotiator {
public:
    explicit TimeDependentNegotiator(TimeDependentParams params = {},
                                     AcceptancePolicy acceptance = AcceptancePolicy::ac_combi())
        : BaselineNegotiator(acceptance), params_(params) {}

protected:
    void reset_strategy() override { params_.u_min = std::max(params_.u_min, reservation()); }

    double next_target(double t_r) override { return boulware_target(t_r, params_); }

private:
    TimeDependentParams params_;
};

// Naive tit-for-tat: mirrors the opponent's last concession, measured on
// the self utility axis (the opponent's true utility is unobservable).
// Retractions (negative concessions) are ignored; the target never rises
// and never drops below the reservation value.
class TitForTatNegotiator : public BaselineNegotiator {
public:
    explicit TitForTatNegotiator(AcceptancePolicy acceptance = AcceptancePolicy::ac_combi())
        : BaselineNegotiator(acceptance) {}

protected:
    void reset_strategy() override { target_ = 1.0; }

    double next_target(double) override {
        const auto& hist = opponent_history();
        if (hist.size() >= 2) {
            const double concession = hist[hist.size() - 1] - hist[hist.size() - 2];
            target_ = std::max(reservation(), target_ - std::max(0.0, concession));
        }
        return target_;
    }

private:
    double target_ = 1.0;
};

// Uniformly random bids over the outcomes at or above reservation. The
// bidding itself never accepts; acceptance comes from the shared policy,
// keyed on the utility of the bid about to be made.
class RandomNegotiator : public BaselineNegotiator {
public:
    explicit RandomNegotiator(AcceptancePolicy acceptance = AcceptancePolicy::ac_combi())
        : BaselineNegotiator(acceptance) {}

protected:
    void reset_strategy() override {
        eligible_.clear();
        for (std::size_t i = 0; i < index().size(); ++i)
            if (index().utility_at(i) >= reservation()) eligible_.push_back(i);
        if (eligible_.empty()) throw StructuralError("no outcome at or above reservation");
    }

    double next_target(double) override {
        planned_ = eligible_[rng().index(eligible_.size())];
        return index().utility_at(planned_);
    }

    Action make_bid(double) override { return Action::offer(index().space().outcome_at(planned_)); }

private:
    std::vector<std::size_t> eligible_;
    std::size_t planned_ = 0;
};

// --- registry ---------------------------------------------------------------

// Stable ids; classifier class indices follow this insertion order.
inline const std::vector<std::string>& baseline_ids() {
    static const std::vector<std::string> ids{"boulware", "tit_for_tat", "random"};
    return ids;
}

inline NegotiatorFactory make_baseline_factory(const std::string& id) {
    if (id == "boulware")
        return [] { return std::make_unique<TimeDependentNegotiator>(boulware_preset()); };
    if (id == "tit_for_tat")
        return [] { return std::make_unique<TitForTatNegotiator>(); };
    if (id == "random")
        return [] { return std::make_unique<RandomNegotiator>(); };
    throw ConfigError("unknown negotiator id: " + id);
}

}  // namespace autoneg
