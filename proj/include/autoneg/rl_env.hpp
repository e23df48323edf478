#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autoneg/baselines.hpp"
#include "autoneg/domain.hpp"
#include "autoneg/errors.hpp"
#include "autoneg/protocol.hpp"

namespace autoneg {

// 7-dim observation: relative time plus the last three exchanges, all on
// the self utility axis. Unseen history slots stay 0.
struct RlState {
    std::array<double, 7> v{};  // [t_r, s-2, o-2, s-1, o-1, s, o]
};

// Target utility for the next own offer, constrained to (u_r, 1].
struct RlAction {
    double u_next = 1.0;
};

struct Transition {
    RlState state;
    RlAction action;
    double reward = 0.0;
    RlState next_state;
    bool terminal = false;
};

// Maintains the sliding exchange history the 7-dim state is built from.
// Shared between the training environment and the deployed agents so the
// observation layout cannot drift.
class RlStateTracker {
public:
    void reset() {
        own_.clear();
        opp_.clear();
    }
    void on_own_offer(double u) { own_.push_back(u); }
    void on_opponent_offer(double u) { opp_.push_back(u); }

    const std::vector<double>& opponent_history() const { return opp_; }

    RlState state(double t_r) const {
        RlState s;
        s.v[0] = t_r;
        for (int back = 0; back < 3; ++back) {
            // slot pairs ordered oldest (t-2) to newest (t)
            const int pair = 2 - back;
            const int oi = static_cast<int>(own_.size()) - 1 - back;
            const int pi = static_cast<int>(opp_.size()) - 1 - back;
            if (oi >= 0) s.v[1 + 2 * pair] = own_[oi];
            if (pi >= 0) s.v[2 + 2 * pair] = opp_[pi];
        }
        return s;
    }

private:
    std::vector<double> own_;
    std::vector<double> opp_;
};

struct EnvConfig {
    std::string opponent_id = "boulware";
    int deadline_rounds = 100;
    bool randomize_opponent_profile = true;  // fresh random profile per episode
    AcceptancePolicy acceptance = AcceptancePolicy::ac_combi();
};

// One negotiation session against a fixed base opponent, seen as an
// episodic environment. The agent always moves first; one step is one
// own-bid/opponent-reply exchange. Rewards: U_s(agreement) on agreement,
// -1 on any terminal without agreement (deadline or opponent walk-away),
// 0 otherwise.
class NegotiationEnv {
public:
    NegotiationEnv(Scenario scenario, EnvConfig config, std::uint64_t seed)
        : NegotiationEnv(std::move(scenario), config, seed,
                         make_baseline_factory(config.opponent_id)) {}

    // Explicit opponent factory, bypassing the registry.
    NegotiationEnv(Scenario scenario, EnvConfig config, std::uint64_t seed,
                   NegotiatorFactory opponent_factory)
        : scenario_(std::move(scenario)),
          config_(std::move(config)),
          seed_(seed),
          opponent_factory_(std::move(opponent_factory)),
          self_index_(scenario_.outcome_space, scenario_.profile_a) {}

    double reservation() const { return scenario_.profile_a.reservation_value; }
    int deadline() const { return config_.deadline_rounds; }
    const Scenario& base_scenario() const { return scenario_; }
    const Scenario& episode_scenario() const { return episode_scenario_; }
    bool terminal() const { return !driver_ || driver_->done(); }
    const SessionTrace& trace() const { return driver_->trace(); }
    const std::vector<double>& episode_rewards() const { return rewards_; }

    RlState reset() { return reset(derive_seed(seed_, episode_counter_++)); }

    RlState reset(std::uint64_t episode_seed) {
        episode_scenario_ = scenario_;
        if (config_.randomize_opponent_profile)
            episode_scenario_.profile_b =
                random_profile(derive_seed(episode_seed, 1), scenario_.outcome_space);
        driver_ = std::make_unique<SessionDriver>(episode_scenario_, SessionConfig{
            config_.deadline_rounds, episode_seed});
        opponent_ = opponent_factory_();
        opponent_->on_session_start(NegotiationContext{&episode_scenario_.outcome_space,
                                                       episode_scenario_.profile_b,
                                                       SessionConfig{config_.deadline_rounds,
                                                                     episode_seed},
                                                       derive_seed(episode_seed, 2)});
        tracker_.reset();
        rewards_.clear();
        return tracker_.state(0.0);
    }

    Transition step(const RlAction& action) {
        if (terminal()) throw StateError("step() after the episode terminated");
        const double u_r = reservation();
        if (!(action.u_next > u_r && action.u_next <= 1.0))
            throw StructuralError("action utility outside (u_r, 1]");

        Transition tr;
        tr.state = tracker_.state(relative_time_of_completed_exchanges());
        tr.action = action;

        const double t_r = driver_->t_r();
        const std::optional<Outcome>& standing = driver_->standing_for(0);

        // fixed acceptance first: the policy's planned utility is the
        // AC_next threshold
        if (standing) {
            const double u_in = self_index_.utility_at(
                episode_scenario_.outcome_space.index_of(*standing));
            const auto& hist = tracker_.opponent_history();
            std::span<const double> recent(hist.data(), hist.empty() ? 0 : hist.size() - 1);
            if (accept_decision(config_.acceptance, t_r, u_in, action.u_next, recent)) {
                driver_->submit(Action::accept());
                tr.reward = u_in;
                tr.terminal = true;
                tr.next_state = tracker_.state(t_r);
                rewards_.push_back(tr.reward);
                return tr;
            }
        }

        // bid via the inverse utility map, respecting the action bound
        const std::size_t bid = self_index_.inverse_floored(action.u_next, u_r, true);
        driver_->submit(Action::offer(episode_scenario_.outcome_space.outcome_at(bid)));
        tracker_.on_own_offer(self_index_.utility_at(bid));

        if (!driver_->done()) {
            // opponent turn
            Action reply = opponent_->act(driver_->t_r(), driver_->standing_for(1),
                                          driver_->own_last(1));
            driver_->submit(reply);
            if (reply.kind == ActionKind::offer) {
                tracker_.on_opponent_offer(self_index_.utility_at(
                    episode_scenario_.outcome_space.index_of(reply.outcome)));
            }
        }

        if (driver_->done()) {
            const SessionOutcome out = driver_->outcome();
            tr.reward = out.agreement ? out.utility_a : -1.0;
            tr.terminal = true;
        } else {
            tr.reward = 0.0;
            tr.terminal = false;
        }
        tr.next_state = tracker_.state(relative_time_of_completed_exchanges());
        rewards_.push_back(tr.reward);
        return tr;
    }

private:
    double relative_time_of_completed_exchanges() const {
        if (driver_->done()) return driver_->t_r();
        // before acting in round t, t-1 exchanges are complete
        return static_cast<double>(driver_->round() - 1) / config_.deadline_rounds;
    }

    Scenario scenario_;
    EnvConfig config_;
    std::uint64_t seed_ = 0;
    std::uint64_t episode_counter_ = 0;
    NegotiatorFactory opponent_factory_;
    ProfileIndex self_index_;
    Scenario episode_scenario_;
    std::unique_ptr<SessionDriver> driver_;
    std::unique_ptr<Negotiator> opponent_;
    RlStateTracker tracker_;
    std::vector<double> rewards_;
};

}  // namespace autoneg
