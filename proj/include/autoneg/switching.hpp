#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "autoneg/classifier.hpp"
#include "autoneg/pool.hpp"
#include "autoneg/protocol.hpp"
#include "autoneg/rl_env.hpp"
#include "autoneg/strategy.hpp"
#include "autoneg/text.hpp"

namespace autoneg {

struct SwitchConfig {
    // Empty: pure switching (the argmax class weight is 1, the rest 0).
    // Otherwise: fixed combination weights over the pool, summing to 1.
    std::vector<double> beta;
    int decision_period = 1;  // rounds between classification refreshes
    int initial_strategy_index = 0;

    bool pure_switching() const { return beta.empty(); }
};

struct DecisionLogRow {
    int round = 0;
    std::vector<double> probabilities;
    int active_index = 0;
    double proposed_utility = 0.0;
    std::string action;
    bool classifier_fallback = false;
};

// The deployable agent: classifies the opponent from its projected offer
// window, picks (or blends) the matching trained strategies, and applies
// the active strategy's acceptance rule.
class SwitchingNegotiator : public Negotiator {
public:
    SwitchingNegotiator(std::shared_ptr<const StrategyPool> pool, SwitchConfig config)
        : pool_(std::move(pool)), config_(config) {
        if (pool_->size() == 0) throw ConfigError("empty strategy pool");
        if (pool_->size() > 1 && pool_->classifier &&
            pool_->classifier->class_order.size() != pool_->size())
            throw ConfigError("classifier class count does not match pool size");
        if (!config_.pure_switching()) {
            if (config_.beta.size() != pool_->size())
                throw ConfigError("beta weight count does not match pool size");
            double sum = 0.0;
            for (double b : config_.beta) {
                if (b < 0.0) throw ConfigError("beta weights must be nonnegative");
                sum += b;
            }
            if (std::fabs(sum - 1.0) > 1e-9)
                throw ConfigError("beta weights must sum to 1");
        }
        if (config_.decision_period < 1) throw ConfigError("decision_period must be >= 1");
        if (config_.initial_strategy_index < 0 ||
            config_.initial_strategy_index >= static_cast<int>(pool_->size()))
            throw ConfigError("initial strategy index out of range");
    }

    void on_session_start(const NegotiationContext& ctx) override {
        ctx_ = ctx;
        index_ = ProfileIndex(*ctx.space, ctx.profile);
        tracker_.reset();
        window_ = std::make_unique<OfferWindow>(pool_->classifier ? pool_->classifier->k : 20);
        active_ = config_.initial_strategy_index;
        probabilities_.assign(pool_->size(), 0.0);
        probabilities_[active_] = 1.0;
        log_.clear();
        turn_ = 0;
    }

    Action act(double t_r, const std::optional<Outcome>& standing,
               const std::optional<Outcome>& own_last) override {
        (void)own_last;
        const int deadline = ctx_.config.deadline_rounds;
        const double state_t_r =
            std::max(0.0, t_r - 1.0 / static_cast<double>(deadline));
        double u_in = -1.0;
        if (standing) {
            u_in = index_.utility_at(ctx_.space->index_of(*standing));
            tracker_.on_opponent_offer(u_in);
            window_->push(u_in);
        }

        DecisionLogRow row;
        row.round = turn_ + 1;
        // refresh the classification every decision_period own turns
        if (turn_ % config_.decision_period == 0) refresh_classification(row);
        row.probabilities = probabilities_;
        row.active_index = active_;
        ++turn_;

        const RlState state = tracker_.state(state_t_r);
        const double u_r = ctx_.profile.reservation_value;
        std::vector<double> proposals(pool_->size());
        for (std::size_t i = 0; i < pool_->size(); ++i)
            proposals[i] = pool_->entries[i].bundle.propose_utility(state, u_r);

        // The argmax strategy decides acceptance.
        if (standing) {
            const auto& hist = tracker_.opponent_history();
            std::span<const double> recent(hist.data(), hist.size() - 1);
            if (accept_decision(pool_->entries[active_].bundle.acceptance, t_r, u_in,
                                proposals[active_], recent)) {
                row.action = "accept";
                row.proposed_utility = proposals[active_];
                log_.push_back(std::move(row));
                return Action::accept();
            }
        }

        double target = 0.0;
        if (config_.pure_switching()) {
            target = proposals[active_];
        } else {
            for (std::size_t i = 0; i < pool_->size(); ++i)
                target += config_.beta[i] * proposals[i];
        }
        const std::size_t bid = index_.inverse_floored(target, u_r, true);
        tracker_.on_own_offer(index_.utility_at(bid));
        row.action = "offer";
        row.proposed_utility = target;
        log_.push_back(std::move(row));
        return Action::offer(ctx_.space->outcome_at(bid));
    }

    const std::vector<DecisionLogRow>& decision_log() const { return log_; }

private:
    void refresh_classification(DecisionLogRow& row) {
        if (pool_->size() == 1) {
            active_ = 0;
            probabilities_ = {1.0};
            return;
        }
        if (!pool_->classifier) {
            active_ = config_.initial_strategy_index;
            probabilities_.assign(pool_->size(), 0.0);
            probabilities_[active_] = 1.0;
            row.classifier_fallback = true;
            return;
        }
        probabilities_ = classify(*pool_->classifier, window_->window());
        active_ = static_cast<int>(
            std::max_element(probabilities_.begin(), probabilities_.end()) -
            probabilities_.begin());
    }

    std::shared_ptr<const StrategyPool> pool_;
    SwitchConfig config_;
    NegotiationContext ctx_;
    ProfileIndex index_;
    RlStateTracker tracker_;
    std::unique_ptr<OfferWindow> window_;
    std::vector<double> probabilities_;
    int active_ = 0;
    int turn_ = 0;
    std::vector<DecisionLogRow> log_;
};

// Protocol-conformant factory; a fresh per-session agent each call.
inline NegotiatorFactory make_rl_agent(std::shared_ptr<const StrategyPool> pool,
                                       SwitchConfig config = {}) {
    if (!pool) throw ConfigError("null strategy pool");
    // construct once to validate configuration eagerly
    SwitchingNegotiator probe(pool, config);
    return [pool, config] { return std::make_unique<SwitchingNegotiator>(pool, config); };
}

// Single trained strategy acting alone (a pool of one).
inline NegotiatorFactory make_bundle_negotiator(const StrategyBundle& bundle) {
    auto pool = std::make_shared<StrategyPool>();
    pool->entries.push_back({bundle.trained_vs, bundle});
    return make_rl_agent(std::move(pool));
}

inline void export_decision_log_csv(std::ostream& out,
                                    const std::vector<DecisionLogRow>& log) {
    out << "round,probabilities,active_index,proposed_utility,action\n";
    for (const DecisionLogRow& r : log) {
        out << r.round << ',';
        for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
            if (i) out << ';';
            out << fmt_double(r.probabilities[i]);
        }
        out << ',' << r.active_index << ',' << fmt_double(r.proposed_utility) << ','
            << r.action << '\n';
    }
}

}  // namespace autoneg
