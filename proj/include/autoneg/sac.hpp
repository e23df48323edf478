#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "autoneg/errors.hpp"
#include "autoneg/neural.hpp"
#include "autoneg/rl_env.hpp"
#include "autoneg/rng.hpp"
#include "autoneg/strategy.hpp"
#include "autoneg/text.hpp"

namespace autoneg {

struct SacConfig {
    int epochs = 20000;  // training iterations: one env step + one update each
    int initial_collect_steps = 500;
    std::size_t replay_capacity = 1000000;
    int batch = 128;
    std::vector<std::size_t> critic_layers{256, 512};
    std::vector<std::size_t> actor_layers{256, 512, 512};
    double lr_actor = 3e-5;
    double lr_critic = 3e-2;
    double lr_alpha = 3e-3;
    double tau = 0.005;
    int target_update_period = 1;
    double gamma = 0.99;
    double reward_scale = 1.0;
    double initial_log_alpha = 0.0;
    double critic_loss_weight = 0.5;
    double actor_loss_weight = 1.0;
    double alpha_loss_weight = 1.0;
    double target_entropy = -1.0;  // -(action dimension)
    int deadline_rounds = 100;     // episode length bound during training
    int eval_period = 500;
    int eval_episodes = 20;

    // Reduced preset that trains in minutes on a desktop CPU. The published
    // critic rate 3e-2 destabilizes small nets; the desk preset runs both
    // critic and actor at 3e-4.
    static SacConfig desk() {
        SacConfig c;
        c.epochs = 20000;
        c.critic_layers = {64, 64};
        c.actor_layers = {64, 64};
        c.lr_actor = 3e-4;
        c.lr_critic = 3e-4;
        c.deadline_rounds = 50;
        return c;
    }

    std::string hash() const {
        std::string s;
        s += fmt_int(epochs) + "|" + fmt_int(initial_collect_steps) + "|" +
             fmt_int(static_cast<long long>(replay_capacity)) + "|" + fmt_int(batch) + "|";
        for (auto u : critic_layers) s += fmt_int(static_cast<long long>(u)) + ",";
        s += "|";
        for (auto u : actor_layers) s += fmt_int(static_cast<long long>(u)) + ",";
        s += "|" + fmt_double(lr_actor) + "|" + fmt_double(lr_critic) + "|" +
             fmt_double(lr_alpha) + "|" + fmt_double(tau) + "|" + fmt_int(target_update_period) +
             "|" + fmt_double(gamma) + "|" + fmt_double(reward_scale) + "|" +
             fmt_double(initial_log_alpha) + "|" + fmt_double(critic_loss_weight) + "|" +
             fmt_double(actor_loss_weight) + "|" + fmt_double(alpha_loss_weight) + "|" +
             fmt_double(target_entropy) + "|" + fmt_int(deadline_rounds);
        return fnv1a_hex(s);
    }
};

// Uniform-sampling ring buffer.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
    }

    void add(const Transition& t) {
        if (data_.size() < capacity_) {
            data_.push_back(t);
        } else {
            data_[head_] = t;
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        std::vector<std::size_t> idx(batch);
        for (std::size_t& i : idx) i = rng.index(data_.size());
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct TrainCurvePoint {
    int iteration = 0;
    double mean_reward = 0.0;
    double mean_utility = 0.0;
    double alpha = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

struct TrainResult {
    StrategyBundle bundle;
    std::vector<TrainCurvePoint> curve;
    double initial_mean_utility = 0.0;  // random-init policy, deterministic mode
    double final_mean_utility = 0.0;
};

// Soft Actor-Critic with twin critics, soft-updated targets and a
// trainable entropy temperature.
class SacAgent {
public:
    SacAgent(const SacConfig& cfg, double reservation, std::uint64_t seed)
        : cfg_(cfg), u_r_(reservation), log_alpha_(cfg.initial_log_alpha) {
        actor_ = GaussianPolicy(build_net(7, cfg.actor_layers, 2, derive_seed(seed, 1)));
        critic1_ = build_net(8, cfg.critic_layers, 1, derive_seed(seed, 2));
        critic2_ = build_net(8, cfg.critic_layers, 1, derive_seed(seed, 3));
        target1_ = critic1_;
        target2_ = critic2_;
        opt_actor_ = std::make_unique<AdamState>(actor_.net());
        opt_critic1_ = std::make_unique<AdamState>(critic1_);
        opt_critic2_ = std::make_unique<AdamState>(critic2_);
        alpha_m_ = alpha_v_ = 0.0;
    }

    const GaussianPolicy& policy() const { return actor_; }
    GaussianPolicy& policy() { return actor_; }
    Network& critic1() { return critic1_; }
    Network& critic2() { return critic2_; }
    Network& target1() { return target1_; }
    Network& target2() { return target2_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    double reservation() const { return u_r_; }

    // Stochastic (or mean) action for one state, with its log-probability.
    std::pair<RlAction, double> sample_action(const RlState& s, bool stochastic, Rng& rng) const {
        if (!stochastic) {
            const double raw = actor_.deterministic_raw(s);
            auto [mean, log_std] = actor_.head(s);
            return {RlAction{GaussianPolicy::raw_to_utility(raw, u_r_)},
                    GaussianPolicy::log_prob_of(raw, log_std, 0.0)};
        }
        GaussianPolicy::Sample smp = actor_.sample(s, rng);
        return {RlAction{GaussianPolicy::raw_to_utility(smp.raw, u_r_)}, smp.log_prob};
    }

    struct Batch {
        std::vector<RlState> state;
        std::vector<double> action_raw;
        std::vector<double> reward;
        std::vector<RlState> next_state;
        std::vector<double> done;  // 1.0 on terminal
        std::size_t size() const { return state.size(); }
    };

    Batch gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& idx) const {
        Batch b;
        b.state.reserve(idx.size());
        for (std::size_t i : idx) {
            const Transition& t = buffer[i];
            b.state.push_back(t.state);
            b.action_raw.push_back(GaussianPolicy::utility_to_raw(t.action.u_next, u_r_));
            b.reward.push_back(t.reward);
            b.next_state.push_back(t.next_state);
            b.done.push_back(t.terminal ? 1.0 : 0.0);
        }
        return b;
    }

    // y = r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s')),
    // with a' sampled from the current policy using the supplied noise.
    std::vector<double> critic_targets(const Batch& batch,
                                       std::span<const double> next_noise) const {
        const std::size_t B = batch.size();
        std::vector<double> y(B);
        auto [mean, log_std] = actor_heads(batch.next_state);
        std::vector<double> next_in(B * 8);
        std::vector<double> logp(B);
        for (std::size_t i = 0; i < B; ++i) {
            GaussianPolicy::Sample smp =
                GaussianPolicy::sample_with_noise(mean[i], log_std[i], next_noise[i]);
            std::copy(batch.next_state[i].v.begin(), batch.next_state[i].v.end(),
                      next_in.begin() + i * 8);
            next_in[i * 8 + 7] = smp.raw;
            logp[i] = smp.log_prob;
        }
        auto q1 = target1_.forward(next_in, B);
        auto q2 = target2_.forward(next_in, B);
        const double a = alpha();
        for (std::size_t i = 0; i < B; ++i) {
            const double qmin = std::min(q1[i], q2[i]);
            y[i] = batch.reward[i] * cfg_.reward_scale +
                   cfg_.gamma * (1.0 - batch.done[i]) * (qmin - a * logp[i]);
        }
        return y;
    }

    // Both critics regress to the shared target via the weighted mse.
    double critic_update(const Batch& batch, Rng& rng) {
        const std::size_t B = batch.size();
        std::vector<double> noise(B);
        for (double& z : noise) z = rng.normal();
        const std::vector<double> y = critic_targets(batch, noise);
        std::vector<double> in(B * 8);
        for (std::size_t i = 0; i < B; ++i) {
            std::copy(batch.state[i].v.begin(), batch.state[i].v.end(), in.begin() + i * 8);
            in[i * 8 + 7] = batch.action_raw[i];
        }
        double total_loss = 0.0;
        for (Network* critic : {&critic1_, &critic2_}) {
            ForwardCache cache;
            auto q = critic->forward(in, B, &cache);
            double loss = 0.0;
            std::vector<double> up(B);
            for (std::size_t i = 0; i < B; ++i) {
                const double d = q[i] - y[i];
                loss += d * d;
                up[i] = cfg_.critic_loss_weight * 2.0 * d / static_cast<double>(B);
            }
            loss = cfg_.critic_loss_weight * loss / static_cast<double>(B);
            total_loss += loss;
            Gradients g = critic->backward(cache, up);
            adam_step(*critic, g, critic == &critic1_ ? *opt_critic1_ : *opt_critic2_,
                      cfg_.lr_critic);
        }
        if (!std::isfinite(total_loss))
            throw Error("sac: critic loss diverged (non-finite)");
        return total_loss;
    }

    // Reparameterized actor loss mean(alpha log pi - min Q) under fixed
    // noise. Optionally emits the actor parameter gradients and the mean
    // (log pi + target_entropy) driving the temperature update.
    double actor_loss_given_noise(const Batch& batch, std::span<const double> noise,
                                  Gradients* grads_out = nullptr,
                                  double* entropy_gap_out = nullptr) const {
        const std::size_t B = batch.size();
        ForwardCache actor_cache;
        std::vector<double> state_in(B * 7);
        for (std::size_t i = 0; i < B; ++i)
            std::copy(batch.state[i].v.begin(), batch.state[i].v.end(),
                      state_in.begin() + i * 7);
        auto heads = actor_.net().forward(state_in, B, &actor_cache);

        std::vector<double> raw(B), logp(B), sigma(B), clamp_mask(B);
        std::vector<double> critic_in(B * 8);
        for (std::size_t i = 0; i < B; ++i) {
            const double mean = heads[i * 2];
            const double ls_raw = heads[i * 2 + 1];
            const double ls = std::clamp(ls_raw, GaussianPolicy::kLogStdMin,
                                         GaussianPolicy::kLogStdMax);
            clamp_mask[i] = (ls_raw > GaussianPolicy::kLogStdMin &&
                             ls_raw < GaussianPolicy::kLogStdMax)
                                ? 1.0
                                : 0.0;
            GaussianPolicy::Sample smp = GaussianPolicy::sample_with_noise(mean, ls, noise[i]);
            raw[i] = smp.raw;
            logp[i] = smp.log_prob;
            sigma[i] = std::exp(ls);
            std::copy(batch.state[i].v.begin(), batch.state[i].v.end(),
                      critic_in.begin() + i * 8);
            critic_in[i * 8 + 7] = smp.raw;
        }

        // min(Q1,Q2) and its gradient wrt the action input
        ForwardCache c1, c2;
        auto q1 = critic1_.forward(critic_in, B, &c1);
        auto q2 = critic2_.forward(critic_in, B, &c2);

        const double a = alpha();
        double actor_loss = 0.0;
        double entropy_gap = 0.0;
        std::vector<double> up_actor(B * 2);
        std::vector<double> up1(B, 0.0), up2(B, 0.0);
        for (std::size_t i = 0; i < B; ++i) {
            actor_loss += a * logp[i] - std::min(q1[i], q2[i]);
            entropy_gap += logp[i] + cfg_.target_entropy;
            (q1[i] <= q2[i] ? up1[i] : up2[i]) = 1.0;
        }
        actor_loss = cfg_.actor_loss_weight * actor_loss / static_cast<double>(B);
        entropy_gap /= static_cast<double>(B);
        if (entropy_gap_out) *entropy_gap_out = entropy_gap;
        if (!grads_out) return actor_loss;

        const std::vector<double> dq1 = critic1_.backward(c1, up1).input;
        const std::vector<double> dq2 = critic2_.backward(c2, up2).input;
        for (std::size_t i = 0; i < B; ++i) {
            const double dq_da = dq1[i * 8 + 7] + dq2[i * 8 + 7];  // one of them is zero
            const double one_minus_a2 = 1.0 - raw[i] * raw[i];
            const double dlogp_da = 2.0 * raw[i] / (one_minus_a2 + GaussianPolicy::kSquashEps);
            const double dlogp_dmean = dlogp_da * one_minus_a2;
            const double dlogp_dls = -1.0 + dlogp_da * one_minus_a2 * sigma[i] * noise[i];
            const double da_dmean = one_minus_a2;
            const double da_dls = one_minus_a2 * sigma[i] * noise[i];
            const double scale = cfg_.actor_loss_weight / static_cast<double>(B);
            up_actor[i * 2] = scale * (a * dlogp_dmean - dq_da * da_dmean);
            up_actor[i * 2 + 1] = scale * (a * dlogp_dls - dq_da * da_dls) * clamp_mask[i];
        }
        *grads_out = actor_.net().backward(actor_cache, up_actor);
        return actor_loss;
    }

    // Applies one actor step and one temperature step (log pi detached).
    std::pair<double, double> actor_alpha_update(const Batch& batch, Rng& rng) {
        const std::size_t B = batch.size();
        std::vector<double> noise(B);
        for (double& z : noise) z = rng.normal();
        Gradients g;
        double entropy_gap = 0.0;
        const double actor_loss = actor_loss_given_noise(batch, noise, &g, &entropy_gap);
        adam_step(actor_.net(), g, *opt_actor_, cfg_.lr_actor);

        const double alpha_loss = cfg_.alpha_loss_weight * (-log_alpha_) * entropy_gap;
        double grad = cfg_.alpha_loss_weight * (-entropy_gap);
        ++alpha_step_;
        adam_update(std::span<double>(&log_alpha_, 1), std::span<const double>(&grad, 1),
                    std::span<double>(&alpha_m_, 1), std::span<double>(&alpha_v_, 1),
                    alpha_step_, cfg_.lr_alpha);

        if (!std::isfinite(actor_loss) || !std::isfinite(alpha_loss))
            throw Error("sac: actor/alpha loss diverged (non-finite)");
        return {actor_loss, alpha_loss};
    }

    // target <- tau * critic + (1 - tau) * target
    void soft_update() {
        blend(target1_, critic1_);
        blend(target2_, critic2_);
    }

private:
    static Network build_net(std::size_t input, const std::vector<std::size_t>& hidden,
                             std::size_t out, std::uint64_t seed) {
        std::vector<LayerSpec> specs;
        for (std::size_t h : hidden) specs.push_back(LayerSpec::dense(h, Activation::relu));
        specs.push_back(LayerSpec::dense(out, Activation::linear));
        Network net(input, 1, std::move(specs));
        net.init_glorot_uniform(seed);
        return net;
    }

    std::pair<std::vector<double>, std::vector<double>> actor_heads(
        const std::vector<RlState>& states) const {
        const std::size_t B = states.size();
        std::vector<double> in(B * 7);
        for (std::size_t i = 0; i < B; ++i)
            std::copy(states[i].v.begin(), states[i].v.end(), in.begin() + i * 7);
        auto out = actor_.net().forward(in, B);
        std::vector<double> mean(B), log_std(B);
        for (std::size_t i = 0; i < B; ++i) {
            mean[i] = out[i * 2];
            log_std[i] = std::clamp(out[i * 2 + 1], GaussianPolicy::kLogStdMin,
                                    GaussianPolicy::kLogStdMax);
        }
        return {mean, log_std};
    }

    void blend(Network& target, const Network& source) {
        for (std::size_t l = 0; l < target.weights().size(); ++l) {
            auto& tw = target.weights()[l].data;
            const auto& sw = source.weights()[l].data;
            for (std::size_t i = 0; i < tw.size(); ++i)
                tw[i] = cfg_.tau * sw[i] + (1.0 - cfg_.tau) * tw[i];
            auto& tb = target.biases()[l].data;
            const auto& sb = source.biases()[l].data;
            for (std::size_t i = 0; i < tb.size(); ++i)
                tb[i] = cfg_.tau * sb[i] + (1.0 - cfg_.tau) * tb[i];
        }
    }

    SacConfig cfg_;
    double u_r_ = 0.0;
    GaussianPolicy actor_;
    Network critic1_, critic2_, target1_, target2_;
    std::unique_ptr<AdamState> opt_actor_, opt_critic1_, opt_critic2_;
    double log_alpha_ = 0.0;
    double alpha_m_ = 0.0, alpha_v_ = 0.0;
    long alpha_step_ = 0;
};

struct PolicyEval {
    double mean_reward = 0.0;
    double mean_utility = 0.0;  // reservation on no agreement
};

// Deterministic-policy evaluation over fresh episodes.
inline PolicyEval evaluate_policy(const GaussianPolicy& policy, const Scenario& scenario,
                                  const EnvConfig& env_cfg, double u_r, int episodes,
                                  std::uint64_t seed) {
    NegotiationEnv env(scenario, env_cfg, seed);
    PolicyEval ev;
    for (int e = 0; e < episodes; ++e) {
        RlState s = env.reset(derive_seed(seed, 1000 + static_cast<std::uint64_t>(e)));
        double total = 0.0, last = 0.0;
        while (!env.terminal()) {
            const double raw = policy.deterministic_raw(s);
            Transition tr = env.step(RlAction{GaussianPolicy::raw_to_utility(raw, u_r)});
            total += tr.reward;
            last = tr.reward;
            s = tr.next_state;
        }
        ev.mean_reward += total;
        ev.mean_utility += last >= 0.0 ? last : u_r;  // -1 penalty is not a utility
    }
    ev.mean_reward /= episodes;
    ev.mean_utility /= episodes;
    return ev;
}

// Full training loop: seeded, deterministic, one gradient update per
// environment step after the uniform-random warmup.
inline TrainResult train_sac(const std::string& opponent_id, const Scenario& scenario,
                             const SacConfig& cfg, std::uint64_t seed,
                             const std::string& scenario_id = "") {
    EnvConfig env_cfg;
    env_cfg.opponent_id = opponent_id;
    env_cfg.deadline_rounds = cfg.deadline_rounds;
    NegotiationEnv env(scenario, env_cfg, derive_seed(seed, 10));
    const double u_r = env.reservation();

    SacAgent agent(cfg, u_r, derive_seed(seed, 20));
    ReplayBuffer buffer(cfg.replay_capacity);
    Rng rng_policy(derive_seed(seed, 30));
    Rng rng_batch(derive_seed(seed, 40));
    Rng rng_update(derive_seed(seed, 50));

    TrainResult result;
    result.initial_mean_utility =
        evaluate_policy(agent.policy(), scenario, env_cfg, u_r, cfg.eval_episodes,
                        derive_seed(seed, 60))
            .mean_utility;

    RlState state = env.reset();
    const int total_steps = cfg.initial_collect_steps + cfg.epochs;
    double last_critic_loss = 0.0, last_actor_loss = 0.0;
    for (int step = 0; step < total_steps; ++step) {
        RlAction action;
        if (step < cfg.initial_collect_steps) {
            const double raw = rng_policy.uniform(-1.0, 1.0);
            action = RlAction{GaussianPolicy::raw_to_utility(raw, u_r)};
        } else {
            action = agent.sample_action(state, true, rng_policy).first;
        }
        Transition tr = env.step(action);
        buffer.add(tr);
        state = tr.terminal ? env.reset() : tr.next_state;

        if (step >= cfg.initial_collect_steps) {
            const auto idx = buffer.sample_indices(cfg.batch, rng_batch);
            SacAgent::Batch batch = agent.gather(buffer, idx);
            last_critic_loss = agent.critic_update(batch, rng_update);
            auto [al, all] = agent.actor_alpha_update(batch, rng_update);
            last_actor_loss = al;
            const int train_iter = step - cfg.initial_collect_steps + 1;
            if (train_iter % cfg.target_update_period == 0) agent.soft_update();

            if (cfg.eval_period > 0 &&
                (train_iter % cfg.eval_period == 0 || train_iter == cfg.epochs)) {
                PolicyEval ev = evaluate_policy(agent.policy(), scenario, env_cfg, u_r,
                                                cfg.eval_episodes, derive_seed(seed, 70));
                result.curve.push_back({train_iter, ev.mean_reward, ev.mean_utility,
                                        agent.alpha(), last_critic_loss, last_actor_loss});
            }
        }
    }

    result.final_mean_utility =
        result.curve.empty() ? result.initial_mean_utility : result.curve.back().mean_utility;

    StrategyBundle bundle;
    bundle.actor = agent.policy().net();
    bundle.acceptance = env_cfg.acceptance;
    bundle.trained_vs = opponent_id;
    bundle.scenario_id = scenario_id;
    bundle.config_hash = cfg.hash();
    bundle.seed = seed;
    result.bundle = std::move(bundle);
    return result;
}

inline void write_training_curve_csv(const std::string& path,
                                     const std::vector<TrainCurvePoint>& curve) {
    CsvWriter csv(path);
    csv.row({"iteration", "mean_reward", "mean_utility", "alpha", "critic_loss", "actor_loss"});
    for (const TrainCurvePoint& p : curve)
        csv.row({fmt_int(p.iteration), fmt_double(p.mean_reward), fmt_double(p.mean_utility),
                 fmt_double(p.alpha), fmt_double(p.critic_loss), fmt_double(p.actor_loss)});
}

}  // namespace autoneg
