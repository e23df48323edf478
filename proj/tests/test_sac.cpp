#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "autoneg/sac.hpp"

using namespace autoneg;

namespace {

SacConfig tiny_config() {
    SacConfig cfg = SacConfig::desk();
    cfg.critic_layers = {16, 16};
    cfg.actor_layers = {16, 16};
    cfg.epochs = 250;
    cfg.initial_collect_steps = 80;
    cfg.batch = 32;
    cfg.deadline_rounds = 15;
    cfg.eval_period = 125;
    cfg.eval_episodes = 3;
    return cfg;
}

RlState state_of(std::initializer_list<double> vs) {
    RlState s;
    std::copy(vs.begin(), vs.end(), s.v.begin());
    return s;
}

SacAgent::Batch single_transition_batch(const RlState& s, double raw, double r,
                                        const RlState& s2, bool done) {
    SacAgent::Batch b;
    b.state = {s};
    b.action_raw = {raw};
    b.reward = {r};
    b.next_state = {s2};
    b.done = {done ? 1.0 : 0.0};
    return b;
}

void zero_net(Network& net) {
    for (Tensor& t : net.weights()) t.fill(0.0);
    for (Tensor& t : net.biases()) t.fill(0.0);
}

}  // namespace

TEST_CASE("squashed action respects the admissible utility interval") {
    SacConfig cfg = tiny_config();
    SacAgent agent(cfg, 0.15, 7);
    Rng rng(3);
    RlState s = state_of({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
    for (int i = 0; i < 2000; ++i) {
        auto [action, logp] = agent.sample_action(s, true, rng);
        REQUIRE(action.u_next > 0.15);
        REQUIRE(action.u_next <= 1.0);
        REQUIRE(std::isfinite(logp));
    }
}

TEST_CASE("deterministic and stochastic actions coincide as sigma -> 0") {
    SacConfig cfg = tiny_config();
    SacAgent agent(cfg, 0.0, 8);
    // force the log_std head to the clamp floor: sigma = e^-20
    Network& net = agent.policy().net();
    Tensor& b = net.biases().back();
    b.data[1] = -50.0;
    Rng rng(4);
    RlState s = state_of({0.5, 0.1, 0.9, 0.2, 0.8, 0.3, 0.7});
    const double det = agent.policy().deterministic_raw(s);
    for (int i = 0; i < 100; ++i) {
        GaussianPolicy::Sample smp = agent.policy().sample(s, rng);
        REQUIRE_THAT(smp.raw, Catch::Matchers::WithinAbs(det, 1e-7));
    }
}

TEST_CASE("sampled actions match the analytic squashed-gaussian law") {
    SacConfig cfg = tiny_config();
    SacAgent agent(cfg, 0.0, 9);
    RlState s = state_of({0.3, 0.0, 0.4, 0.1, 0.5, 0.2, 0.6});
    auto [mu, ls] = agent.policy().head(s);
    const double sigma = std::exp(ls);

    const int n = 100000;
    Rng rng(10);
    std::vector<double> raws(n);
    for (int i = 0; i < n; ++i) raws[i] = agent.policy().sample(s, rng).raw;
    std::sort(raws.begin(), raws.end());

    // KS distance against F(x) = Phi((atanh(x) - mu) / sigma)
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = raws[i];
        const double z = (std::atanh(x) - mu) / sigma;
        const double F = 0.5 * std::erfc(-z / std::numbers::sqrt2);
        ks = std::max(ks, std::fabs(F - (i + 1.0) / n));
        ks = std::max(ks, std::fabs(F - static_cast<double>(i) / n));
    }
    REQUIRE(ks < 1.63 / std::sqrt(static_cast<double>(n)));  // alpha = 0.01

    // and the density implied by log_prob integrates to one
    const int m = 20000;
    const double lo = -1.0 + 1e-9, hi = 1.0 - 1e-9;
    double integral = 0.0;
    auto density = [&](double x) {
        const double z = (std::atanh(x) - mu) / sigma;
        return std::exp(GaussianPolicy::log_prob_of(x, ls, z));
    };
    const double h = (hi - lo) / m;
    for (int i = 0; i < m; ++i) {
        const double x0 = lo + i * h;
        integral += (density(x0) + 4.0 * density(x0 + h / 2) + density(x0 + h)) * h / 6.0;
    }
    REQUIRE_THAT(integral, Catch::Matchers::WithinAbs(1.0, 1e-3));
}

TEST_CASE("critic target is the reward on terminal transitions") {
    SacConfig cfg = tiny_config();
    SacAgent agent(cfg, 0.0, 11);
    RlState s = state_of({0.2, 0, 0, 0, 0, 0.5, 0.4});
    RlState s2 = state_of({0.3, 0, 0, 0.5, 0.4, 0.6, 0.3});
    auto batch = single_transition_batch(s, 0.2, 0.73, s2, true);
    std::vector<double> noise{0.4};
    auto y = agent.critic_targets(batch, noise);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(0.73, 1e-15));
}

TEST_CASE("gamma = 0 reduces every critic target to the reward") {
    SacConfig cfg = tiny_config();
    cfg.gamma = 0.0;
    SacAgent agent(cfg, 0.0, 12);
    RlState s = state_of({0.2, 0, 0, 0, 0, 0.5, 0.4});
    RlState s2 = state_of({0.3, 0, 0, 0.5, 0.4, 0.6, 0.3});
    auto batch = single_transition_batch(s, -0.1, 0.42, s2, false);
    std::vector<double> noise{-1.3};
    auto y = agent.critic_targets(batch, noise);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(0.42, 1e-15));
}

TEST_CASE("critic target matches a scalar hand computation on hand-set nets") {
    SacConfig cfg = tiny_config();
    cfg.gamma = 0.9;
    SacAgent agent(cfg, 0.0, 13);
    // zero all nets, then give the targets constant outputs via biases
    zero_net(agent.policy().net());
    zero_net(agent.target1());
    zero_net(agent.target2());
    agent.target1().biases().back().data[0] = 0.3;
    agent.target2().biases().back().data[0] = 0.5;

    RlState s = state_of({0.1, 0, 0, 0, 0, 0.2, 0.3});
    RlState s2 = state_of({0.2, 0, 0, 0.2, 0.3, 0.4, 0.5});
    auto batch = single_transition_batch(s, 0.0, 0.25, s2, false);
    const double z = 0.7;
    std::vector<double> noise{z};
    auto y = agent.critic_targets(batch, noise);

    // actor heads are zero: mu = 0, log_std = 0, sigma = 1
    const double a_raw = std::tanh(z);
    const double logp = -0.5 * z * z - 0.0 - 0.5 * std::log(2.0 * std::numbers::pi) -
                        std::log(1.0 - a_raw * a_raw + 1e-6);
    const double expected = 0.25 + 0.9 * (0.3 - 1.0 * logp);  // alpha = exp(0) = 1
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("actor loss gradient matches finite differences on tiny nets") {
    SacConfig cfg = tiny_config();
    cfg.actor_layers = {6};
    cfg.critic_layers = {6};
    SacAgent agent(cfg, 0.0, 14);

    Rng rng(15);
    SacAgent::Batch batch;
    std::vector<double> noise;
    for (int i = 0; i < 5; ++i) {
        RlState s, s2;
        for (auto& v : s.v) v = rng.uniform01();
        for (auto& v : s2.v) v = rng.uniform01();
        batch.state.push_back(s);
        batch.action_raw.push_back(rng.uniform(-0.9, 0.9));
        batch.reward.push_back(rng.uniform(-1.0, 1.0));
        batch.next_state.push_back(s2);
        batch.done.push_back(0.0);
        noise.push_back(rng.normal());
    }

    Gradients g;
    agent.actor_loss_given_noise(batch, noise, &g);
    Network& net = agent.policy().net();
    const double h = 1e-5;
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        for (Tensor* tensor : {&net.weights()[l], &net.biases()[l]}) {
            const Tensor& analytic =
                tensor == &net.weights()[l] ? g.weights[l] : g.biases[l];
            for (std::size_t i = 0; i < tensor->size(); ++i) {
                const double keep = tensor->data[i];
                tensor->data[i] = keep + h;
                const double lp = agent.actor_loss_given_noise(batch, noise);
                tensor->data[i] = keep - h;
                const double lm = agent.actor_loss_given_noise(batch, noise);
                tensor->data[i] = keep;
                const double fd = (lp - lm) / (2.0 * h);
                const double a = analytic.data[i];
                const double scale = std::max({std::fabs(a), std::fabs(fd), 1e-2});
                REQUIRE(std::fabs(a - fd) <= 1e-3 * scale);
            }
        }
    }
}

TEST_CASE("temperature moves toward the target entropy and stays positive") {
    SacConfig cfg = tiny_config();
    SacAgent agent(cfg, 0.0, 16);
    Rng rng(17);
    SacAgent::Batch batch;
    for (int i = 0; i < 16; ++i) {
        RlState s, s2;
        for (auto& v : s.v) v = rng.uniform01();
        for (auto& v : s2.v) v = rng.uniform01();
        batch.state.push_back(s);
        batch.action_raw.push_back(rng.uniform(-0.9, 0.9));
        batch.reward.push_back(0.0);
        batch.next_state.push_back(s2);
        batch.done.push_back(0.0);
    }
    std::vector<double> noise(16);
    for (double& z : noise) z = rng.normal();
    double gap = 0.0;
    agent.actor_loss_given_noise(batch, noise, nullptr, &gap);
    const double before = agent.log_alpha();
    Rng step_rng(18);
    agent.actor_alpha_update(batch, step_rng);
    // dL/dlog_alpha = -gap, so log_alpha moves along sign(gap)
    if (gap > 1e-6) REQUIRE(agent.log_alpha() > before);
    if (gap < -1e-6) REQUIRE(agent.log_alpha() < before);

    for (int i = 0; i < 200; ++i) agent.actor_alpha_update(batch, step_rng);
    REQUIRE(agent.alpha() > 0.0);
}

TEST_CASE("soft update blends critics into targets") {
    SacConfig cfg = tiny_config();
    cfg.tau = 0.005;
    SacAgent agent(cfg, 0.0, 19);
    // critic = 1 everywhere, target = 0 everywhere
    for (Network* n : {&agent.critic1(), &agent.critic2()}) {
        for (Tensor& t : n->weights()) t.fill(1.0);
        for (Tensor& t : n->biases()) t.fill(1.0);
    }
    for (Network* n : {&agent.target1(), &agent.target2()}) {
        for (Tensor& t : n->weights()) t.fill(0.0);
        for (Tensor& t : n->biases()) t.fill(0.0);
    }
    agent.soft_update();
    REQUIRE_THAT(agent.target1().weights()[0].data[0],
                 Catch::Matchers::WithinAbs(0.005, 1e-15));
    // repeated updates converge geometrically: 1 - (1 - tau)^n
    for (int i = 1; i < 100; ++i) agent.soft_update();
    REQUIRE_THAT(agent.target1().weights()[0].data[0],
                 Catch::Matchers::WithinAbs(1.0 - std::pow(0.995, 100), 1e-12));

    SacConfig full_copy = tiny_config();
    full_copy.tau = 1.0;
    SacAgent agent2(full_copy, 0.0, 20);
    for (Tensor& t : agent2.critic1().weights()) t.fill(0.25);
    agent2.soft_update();
    REQUIRE(agent2.target1().weights()[0].data == agent2.critic1().weights()[0].data);
}

TEST_CASE("replay buffer is bounded and samples uniformly") {
    ReplayBuffer buf(50);
    Transition t;
    for (int i = 0; i < 500; ++i) {
        t.reward = i;
        buf.add(t);
        REQUIRE(buf.size() <= 50);
    }
    Rng rng(21);
    std::vector<int> counts(50, 0);
    const int draws = 50000;
    for (int i = 0; i < draws / 100; ++i)
        for (std::size_t idx : buf.sample_indices(100, rng)) counts[idx]++;
    const double expected = draws / 50.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    REQUIRE(chi2 < 95.0);  // df = 49, far tail
}

TEST_CASE("zero-epoch training returns an untrained but complete bundle") {
    Scenario sc = generate_scenario(41, 60, 0.2);
    SacConfig cfg = tiny_config();
    cfg.epochs = 0;
    cfg.initial_collect_steps = 30;
    TrainResult r = train_sac("boulware", sc, cfg, 99, "unit");
    REQUIRE(r.bundle.trained_vs == "boulware");
    REQUIRE(r.bundle.actor.output_size() == 2);
    REQUIRE(r.curve.empty());
    // pipeline intact: the bundle proposes valid utilities
    RlState s;
    const double u = r.bundle.propose_utility(s, 0.0);
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
}

TEST_CASE("training is deterministic in the seed") {
    Scenario sc = generate_scenario(43, 60, 0.25);
    SacConfig cfg = tiny_config();
    TrainResult a = train_sac("boulware", sc, cfg, 1234, "unit");
    TrainResult b = train_sac("boulware", sc, cfg, 1234, "unit");
    REQUIRE(bundle_to_json(a.bundle).dump() == bundle_to_json(b.bundle).dump());
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        REQUIRE(a.curve[i].mean_reward == b.curve[i].mean_reward);
        REQUIRE(a.curve[i].alpha == b.curve[i].alpha);
    }
    // losses stayed finite and the curve was recorded
    REQUIRE_FALSE(a.curve.empty());
    for (const auto& p : a.curve) {
        REQUIRE(std::isfinite(p.critic_loss));
        REQUIRE(std::isfinite(p.actor_loss));
    }
}
