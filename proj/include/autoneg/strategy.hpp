#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "autoneg/baselines.hpp"
#include "autoneg/neural.hpp"
#include "autoneg/rl_env.hpp"
#include "autoneg/rng.hpp"

namespace autoneg {

// Squashed-Gaussian policy head over a small MLP. The network emits
// [mean, log_std]; actions are tanh-squashed and mapped onto the
// admissible utility interval (u_r, 1].
class GaussianPolicy {
public:
    static constexpr double kLogStdMin = -20.0;
    static constexpr double kLogStdMax = 2.0;
    static constexpr double kSquashEps = 1e-6;

    GaussianPolicy() = default;
    explicit GaussianPolicy(Network net) : net_(std::move(net)) {}

    Network& net() { return net_; }
    const Network& net() const { return net_; }

    struct Sample {
        double raw = 0.0;  // tanh-squashed action in (-1, 1)
        double log_prob = 0.0;
        double mean = 0.0;
        double log_std = 0.0;
        double noise = 0.0;  // the standard-normal draw
    };

    // Head values for a state; mean and clamped log_std.
    std::pair<double, double> head(const RlState& s) const {
        auto out = net_.forward(std::span<const double>(s.v.data(), s.v.size()), 1);
        return {out[0], std::clamp(out[1], kLogStdMin, kLogStdMax)};
    }

    Sample sample(const RlState& s, Rng& rng) const {
        auto [mean, log_std] = head(s);
        return sample_with_noise(mean, log_std, rng.normal());
    }

    static Sample sample_with_noise(double mean, double log_std, double z) {
        Sample smp;
        smp.mean = mean;
        smp.log_std = log_std;
        smp.noise = z;
        const double sigma = std::exp(log_std);
        const double pre = mean + sigma * z;
        smp.raw = std::tanh(pre);
        smp.log_prob = log_prob_of(smp.raw, log_std, z);
        return smp;
    }

    // log-density of a squashed sample, including the tanh
    // change-of-variables correction.
    static double log_prob_of(double raw, double log_std, double z) {
        return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi) -
               std::log(1.0 - raw * raw + kSquashEps);
    }

    double deterministic_raw(const RlState& s) const {
        auto [mean, log_std] = head(s);
        (void)log_std;
        return std::tanh(mean);
    }

    // affine map between the squashed action and the admissible utility
    static double raw_to_utility(double raw, double u_r) {
        raw = std::clamp(raw, -1.0 + 1e-9, 1.0);
        return u_r + 0.5 * (1.0 + raw) * (1.0 - u_r);
    }
    static double utility_to_raw(double u, double u_r) {
        return 2.0 * (u - u_r) / (1.0 - u_r) - 1.0;
    }

private:
    Network net_;
};

// A trained bidding policy paired with its acceptance rule and the base
// negotiator it was trained against.
struct StrategyBundle {
    Network actor;  // [mean, log_std] head; deployed in deterministic mode
    AcceptancePolicy acceptance = AcceptancePolicy::ac_combi();
    std::string trained_vs;
    std::string scenario_id;
    std::string config_hash;
    std::uint64_t seed = 0;

    double propose_utility(const RlState& state, double u_r) const {
        GaussianPolicy policy(actor);
        return GaussianPolicy::raw_to_utility(policy.deterministic_raw(state), u_r);
    }
};

inline nlohmann::ordered_json acceptance_to_json(const AcceptancePolicy& a) {
    nlohmann::ordered_json j;
    switch (a.kind) {
        case AcceptancePolicy::Kind::ac_next: j["kind"] = "ac_next"; break;
        case AcceptancePolicy::Kind::ac_time: j["kind"] = "ac_time"; break;
        case AcceptancePolicy::Kind::ac_combi: j["kind"] = "ac_combi"; break;
    }
    j["t_acc"] = a.t_acc;
    j["window"] = a.window;
    return j;
}

inline AcceptancePolicy acceptance_from_json(const nlohmann::ordered_json& j) {
    AcceptancePolicy a;
    const std::string kind = j.at("kind");
    if (kind == "ac_next") a.kind = AcceptancePolicy::Kind::ac_next;
    else if (kind == "ac_time") a.kind = AcceptancePolicy::Kind::ac_time;
    else if (kind == "ac_combi") a.kind = AcceptancePolicy::Kind::ac_combi;
    else throw StructuralError("unknown acceptance kind: " + kind);
    a.t_acc = j.at("t_acc").get<double>();
    a.window = j.at("window").get<std::uint32_t>();
    return a;
}

inline nlohmann::ordered_json bundle_to_json(const StrategyBundle& b) {
    nlohmann::ordered_json j;
    j["format"] = "autoneg-bundle";
    j["version"] = 1;
    j["trained_vs"] = b.trained_vs;
    j["scenario_id"] = b.scenario_id;
    j["config_hash"] = b.config_hash;
    j["seed"] = b.seed;
    j["acceptance"] = acceptance_to_json(b.acceptance);
    j["actor"] = network_to_json(b.actor);
    return j;
}

inline StrategyBundle bundle_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "autoneg-bundle" || j.at("version") != 1)
        throw StructuralError("unsupported bundle file format/version");
    StrategyBundle b;
    b.trained_vs = j.at("trained_vs").get<std::string>();
    b.scenario_id = j.at("scenario_id").get<std::string>();
    b.config_hash = j.at("config_hash").get<std::string>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.acceptance = acceptance_from_json(j.at("acceptance"));
    b.actor = network_from_json(j.at("actor"));
    return b;
}

inline void save_bundle(const std::string& path, const StrategyBundle& b) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << bundle_to_json(b).dump(2) << '\n';
}

inline StrategyBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open bundle file: " + path);
    nlohmann::ordered_json j;
    in >> j;
    return bundle_from_json(j);
}

}  // namespace autoneg
