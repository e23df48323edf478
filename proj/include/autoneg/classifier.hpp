#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoneg/baselines.hpp"
#include "autoneg/domain.hpp"
#include "autoneg/errors.hpp"
#include "autoneg/neural.hpp"
#include "autoneg/protocol.hpp"
#include "autoneg/rng.hpp"

namespace autoneg {

// Rolling window of opponent-offer utilities. The classifier reads the
// last k values, zero-filled before the first offer, oldest first.
class OfferWindow {
public:
    explicit OfferWindow(std::size_t k) : k_(k) {
        if (k < 2) throw ConfigError("window length k must be > 1");
    }

    void push(double u) { values_.push_back(u); }
    std::size_t observed() const { return values_.size(); }
    bool full() const { return values_.size() >= k_; }

    std::vector<double> window() const {
        std::vector<double> w(k_, 0.0);
        const std::size_t n = std::min(values_.size(), k_);
        for (std::size_t i = 0; i < n; ++i)
            w[k_ - n + i] = values_[values_.size() - n + i];
        return w;
    }

private:
    std::size_t k_;
    std::vector<double> values_;
};

// Every prefix of the offer stream yields one window: the classifier input
// available right after each opponent offer.
inline std::vector<std::vector<double>> extract_windows(const std::vector<double>& offers,
                                                        std::size_t k) {
    std::vector<std::vector<double>> out;
    OfferWindow w(k);
    for (double u : offers) {
        w.push(u);
        out.push_back(w.window());
    }
    return out;
}

struct WindowDataset {
    std::size_t k = 20;
    std::vector<std::string> class_order;
    std::vector<std::vector<double>> windows;
    std::vector<int> labels;
    std::vector<int> session;  // source session id, for leakage-free splits
    std::vector<bool> full;    // true when the window carries no padding

    std::size_t size() const { return windows.size(); }
    std::size_t classes() const { return class_order.size(); }
};

struct DatasetOptions {
    int deadline_rounds = 100;
    int max_windows_per_session = 0;   // 0 = keep all
    int target_windows_per_class = 0;  // 0 = run exactly sessions_per_class sessions;
                                       // otherwise stop a class once it has this many
                                       // windows (sessions_per_class becomes a cap)
    // Probe schedule cycled across sessions. The probe must keep moving (a
    // pure Boulware probe sits still for half the session, so reactive
    // subjects degenerate into Boulware lookalikes) yet concede gently
    // enough that reactive subjects do not capitulate before a full window
    // exists. A linear pace over a high aspiration band does both.
    std::vector<TimeDependentParams> probes{TimeDependentParams{1.0, 0.0, 0.8, 1.0}};
};

// Simulates each base negotiator (with a fresh random profile per session)
// against a fixed-profile Boulware probe and collects the negotiator's
// offer stream projected onto the probe's utility axis.
inline WindowDataset build_dataset(const std::vector<std::string>& class_ids,
                                   const Scenario& scenario, int sessions_per_class,
                                   std::size_t k, std::uint64_t seed,
                                   const DatasetOptions& opts = {}) {
    if (class_ids.size() < 2) throw ConfigError("dataset needs at least 2 classes");
    if (k < 2) throw ConfigError("window length k must be > 1");
    WindowDataset ds;
    ds.k = k;
    ds.class_order = class_ids;
    const PreferenceProfile& probe_profile = scenario.profile_a;
    int session_id = 0;
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
        NegotiatorFactory make_class = make_baseline_factory(class_ids[c]);
        std::size_t class_windows = 0;
        for (int s = 0; s < sessions_per_class; ++s, ++session_id) {
            if (opts.target_windows_per_class > 0 &&
                class_windows >= static_cast<std::size_t>(opts.target_windows_per_class))
                break;
            const std::uint64_t session_seed =
                derive_seed(seed, c * 1000003ULL + static_cast<std::uint64_t>(s));
            Scenario sc;
            sc.outcome_space = scenario.outcome_space;
            sc.profile_a = probe_profile;
            sc.profile_b = random_profile(derive_seed(session_seed, 1), scenario.outcome_space);
            TimeDependentNegotiator probe(opts.probes[s % opts.probes.size()]);
            auto subject = make_class();
            SessionConfig cfg{opts.deadline_rounds, session_seed};
            // alternate who opens so both orderings appear in the data
            SessionResult res = s % 2 == 0 ? run_session(probe, *subject, sc, cfg)
                                           : run_session(*subject, probe, sc, cfg);
            const int subject_actor = s % 2 == 0 ? 1 : 0;
            std::vector<double> offers;
            for (const TraceStep& st : res.trace.steps)
                if (st.actor == subject_actor && st.action.kind == ActionKind::offer)
                    offers.push_back(probe_profile.utility.value(st.action.outcome));
            auto windows = extract_windows(offers, k);
            const std::size_t limit = opts.max_windows_per_session > 0
                                          ? std::min<std::size_t>(windows.size(),
                                                                  opts.max_windows_per_session)
                                          : windows.size();
            for (std::size_t w = 0; w < limit; ++w) {
                ds.windows.push_back(std::move(windows[w]));
                ds.labels.push_back(static_cast<int>(c));
                ds.session.push_back(session_id);
                ds.full.push_back(w + 1 >= k);
                ++class_windows;
            }
        }
        if (class_windows == 0)
            throw DatasetError("class '" + class_ids[c] + "' produced no usable windows");
    }
    return ds;
}

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// 80/20 split stratified by class, at session granularity so overlapping
// windows from one session never straddle the split.
inline DatasetSplit split_by_session(const WindowDataset& ds, double validation_fraction,
                                     std::uint64_t seed) {
    DatasetSplit split;
    Rng rng(seed);
    for (std::size_t c = 0; c < ds.classes(); ++c) {
        std::vector<int> sessions;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == static_cast<int>(c) &&
                (sessions.empty() || sessions.back() != ds.session[i]))
                sessions.push_back(ds.session[i]);
        // deterministic shuffle
        for (std::size_t i = sessions.size(); i > 1; --i)
            std::swap(sessions[i - 1], sessions[rng.index(i)]);
        const std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(sessions.size() * validation_fraction + 0.5));
        std::vector<int> val_set(sessions.begin(), sessions.begin() + n_val);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] != static_cast<int>(c)) continue;
            const bool in_val =
                std::find(val_set.begin(), val_set.end(), ds.session[i]) != val_set.end();
            (in_val ? split.validation : split.train).push_back(i);
        }
    }
    return split;
}

struct ClassifierModel {
    Network net;
    std::size_t k = 20;
    std::vector<std::string> class_order;
    double validation_accuracy = 0.0;
};

struct ClassifierTrainOptions {
    int epochs = 35;  // published range 30-40
    double lr = 1e-4;
    int batch = 50;
    std::size_t conv_filters = 32;
    std::size_t conv_kernel = 5;
    std::size_t dense_hidden = 64;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
};

inline std::vector<double> classify(const ClassifierModel& model,
                                    std::span<const double> window) {
    if (window.size() != model.k)
        throw StructuralError("classifier window length mismatch");
    return model.net.forward(window, 1);
}

inline double classifier_accuracy(const ClassifierModel& model, const WindowDataset& ds,
                                  const std::vector<std::size_t>& indices,
                                  bool full_windows_only = false) {
    std::size_t n = 0, hits = 0;
    for (std::size_t i : indices) {
        if (full_windows_only && !ds.full[i]) continue;
        const auto probs = classify(model, ds.windows[i]);
        const auto arg = std::max_element(probs.begin(), probs.end()) - probs.begin();
        if (arg == ds.labels[i]) ++hits;
        ++n;
    }
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

// Conv stack sized to the window: up to three valid-padding conv layers
// (20 -> 16 -> 12 -> 8 at k = 20), then two dense layers and a softmax.
inline Network build_classifier_net(std::size_t k, std::size_t classes,
                                    const ClassifierTrainOptions& opts) {
    std::vector<LayerSpec> specs;
    std::size_t len = k;
    for (int i = 0; i < 3 && len >= opts.conv_kernel; ++i) {
        specs.push_back(LayerSpec::conv1d(opts.conv_filters, opts.conv_kernel,
                                          Activation::relu));
        len = len - opts.conv_kernel + 1;
    }
    specs.push_back(LayerSpec::dense(opts.dense_hidden, Activation::relu));
    specs.push_back(LayerSpec::dense(classes, Activation::linear));
    specs.push_back(LayerSpec::softmax());
    return Network(k, 1, std::move(specs));
}

inline ClassifierModel train_classifier(const WindowDataset& ds,
                                        const ClassifierTrainOptions& opts = {}) {
    if (ds.classes() < 2) throw ConfigError("classifier needs at least 2 classes");
    if (ds.size() == 0) throw DatasetError("empty dataset");
    ClassifierModel model;
    model.k = ds.k;
    model.class_order = ds.class_order;
    model.net = build_classifier_net(ds.k, ds.classes(), opts);
    model.net.init_glorot_uniform(derive_seed(opts.seed, 1));
    AdamState adam(model.net);
    Rng shuffle_rng(derive_seed(opts.seed, 2));

    DatasetSplit split = split_by_session(ds, opts.validation_fraction, derive_seed(opts.seed, 3));
    std::vector<std::size_t> order = split.train;
    const std::size_t n_classes = ds.classes();

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opts.batch)) {
            const std::size_t B =
                std::min<std::size_t>(opts.batch, order.size() - start);
            std::vector<double> input(B * ds.k);
            std::vector<int> labels(B);
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t i = order[start + b];
                std::copy(ds.windows[i].begin(), ds.windows[i].end(),
                          input.begin() + b * ds.k);
                labels[b] = ds.labels[i];
            }
            ForwardCache cache;
            auto probs = model.net.forward(input, B, &cache);
            std::vector<double> grad;
            const double loss = categorical_crossentropy_batch(probs, labels, n_classes, &grad);
            if (!std::isfinite(loss)) throw Error("classifier training diverged (non-finite)");
            Gradients g = model.net.backward(cache, grad);
            adam_step(model.net, g, adam, opts.lr);
        }
    }
    model.validation_accuracy = classifier_accuracy(model, ds, split.validation);
    return model;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json classifier_to_json(const ClassifierModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "autoneg-classifier";
    j["version"] = 1;
    j["k"] = m.k;
    j["class_order"] = m.class_order;
    j["validation_accuracy"] = m.validation_accuracy;
    j["net"] = network_to_json(m.net);
    return j;
}

inline ClassifierModel classifier_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "autoneg-classifier" || j.at("version") != 1)
        throw StructuralError("unsupported classifier file format/version");
    ClassifierModel m;
    m.k = j.at("k").get<std::size_t>();
    m.class_order = j.at("class_order").get<std::vector<std::string>>();
    m.validation_accuracy = j.at("validation_accuracy").get<double>();
    m.net = network_from_json(j.at("net"));
    return m;
}

inline void save_classifier(const std::string& path, const ClassifierModel& m) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << classifier_to_json(m).dump() << '\n';
}

inline ClassifierModel load_classifier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open classifier file: " + path);
    nlohmann::ordered_json j;
    in >> j;
    return classifier_from_json(j);
}

inline void save_dataset(const std::string& path, const WindowDataset& ds) {
    nlohmann::ordered_json j;
    j["format"] = "autoneg-dataset";
    j["version"] = 1;
    j["k"] = ds.k;
    j["class_order"] = ds.class_order;
    j["windows"] = ds.windows;
    j["labels"] = ds.labels;
    j["session"] = ds.session;
    std::vector<int> full(ds.full.begin(), ds.full.end());
    j["full"] = full;
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump() << '\n';
}

}  // namespace autoneg
