#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "autoneg/classifier.hpp"

using namespace autoneg;

namespace {

// Synthetic, trivially separable windows: class 0 hovers low, class 1 high.
WindowDataset separable_dataset(std::size_t k, int sessions_per_class, int windows_per_session,
                                std::uint64_t seed) {
    WindowDataset ds;
    ds.k = k;
    ds.class_order = {"low", "high"};
    Rng rng(seed);
    int session = 0;
    for (int c = 0; c < 2; ++c) {
        for (int s = 0; s < sessions_per_class; ++s, ++session) {
            for (int w = 0; w < windows_per_session; ++w) {
                std::vector<double> win(k);
                for (double& v : win)
                    v = std::clamp((c == 0 ? 0.2 : 0.8) + 0.05 * rng.normal(), 0.0, 1.0);
                ds.windows.push_back(std::move(win));
                ds.labels.push_back(c);
                ds.session.push_back(session);
                ds.full.push_back(true);
            }
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("prefix windows are zero-padded on the left") {
    std::vector<double> offers{0.11, 0.22, 0.33, 0.44, 0.55};
    auto windows = extract_windows(offers, 20);
    REQUIRE(windows.size() == 5);  // one window per observed offer
    for (std::size_t t = 0; t < windows.size(); ++t) {
        REQUIRE(windows[t].size() == 20);
        // leading zeros, then the first t+1 offers in order
        for (std::size_t i = 0; i < 19 - t; ++i) REQUIRE(windows[t][i] == 0.0);
        for (std::size_t i = 0; i <= t; ++i)
            REQUIRE(windows[t][19 - t + i] == offers[i]);
    }
}

TEST_CASE("consecutive windows overlap in k-1 positions") {
    std::vector<double> offers;
    Rng rng(5);
    for (int i = 0; i < 30; ++i) offers.push_back(rng.uniform01());
    const std::size_t k = 8;
    auto windows = extract_windows(offers, k);
    for (std::size_t t = 1; t < windows.size(); ++t)
        for (std::size_t i = 0; i < k - 1; ++i)
            REQUIRE(windows[t][i] == windows[t - 1][i + 1]);
}

TEST_CASE("offer window reports fullness and keeps the last k values") {
    OfferWindow w(4);
    REQUIRE_THROWS_AS(OfferWindow(1), ConfigError);
    for (int i = 1; i <= 6; ++i) w.push(i / 10.0);
    REQUIRE(w.full());
    REQUIRE(w.window() == std::vector<double>{0.3, 0.4, 0.5, 0.6});
}

TEST_CASE("dataset windows stay in the unit interval with balanced classes") {
    Scenario sc = generate_scenario(51, 80, 0.2);
    WindowDataset ds = build_dataset(baseline_ids(), sc, 4, 10, 77, DatasetOptions{40, 0});
    REQUIRE(ds.classes() == 3);
    std::vector<int> sessions_per_class(3, 0);
    std::vector<int> last_session(3, -1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.windows[i]) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
        if (ds.session[i] != last_session[ds.labels[i]]) {
            last_session[ds.labels[i]] = ds.session[i];
            sessions_per_class[ds.labels[i]]++;
        }
    }
    // a session can end before the subject bids, so allow one short
    for (int c : sessions_per_class) {
        REQUIRE(c >= 3);
        REQUIRE(c <= 4);
    }
    REQUIRE_THROWS_AS(build_dataset(baseline_ids(), sc, 0, 10, 77), DatasetError);
    REQUIRE_THROWS_AS(build_dataset({"boulware"}, sc, 2, 10, 77), ConfigError);
}

TEST_CASE("session-stratified split keeps class balance within one session") {
    Scenario sc = generate_scenario(53, 60, 0.25);
    WindowDataset ds = build_dataset(baseline_ids(), sc, 5, 10, 78, DatasetOptions{30, 0});
    DatasetSplit split = split_by_session(ds, 0.2, 9);
    REQUIRE(split.train.size() + split.validation.size() == ds.size());
    // every session lands fully on one side
    for (std::size_t i : split.train)
        for (std::size_t j : split.validation) REQUIRE(ds.session[i] != ds.session[j]);
    // one validation session per class (5 sessions -> 1)
    std::vector<int> val_sessions_per_class(3, 0);
    std::vector<int> seen(3, -1);
    for (std::size_t i : split.validation) {
        if (seen[ds.labels[i]] != ds.session[i]) {
            seen[ds.labels[i]] = ds.session[i];
            val_sessions_per_class[ds.labels[i]]++;
        }
    }
    for (int c : val_sessions_per_class) REQUIRE(c == 1);
}

TEST_CASE("one epoch on separable desk-scale data lifts accuracy above chance") {
    WindowDataset ds = separable_dataset(20, 100, 30, 42);
    ClassifierTrainOptions opts;
    opts.epochs = 1;
    opts.seed = 7;
    ClassifierModel model = train_classifier(ds, opts);
    DatasetSplit split = split_by_session(ds, 0.2, derive_seed(7, 3));
    const double train_acc = classifier_accuracy(model, ds, split.train);
    REQUIRE(train_acc > 0.5);
}

TEST_CASE("classifier training is deterministic in its seed") {
    WindowDataset ds = separable_dataset(20, 4, 10, 43);
    ClassifierTrainOptions opts;
    opts.epochs = 2;
    opts.seed = 11;
    ClassifierModel a = train_classifier(ds, opts);
    ClassifierModel b = train_classifier(ds, opts);
    REQUIRE(network_to_json(a.net).dump() == network_to_json(b.net).dump());
    REQUIRE(a.validation_accuracy == b.validation_accuracy);
}

TEST_CASE("classify is a pure function returning a distribution") {
    WindowDataset ds = separable_dataset(20, 4, 10, 44);
    ClassifierTrainOptions opts;
    opts.epochs = 1;
    opts.seed = 12;
    ClassifierModel model = train_classifier(ds, opts);

    std::vector<double> zeros(20, 0.0);  // pre-first-offer input
    auto p1 = classify(model, zeros);
    auto p2 = classify(model, zeros);
    REQUIRE(p1 == p2);
    double sum = 0.0;
    for (double v : p1) {
        REQUIRE(v >= 0.0);
        sum += v;
    }
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-6));

    std::vector<double> wrong(19, 0.0);
    REQUIRE_THROWS_AS(classify(model, wrong), StructuralError);
}

TEST_CASE("classifier serialization round-trips bit-exactly") {
    WindowDataset ds = separable_dataset(20, 3, 8, 45);
    ClassifierTrainOptions opts;
    opts.epochs = 1;
    opts.seed = 13;
    ClassifierModel model = train_classifier(ds, opts);
    const std::string text = classifier_to_json(model).dump();
    ClassifierModel back = classifier_from_json(nlohmann::ordered_json::parse(text));
    REQUIRE(classifier_to_json(back).dump() == text);
    REQUIRE(back.class_order == model.class_order);
    std::vector<double> w(20, 0.5);
    REQUIRE(classify(back, w) == classify(model, w));
}

TEST_CASE("conv stack adapts to short windows") {
    // k = 20 gives the full three-layer stack (20 -> 16 -> 12 -> 8)
    ClassifierTrainOptions opts;
    Network n20 = build_classifier_net(20, 3, opts);
    std::size_t convs = 0;
    for (const LayerSpec& s : n20.specs())
        if (s.kind == LayerSpec::Kind::conv1d) ++convs;
    REQUIRE(convs == 3);
    // k = 6 fits a single conv layer
    Network n6 = build_classifier_net(6, 3, opts);
    convs = 0;
    for (const LayerSpec& s : n6.specs())
        if (s.kind == LayerSpec::Kind::conv1d) ++convs;
    REQUIRE(convs == 1);
    REQUIRE(n6.forward(std::vector<double>(6, 0.1), 1).size() == 3);
}
