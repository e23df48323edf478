#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoneg/classifier.hpp"
#include "autoneg/errors.hpp"
#include "autoneg/strategy.hpp"

namespace autoneg {

struct PoolEntry {
    std::string negotiator_id;
    StrategyBundle bundle;
};

// The unit the reviewer mutates: negotiator-strategy pairs in classifier
// class order, plus the classifier trained for exactly that set.
struct StrategyPool {
    std::vector<PoolEntry> entries;
    std::optional<ClassifierModel> classifier;

    std::size_t size() const { return entries.size(); }

    std::vector<std::string> class_order() const {
        std::vector<std::string> ids;
        ids.reserve(entries.size());
        for (const PoolEntry& e : entries) ids.push_back(e.negotiator_id);
        return ids;
    }

    void validate() const {
        if (classifier) {
            if (classifier->class_order != class_order())
                throw ConfigError("pool classifier class order does not match entries");
        }
    }
};

namespace fs_detail {
inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out << text;
}
}  // namespace fs_detail

// Pool manifest directory layout:
//   pool.json            index: ids, bundle files, classifier file, k
//   bundle_<i>_<id>.json strategy bundles
//   classifier.json      present when |entries| > 1
// Writes go to a temp index swapped into place last, so a crashed save
// never leaves a manifest pointing at missing files.
inline void save_pool(const std::string& dir, const StrategyPool& pool) {
    namespace fs = std::filesystem;
    pool.validate();
    fs::create_directories(dir);
    nlohmann::ordered_json index;
    index["format"] = "autoneg-pool";
    index["version"] = 1;
    index["class_order"] = pool.class_order();
    index["bundles"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
        const std::string name =
            "bundle_" + std::to_string(i) + "_" + pool.entries[i].negotiator_id + ".json";
        fs_detail::write_text(fs::path(dir) / name,
                              bundle_to_json(pool.entries[i].bundle).dump(2) + "\n");
        index["bundles"].push_back(name);
    }
    if (pool.classifier) {
        fs_detail::write_text(fs::path(dir) / "classifier.json",
                              classifier_to_json(*pool.classifier).dump() + "\n");
        index["classifier"] = "classifier.json";
    } else {
        index["classifier"] = nullptr;
    }
    const fs::path tmp = fs::path(dir) / "pool.json.tmp";
    fs_detail::write_text(tmp, index.dump(2) + "\n");
    fs::rename(tmp, fs::path(dir) / "pool.json");
}

inline StrategyPool load_pool(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "pool.json");
    if (!in) throw Error("cannot open pool manifest in " + dir);
    nlohmann::ordered_json index;
    in >> index;
    if (index.at("format") != "autoneg-pool" || index.at("version") != 1)
        throw StructuralError("unsupported pool manifest format/version");
    StrategyPool pool;
    const auto ids = index.at("class_order").get<std::vector<std::string>>();
    const auto files = index.at("bundles").get<std::vector<std::string>>();
    if (ids.size() != files.size())
        throw StructuralError("pool manifest ids/bundles length mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        PoolEntry e;
        e.negotiator_id = ids[i];
        e.bundle = load_bundle((fs::path(dir) / files[i]).string());
        pool.entries.push_back(std::move(e));
    }
    if (!index.at("classifier").is_null()) {
        const std::string name = index.at("classifier").get<std::string>();
        pool.classifier = load_classifier((fs::path(dir) / name).string());
    }
    pool.validate();
    return pool;
}

}  // namespace autoneg
