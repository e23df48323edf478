#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "autoneg/domain.hpp"
#include "autoneg/errors.hpp"

namespace autoneg {

using Json = nlohmann::ordered_json;

// Scenario files store the raw (un-normalized) utility tables; loading
// applies min-max normalization.

inline Json profile_to_json(const PreferenceProfile& p) {
    Json j;
    j["weights"] = p.utility.weights;
    j["valuations"] = p.utility.valuations;
    j["reservation"] = p.reservation_value;
    return j;
}

inline PreferenceProfile profile_from_json(const Json& j, const OutcomeSpace& space) {
    PreferenceProfile p;
    p.utility.weights = j.at("weights").get<std::vector<double>>();
    p.utility.valuations = j.at("valuations").get<std::vector<std::vector<double>>>();
    p.reservation_value = j.at("reservation").get<double>();
    if (!p.utility.matches(space))
        throw StructuralError("profile shape does not match the issue list");
    if (!(p.reservation_value >= 0.0 && p.reservation_value < 1.0))
        throw StructuralError("reservation value must be in [0, 1)");
    p.utility = normalize(p.utility, space);
    return p;
}

inline Json scenario_to_json(const Scenario& sc) {
    Json j;
    j["issues"] = Json::array();
    for (const Issue& is : sc.outcome_space.issues()) {
        Json ji;
        ji["name"] = is.name;
        ji["values"] = is.values;
        j["issues"].push_back(std::move(ji));
    }
    j["profile_a"] = profile_to_json(sc.profile_a);
    j["profile_b"] = profile_to_json(sc.profile_b);
    return j;
}

inline Scenario scenario_from_json(const Json& j) {
    std::vector<Issue> issues;
    for (const Json& ji : j.at("issues")) {
        Issue is;
        is.name = ji.at("name").get<std::string>();
        is.values = ji.at("values").get<std::vector<std::string>>();
        for (std::size_t a = 0; a < is.values.size(); ++a)
            for (std::size_t b = a + 1; b < is.values.size(); ++b)
                if (is.values[a] == is.values[b])
                    throw StructuralError("duplicate value label in issue '" + is.name + "'");
        issues.push_back(std::move(is));
    }
    Scenario sc;
    sc.outcome_space = OutcomeSpace(std::move(issues));
    sc.profile_a = profile_from_json(j.at("profile_a"), sc.outcome_space);
    sc.profile_b = profile_from_json(j.at("profile_b"), sc.outcome_space);
    return sc;
}

inline void save_scenario(const std::string& path, const Scenario& sc) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << scenario_to_json(sc).dump(2) << '\n';
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw StructuralError("malformed scenario file " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace autoneg
