#pragma once

#include <stdexcept>
#include <string>

namespace autoneg {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed inputs: bad outcome indices, shape mismatches, empty spaces.
struct StructuralError : Error {
    using Error::Error;
};

// Operation called in a state where it is not defined (e.g. step() after
// the episode terminated, backward() before forward()).
struct StateError : Error {
    using Error::Error;
};

// Inconsistent or unresolvable configuration (unknown ids, count mismatches).
struct ConfigError : Error {
    using Error::Error;
};

// Raw utility constant over the outcome space; min-max normalization undefined.
struct DegenerateScenarioError : Error {
    using Error::Error;
};

// Scenario generation could not reach its targets within the retry budget.
struct GenerationError : Error {
    GenerationError(const std::string& msg, double best_opposition)
        : Error(msg), best_opposition(best_opposition) {}
    double best_opposition;
};

// Classifier dataset construction produced an unusable class.
struct DatasetError : Error {
    using Error::Error;
};

}  // namespace autoneg
