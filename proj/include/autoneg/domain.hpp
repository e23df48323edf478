#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "autoneg/errors.hpp"
#include "autoneg/rng.hpp"
#include "autoneg/text.hpp"

namespace autoneg {

// A single negotiation issue: a named, ordered set of discrete values.
struct Issue {
    std::string name;
    std::vector<std::string> values;

    std::size_t cardinality() const { return values.size(); }
};

// One chosen value index per issue.
struct Outcome {
    std::vector<std::uint32_t> choices;

    bool operator==(const Outcome& o) const { return choices == o.choices; }
};

// Cartesian product of issues. Outcomes are enumerable in canonical
// lexicographic order: issue 0 is the most significant digit, value
// indices increase last-issue-fastest.
class OutcomeSpace {
public:
    OutcomeSpace() = default;
    explicit OutcomeSpace(std::vector<Issue> issues) : issues_(std::move(issues)) {
        if (issues_.empty()) throw StructuralError("outcome space needs at least one issue");
        strides_.assign(issues_.size(), 1);
        std::size_t n = 1;
        for (std::size_t i = issues_.size(); i-- > 0;) {
            const std::size_t c = issues_[i].cardinality();
            if (c == 0) throw StructuralError("issue '" + issues_[i].name + "' has no values");
            strides_[i] = n;
            if (n > std::numeric_limits<std::size_t>::max() / c)
                throw StructuralError("outcome space cardinality overflows");
            n *= c;
        }
        size_ = n;
    }

    const std::vector<Issue>& issues() const { return issues_; }
    std::size_t num_issues() const { return issues_.size(); }
    std::size_t size() const { return size_; }

    std::size_t index_of(const Outcome& o) const {
        check(o);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < issues_.size(); ++i) idx += o.choices[i] * strides_[i];
        return idx;
    }

    Outcome outcome_at(std::size_t index) const {
        if (index >= size_) throw StructuralError("outcome index out of range");
        Outcome o;
        o.choices.resize(issues_.size());
        for (std::size_t i = 0; i < issues_.size(); ++i) {
            o.choices[i] = static_cast<std::uint32_t>(index / strides_[i]);
            index %= strides_[i];
        }
        return o;
    }

    void check(const Outcome& o) const {
        if (o.choices.size() != issues_.size())
            throw StructuralError("outcome has wrong number of choices");
        for (std::size_t i = 0; i < issues_.size(); ++i)
            if (o.choices[i] >= issues_[i].cardinality())
                throw StructuralError("outcome value index out of range for issue '" +
                                      issues_[i].name + "'");
    }

private:
    std::vector<Issue> issues_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

// Linear-additive utility: U(omega) = sum_i weights[i] * valuations[i][choice_i].
// In normalized form the weights are nonnegative and sum to 1, every
// non-constant issue's valuations span [0, 1], and consequently
// min_Omega U = 0 and max_Omega U = 1.
struct UtilityFunction {
    std::vector<double> weights;                  // one per issue
    std::vector<std::vector<double>> valuations;  // one table per issue

    double value(const Outcome& o) const {
        if (o.choices.size() != weights.size())
            throw StructuralError("outcome does not match utility function shape");
        double u = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (o.choices[i] >= valuations[i].size())
                throw StructuralError("outcome value index out of range");
            u += weights[i] * valuations[i][o.choices[i]];
        }
        return u;
    }

    bool matches(const OutcomeSpace& space) const {
        if (weights.size() != space.num_issues() || valuations.size() != space.num_issues())
            return false;
        for (std::size_t i = 0; i < valuations.size(); ++i)
            if (valuations[i].size() != space.issues()[i].cardinality()) return false;
        return true;
    }

    // Normalized form: weights sum to 1, each issue's valuations span
    // exactly [0, 1] (or the issue has weight 0).
    bool is_normalized(double tol = 1e-9) const {
        double wsum = 0.0;
        bool any_span = false;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] < 0.0) return false;
            wsum += weights[i];
            auto [mn, mx] = std::minmax_element(valuations[i].begin(), valuations[i].end());
            if (weights[i] <= tol) continue;
            if (std::fabs(*mn) > tol || std::fabs(*mx - 1.0) > tol) return false;
            any_span = true;
        }
        return any_span && std::fabs(wsum - 1.0) <= tol;
    }
};

struct PreferenceProfile {
    UtilityFunction utility;
    double reservation_value = 0.0;  // in [0, 1)
};

struct Scenario {
    OutcomeSpace outcome_space;
    PreferenceProfile profile_a;
    PreferenceProfile profile_b;
};

// --- operations -----------------------------------------------------------

inline double utility(const PreferenceProfile& profile, const Outcome& outcome) {
    return profile.utility.value(outcome);
}

// Min-max normalization of a linear-additive function is again linear-additive:
// shift each issue's valuations to start at 0, fold the per-issue spans into
// the weights, and divide by the global span. Constant issues end up with
// weight 0.
inline UtilityFunction normalize(const UtilityFunction& raw, const OutcomeSpace& space) {
    if (!raw.matches(space)) throw StructuralError("utility function does not match space");
    if (raw.is_normalized()) return raw;  // idempotent, bit-exactly
    const std::size_t m = space.num_issues();
    double total_span = 0.0;
    std::vector<double> lo(m), span(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto [mn, mx] = std::minmax_element(raw.valuations[i].begin(), raw.valuations[i].end());
        lo[i] = *mn;
        span[i] = *mx - *mn;
        if (raw.weights[i] < 0.0) throw StructuralError("negative issue weight");
        total_span += raw.weights[i] * span[i];
    }
    if (total_span <= 0.0)
        throw DegenerateScenarioError("raw utility is constant over the outcome space");
    UtilityFunction out;
    out.weights.resize(m);
    out.valuations.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.weights[i] = raw.weights[i] * span[i] / total_span;
        out.valuations[i].resize(raw.valuations[i].size());
        if (span[i] > 0.0) {
            for (std::size_t v = 0; v < raw.valuations[i].size(); ++v)
                out.valuations[i][v] = (raw.valuations[i][v] - lo[i]) / span[i];
        }  // constant issue: weight 0, valuations stay 0
    }
    return out;
}

// Exact inverse utility per the argmin definition: the outcome minimizing
// (U(omega) - target)^2, ties broken by lowest canonical enumeration index.
inline Outcome inverse_utility(const PreferenceProfile& profile, double target,
                               const OutcomeSpace& space) {
    const std::size_t n = space.size();
    if (n == 0) throw StructuralError("empty outcome space");
    std::size_t best = 0;
    double best_f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = profile.utility.value(space.outcome_at(i)) - target;
        const double f = d * d;
        if (f < best_f) {
            best_f = f;
            best = i;
        }
    }
    return space.outcome_at(best);
}

// Per-session acceleration structure: utilities for every outcome plus a
// sorted view for nearest-utility lookups. Semantics match the exhaustive
// argmin above exactly, including the tie-break.
class ProfileIndex {
public:
    ProfileIndex() = default;
    ProfileIndex(const OutcomeSpace& space, const PreferenceProfile& profile)
        : space_(&space), reservation_(profile.reservation_value) {
        const std::size_t n = space.size();
        if (n == 0) throw StructuralError("empty outcome space");
        utilities_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            utilities_[i] = profile.utility.value(space.outcome_at(i));
        order_.resize(n);
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            if (utilities_[a] != utilities_[b]) return utilities_[a] < utilities_[b];
            return a < b;
        });
    }

    const OutcomeSpace& space() const { return *space_; }
    double reservation() const { return reservation_; }
    std::size_t size() const { return utilities_.size(); }
    double utility_at(std::size_t outcome_index) const { return utilities_[outcome_index]; }
    double max_utility() const { return utilities_[order_.back()]; }
    double min_utility() const { return utilities_[order_.front()]; }

    // argmin over all outcomes of (U - target)^2; ties -> lowest index.
    std::size_t inverse(double target) const {
        return inverse_in_range(target, 0);
    }

    // Same argmin restricted to outcomes with U > floor (exclusive) or
    // U >= floor (inclusive). Used by negotiators to honor reservation.
    std::size_t inverse_floored(double target, double floor, bool exclusive) const {
        std::size_t lo = lower_bound_pos(floor);
        if (exclusive) {
            while (lo < order_.size() && utilities_[order_[lo]] <= floor) ++lo;
        }
        if (lo >= order_.size())
            throw StructuralError("no outcome above the requested utility floor");
        return inverse_in_range(target, lo);
    }

private:
    std::size_t lower_bound_pos(double u) const {
        std::size_t lo = 0, hi = order_.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (utilities_[order_[mid]] < u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    }

    std::size_t inverse_in_range(double target, std::size_t from) const {
        const std::size_t n = order_.size();
        // First sorted position >= target (within [from, n)).
        std::size_t pos = std::max(from, lower_bound_pos(target));
        double best_f = std::numeric_limits<double>::infinity();
        double best_u = 0.0;
        if (pos < n) {
            best_u = utilities_[order_[pos]];
            const double d = best_u - target;
            best_f = d * d;
        }
        if (pos > from) {
            const double u = utilities_[order_[pos - 1]];
            const double d = u - target;
            if (d * d < best_f) {
                best_f = d * d;
                best_u = u;
                pos = pos - 1;
            } else if (d * d == best_f && pos < n) {
                // Distinct utilities, equal squared distance: argmin set spans
                // both value groups; take the lowest canonical index in the
                // closed utility interval [u, best_u].
                return min_index_between(u, best_u, from);
            }
        }
        if (!(best_f < std::numeric_limits<double>::infinity()))
            throw StructuralError("inverse utility on empty range");
        return min_index_for_value(best_u, from);
    }

    std::size_t min_index_for_value(double u, std::size_t from) const {
        return min_index_between(u, u, from);
    }

    std::size_t min_index_between(double u_lo, double u_hi, std::size_t from) const {
        std::size_t first = std::max(from, lower_bound_pos(u_lo));
        std::size_t best = order_.size() + 1;
        for (std::size_t i = first; i < order_.size() && utilities_[order_[i]] <= u_hi; ++i)
            best = std::min(best, order_[i]);
        return best;
    }

    const OutcomeSpace* space_ = nullptr;
    double reservation_ = 0.0;
    std::vector<double> utilities_;
    std::vector<std::size_t> order_;
};

// Scenario competitiveness: minimum joint-utility distance to the ideal
// point (1,1). Exhaustive scan over the outcome space.
inline double opposition(const Scenario& sc) {
    const std::size_t n = sc.outcome_space.size();
    if (n == 0) throw StructuralError("empty outcome space");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Outcome o = sc.outcome_space.outcome_at(i);
        const double da = 1.0 - sc.profile_a.utility.value(o);
        const double db = 1.0 - sc.profile_b.utility.value(o);
        best = std::min(best, std::sqrt(da * da + db * db));
    }
    return best;
}

// Random normalized profile: weights from a flat simplex distribution,
// valuations uniform in [0,1], reservation 0.
inline PreferenceProfile random_profile(std::uint64_t seed, const OutcomeSpace& space) {
    Rng rng(seed);
    const std::size_t m = space.num_issues();
    UtilityFunction raw;
    raw.weights.resize(m);
    raw.valuations.resize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        // -log(U) exponentials normalized -> uniform on the simplex.
        double u = rng.uniform01();
        while (u <= 0.0) u = rng.uniform01();
        raw.weights[i] = -std::log(u);
        total += raw.weights[i];
    }
    for (std::size_t i = 0; i < m; ++i) raw.weights[i] /= total;
    for (std::size_t i = 0; i < m; ++i) {
        raw.valuations[i].resize(space.issues()[i].cardinality());
        for (auto& v : raw.valuations[i]) v = rng.uniform01();
    }
    return PreferenceProfile{normalize(raw, space), 0.0};
}

namespace detail {

// Issue sizes whose product lands within a factor of two of the target.
inline std::vector<std::size_t> factor_cardinality(std::size_t target, Rng& rng) {
    const int num_issues = target < 8 ? 1 : (target < 64 ? 2 : (target < 2000 ? 3 : 4));
    std::vector<std::size_t> sizes(num_issues);
    double remaining = static_cast<double>(target);
    for (int i = 0; i < num_issues; ++i) {
        const int left = num_issues - i;
        double s = std::round(std::pow(remaining, 1.0 / left));
        // jitter non-final issues so distinct seeds give distinct shapes
        if (left > 1 && s >= 3.0 && rng.uniform01() < 0.5) s += (rng.uniform01() < 0.5 ? -1 : 1);
        s = std::max(2.0, s);
        sizes[i] = static_cast<std::size_t>(s);
        remaining = std::max(2.0, remaining / s);
    }
    return sizes;
}

}  // namespace detail

// Deterministic synthetic scenario targeting an outcome-space cardinality
// (within x2) and an opposition level (within 0.1, by rejection-sampling
// profile pairs).
inline Scenario generate_scenario(std::uint64_t seed, std::size_t target_cardinality,
                                  double target_opposition, int max_attempts = 400) {
    if (target_cardinality < 2) throw ConfigError("target cardinality must be >= 2");
    if (!(target_opposition >= 0.0 && target_opposition < std::numbers::sqrt2))
        throw ConfigError("target opposition must be in [0, sqrt(2))");
    Rng shape_rng(derive_seed(seed, 0));
    std::vector<Issue> issues;
    const auto sizes = detail::factor_cardinality(target_cardinality, shape_rng);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        Issue is;
        is.name = "issue" + fmt_int(static_cast<long long>(i));
        for (std::size_t v = 0; v < sizes[i]; ++v)
            is.values.push_back("v" + fmt_int(static_cast<long long>(v)));
        issues.push_back(std::move(is));
    }
    OutcomeSpace space(std::move(issues));

    double best_err = std::numeric_limits<double>::infinity();
    double best_opp = 0.0;
    Scenario best;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Scenario sc;
        sc.outcome_space = space;
        sc.profile_a = random_profile(derive_seed(seed, 2 * attempt + 1), space);
        sc.profile_b = random_profile(derive_seed(seed, 2 * attempt + 2), space);
        const double opp = opposition(sc);
        const double err = std::fabs(opp - target_opposition);
        if (err < best_err) {
            best_err = err;
            best_opp = opp;
            best = std::move(sc);
        }
        if (best_err <= 0.1) return best;
    }
    throw GenerationError("could not reach opposition " + fmt_double(target_opposition) +
                              " within " + fmt_int(max_attempts) +
                              " attempts; best achieved " + fmt_double(best_opp),
                          best_opp);
}

}  // namespace autoneg
