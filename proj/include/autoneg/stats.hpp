#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include <boost/math/distributions/students_t.hpp>

namespace autoneg {

// Compensated (Kahan) summation; aggregation pipelines use this so that
// re-aggregating raw logs reproduces reported means exactly.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
        ++n_;
    }
    double sum() const { return s_; }
    std::size_t count() const { return n_; }
    double mean() const { return n_ ? s_ / static_cast<double>(n_) : 0.0; }

private:
    double s_ = 0.0, c_ = 0.0;
    std::size_t n_ = 0;
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1)
    std::size_t n = 0;
};

inline Summary summarize(std::span<const double> xs) {
    Summary s;
    s.n = xs.size();
    if (s.n == 0) return s;
    KahanSum ks;
    for (double x : xs) ks.add(x);
    s.mean = ks.mean();
    if (s.n > 1) {
        KahanSum sq;
        for (double x : xs) sq.add((x - s.mean) * (x - s.mean));
        s.stddev = std::sqrt(sq.sum() / static_cast<double>(s.n - 1));
    }
    return s;
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

// Welch's unequal-variance two-sample t-test with the
// Welch-Satterthwaite degrees of freedom. Two identical zero-variance
// samples give p = 1 by convention.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    const Summary sa = summarize(a);
    const Summary sb = summarize(b);
    TTestResult r;
    if (sa.n < 2 || sb.n < 2) return r;
    const double va = sa.stddev * sa.stddev / static_cast<double>(sa.n);
    const double vb = sb.stddev * sb.stddev / static_cast<double>(sb.n);
    const double denom = va + vb;
    if (denom <= 0.0) {
        r.t = 0.0;
        r.df = static_cast<double>(sa.n + sb.n - 2);
        r.p = 1.0;
        return r;
    }
    r.t = (sa.mean - sb.mean) / std::sqrt(denom);
    r.df = denom * denom /
           (va * va / static_cast<double>(sa.n - 1) + vb * vb / static_cast<double>(sb.n - 1));
    const boost::math::students_t dist(r.df);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    return r;
}

// Family-wise significance threshold for m comparisons at level 0.05.
inline double bonferroni_threshold(std::size_t m) {
    return 0.05 / static_cast<double>(m);
}

}  // namespace autoneg
