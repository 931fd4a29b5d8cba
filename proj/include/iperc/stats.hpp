#pragma once

#include <cmath>
#include <vector>

namespace iperc {

struct MeanSe {
    double mean = 0;
    double se = 0;
    size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& xs);

inline double binomial_se(double p_hat, size_t n) {
    return n ? std::sqrt(p_hat * (1 - p_hat) / static_cast<double>(n)) : 0.0;
}

// Weighted least-squares fit of log p = log C - rate * x, weights (p/se)^2.
// Points with p below `floor_p` are dropped. rate = +inf marks a degenerate
// all-zero tail.
struct ExpFit {
    double rate = 0;
    double rate_se = 0;
    double log_prefactor = 0;
    size_t points_used = 0;
    bool degenerate = false;

    double rate_ci_low() const { return rate - 1.96 * rate_se; }
    double rate_ci_high() const { return rate + 1.96 * rate_se; }
};

ExpFit fit_exponential(const std::vector<double>& x, const std::vector<double>& p,
                       const std::vector<double>& se, double floor_p = 0.0);

// One-sample Kolmogorov-Smirnov test against Exp(1).
struct KsResult {
    double statistic = 0;
    double scaled = 0;  // sqrt(n) * D
    bool reject_at_1pct = false;
};

KsResult ks_test_exp1(std::vector<double> samples);

}  // namespace iperc
