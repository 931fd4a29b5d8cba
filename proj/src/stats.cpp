#include "iperc/stats.hpp"

#include <algorithm>
#include <limits>

namespace iperc {

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double s = 0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(r.n);
    if (r.n < 2) return r;
    double v = 0;
    for (double x : xs) v += (x - r.mean) * (x - r.mean);
    v /= static_cast<double>(r.n - 1);
    r.se = std::sqrt(v / static_cast<double>(r.n));
    return r;
}

ExpFit fit_exponential(const std::vector<double>& x, const std::vector<double>& p,
                       const std::vector<double>& se, double floor_p) {
    ExpFit fit;
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (p[i] <= 0 || p[i] < floor_p) continue;
        double y = std::log(p[i]);
        double sigma = se[i] > 0 ? se[i] / p[i] : 1e-6;  // delta method on log p
        double w = 1.0 / (sigma * sigma);
        sw += w;
        swx += w * x[i];
        swy += w * y;
        swxx += w * x[i] * x[i];
        swxy += w * x[i] * y;
        ++fit.points_used;
    }
    if (fit.points_used < 2) {
        fit.degenerate = true;
        fit.rate = std::numeric_limits<double>::infinity();
        return fit;
    }
    double det = sw * swxx - swx * swx;
    if (det <= 0) {
        fit.degenerate = true;
        fit.rate = std::numeric_limits<double>::infinity();
        return fit;
    }
    double slope = (sw * swxy - swx * swy) / det;
    fit.rate = -slope;
    fit.log_prefactor = (swxx * swy - swx * swxy) / det;
    fit.rate_se = std::sqrt(sw / det);
    return fit;
}

KsResult ks_test_exp1(std::vector<double> samples) {
    KsResult r;
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();
    for (size_t i = 0; i < n; ++i) {
        double f = 1.0 - std::exp(-samples[i]);
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        r.statistic = std::max(r.statistic, std::max(std::abs(f - lo), std::abs(f - hi)));
    }
    r.scaled = std::sqrt(static_cast<double>(n)) * r.statistic;
    r.reject_at_1pct = r.scaled > 1.6276;  // asymptotic 1% critical value
    return r;
}

}  // namespace iperc
