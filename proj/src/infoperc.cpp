#include "iperc/infoperc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iperc/parallel.hpp"

namespace iperc {

bool sup_empty(const Lattice& lat, const UpdateRealization& real, const ModelParams& p, double t,
               double t_prime, const std::vector<int>& A) {
    if (t < t_prime) throw std::invalid_argument("sup_empty: t < t_prime");
    if (t > real.window + 1e-12) throw std::invalid_argument("sup_empty: window too short");
    auto [top, bot] = evolve_extremal(lat, real, p, t, t_prime);
    for (int v : A)
        if (top.s[v] != bot.s[v]) return false;
    return true;
}

std::vector<int> upd(const Lattice& lat, const UpdateRealization& real, double t, double t_prime,
                     const std::vector<int>& A, const SiteMask* allowed, bool* exited) {
    if (exited) *exited = false;
    std::vector<char> armed(lat.n_sites, 0), reached(lat.n_sites, 0);
    for (int v : A) {
        armed[v] = 1;
        reached[v] = 1;
        if (allowed && !(*allowed)[v] && exited) *exited = true;
    }
    auto [first, last] = real.range(t, t_prime);
    // backward in time: latest events first
    for (size_t i = last; i-- > first;) {
        const UpdateEvent& ev = real.events[i];
        if (!armed[ev.site]) continue;
        const int32_t* nb = lat.nbr.data() + static_cast<size_t>(ev.site) * lat.deg;
        for (int k = 0; k < lat.deg; ++k) {
            int w = nb[k];
            if (w < 0) continue;
            if (!reached[w]) {
                reached[w] = 1;
                if (allowed && !(*allowed)[w]) {
                    if (exited) *exited = true;
                    return mask_to_list(reached);
                }
            }
            armed[w] = 1;
        }
        armed[ev.site] = 0;
    }
    return mask_to_list(reached);
}

double exact_tau(const Lattice& lat, const UpdateRealization& real, const ModelParams& p,
                 const std::vector<int>& A, double t_prime, double W) {
    if (sup_empty(lat, real, p, t_prime, t_prime, A)) return t_prime;
    std::vector<double> lags;
    auto [first, last] = real.range(W, t_prime);
    for (size_t i = last; i-- > first;) lags.push_back(-real.events[i].time);  // ascending
    size_t lo = 0, hi = lags.size();  // invariant: lag at index hi works (hi==size -> W)
    while (lo < hi) {
        size_t mid = lo + (hi - lo) / 2;
        if (sup_empty(lat, real, p, lags[mid], t_prime, A))
            hi = mid;
        else
            lo = mid + 1;
    }
    return hi < lags.size() ? lags[hi] : W;
}

CouplingResult coupling_time(const Lattice& lat, const ModelParams& p, const std::vector<int>& A,
                             double t_prime, double t_max, uint64_t seed) {
    CouplingResult res;
    res.t_prime = t_prime;
    res.target = A;
    double step = 1;
    UpdateRealization real = sample_updates(lat.n_sites, std::min(t_prime + step, t_max), seed);
    for (;;) {
        double W = real.window;
        if (sup_empty(lat, real, p, W, t_prime, A)) {
            res.coupled = true;
            res.certified_window = W;
            res.tau = exact_tau(lat, real, p, A, t_prime, W);
            auto [top, bot] = evolve_extremal(lat, real, p, W, t_prime);
            (void)bot;
            res.sample.reserve(A.size());
            for (int v : A) res.sample.push_back(top.s[v]);
            res.real = std::move(real);
            return res;
        }
        if (W >= t_max) {
            res.certified_window = W;
            res.tau = W;
            res.real = std::move(real);
            return res;
        }
        step *= 2;
        real = extend_backward(real, std::min(t_prime + step, t_max));
    }
}

KupdResult kupd(const Lattice& lat, const ModelParams& p, const std::vector<int>& A,
                double t_prime, double t_max, uint64_t seed) {
    KupdResult r;
    r.coupling = coupling_time(lat, p, A, t_prime, t_max, seed);
    if (r.coupling.coupled) r.set = kupd_from_coupling(lat, r.coupling);
    return r;
}

std::vector<int> kupd_from_coupling(const Lattice& lat, const CouplingResult& c) {
    if (!c.coupled) throw std::invalid_argument("kupd on an uncoupled realization");
    return upd(lat, c.real, c.tau, c.t_prime, c.target);
}

DecayFit estimate_sup_decay(const Lattice& lat, const ModelParams& p, double t,
                            const std::vector<double>& t_prime_grid, long replicas, uint64_t seed,
                            int workers) {
    DecayFit out;
    out.t_prime = t_prime_grid;
    const std::vector<int> site0{0};
    for (size_t gi = 0; gi < t_prime_grid.size(); ++gi) {
        const double window = t + t_prime_grid[gi];
        std::vector<char> nonempty(replicas, 0);
        for_each_replica(replicas, workers, [&](long r) {
            UpdateRealization real =
                sample_updates(lat.n_sites, window, mix_seed(seed, gi, static_cast<uint64_t>(r)));
            nonempty[r] = sup_empty(lat, real, p, window, t, site0) ? 0 : 1;
        });
        long hits = std::count(nonempty.begin(), nonempty.end(), char{1});
        double ph = static_cast<double>(hits) / static_cast<double>(replicas);
        out.n_replicas.push_back(replicas);
        out.n_nonempty.push_back(hits);
        out.p_hat.push_back(ph);
        out.se.push_back(binomial_se(ph, static_cast<size_t>(replicas)));
    }
    out.fit = fit_exponential(out.t_prime, out.p_hat, out.se);
    return out;
}

bool check_block_event(const TorusGeom& g, const Lattice& lat, const UpdateRealization& real,
                       const ModelParams& p, int w_center_site, double t_prime, int l,
                       double eps) {
    if (l < 1) throw std::invalid_argument("block scale must be >= 1");
    if (eps <= 0) eps = epsilon0(g.d());
    const double X = t_prime + 1.5 * eps * l;  // coupling deadline
    if (real.window + 1e-12 < X)
        throw std::invalid_argument("realization window too short for block event");

    std::vector<int> block;
    SiteMask container(g.n_sites(), 0);
    const double rad = 1.5 * l;
    for (int v = 0; v < g.n_sites(); ++v) {
        int dist = g.linf_dist(v, w_center_site);
        if (dist <= l) block.push_back(v);
        if (dist <= rad) container[v] = 1;
    }

    // Evaluation lags: the interval endpoints plus every event lag inside
    // [t', t' + eps l]. Both sup-emptiness and UPD are constant on the lag
    // classes between consecutive event times, so this grid is exhaustive.
    std::vector<double> lags{t_prime, t_prime + eps * l};
    {
        auto [first, last] = real.range(t_prime + eps * l, t_prime);
        for (size_t i = first; i < last; ++i) lags.push_back(-real.events[i].time);
    }
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());

    for (int v : block) {
        const std::vector<int> A{v};
        for (double t : lags) {
            if (!sup_empty(lat, real, p, X, t, A)) return false;  // tau_v(t) > deadline
            double tau = exact_tau(lat, real, p, A, t, X);
            bool exited = false;
            upd(lat, real, tau, t, A, &container, &exited);
            if (exited) return false;
        }
    }
    return true;
}

}  // namespace iperc
