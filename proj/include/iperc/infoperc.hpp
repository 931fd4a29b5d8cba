#pragma once

#include <cstdint>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/glauber.hpp"
#include "iperc/stats.hpp"
#include "iperc/updates.hpp"

namespace iperc {

// True iff the extremal chains started at -t agree on A at -t', i.e.
// SUP(t, t', A) is empty.
bool sup_empty(const Lattice& lat, const UpdateRealization& real, const ModelParams& p, double t,
               double t_prime, const std::vector<int>& A);

// Sites reached from A through backward update paths in [-t, -t'] (A itself
// included by the empty-path convention). If `allowed` is given, traversal
// stops as soon as a site outside it is reached and `exited` is set.
std::vector<int> upd(const Lattice& lat, const UpdateRealization& real, double t, double t_prime,
                     const std::vector<int>& A, const SiteMask* allowed = nullptr,
                     bool* exited = nullptr);

struct CouplingResult {
    bool coupled = false;
    double tau = 0;               // exact coupling time (an event time, or t' if A empty)
    double certified_window = 0;  // doubling window at which emptiness was certified
    double t_prime = 0;
    std::vector<int> target;      // A
    std::vector<int8_t> sample;   // sigma_{-t'} restricted to A (aligned with target)
    UpdateRealization real;       // realization covering the certified window
};

// Window doubling (t'+1, t'+2, t'+4, ...) with reused randomness; tau is
// resolved exactly by binary search over the event times in the certified
// window (emptiness is monotone in the window and changes only at event
// times). Exceeding t_max is an outcome, not an error.
CouplingResult coupling_time(const Lattice& lat, const ModelParams& p, const std::vector<int>& A,
                             double t_prime, double t_max, uint64_t seed);

// Exact tau for a sub-target on an already-certified realization (requires
// sup_empty(W, t_prime, A) on it).
double exact_tau(const Lattice& lat, const UpdateRealization& real, const ModelParams& p,
                 const std::vector<int>& A, double t_prime, double W);

// KUPD(A, t') = UPD(tau_A(t'), t', A), evaluated on a coupled realization.
struct KupdResult {
    CouplingResult coupling;
    std::vector<int> set;
};
KupdResult kupd(const Lattice& lat, const ModelParams& p, const std::vector<int>& A,
                double t_prime, double t_max, uint64_t seed);

// Same, on an already-coupled result.
std::vector<int> kupd_from_coupling(const Lattice& lat, const CouplingResult& c);

struct DecayFit {
    std::vector<double> t_prime;
    std::vector<long> n_replicas;
    std::vector<long> n_nonempty;
    std::vector<double> p_hat;
    std::vector<double> se;
    ExpFit fit;
};

// Monte Carlo estimate of P(SUP(t + t', t, v) != empty) over a grid of lags
// t', with a weighted exponential fit in t'.
DecayFit estimate_sup_decay(const Lattice& lat, const ModelParams& p, double t,
                            const std::vector<double>& t_prime_grid, long replicas, uint64_t seed,
                            int workers = 1);

// The event A_l(w, t'): for every v in B_l(w) and every t in [t', t' + eps l],
// KUPD(v, t) stays in B_{3l/2}(w) and tau_v(t) <= t' + (3/2) eps l. Checked at
// event times plus interval endpoints, which is exact. `eps` defaults to the
// pinned constant epsilon0(d).
bool check_block_event(const TorusGeom& g, const Lattice& lat, const UpdateRealization& real,
                       const ModelParams& p, int w_center_site, double t_prime, int l,
                       double eps = -1);

}  // namespace iperc
