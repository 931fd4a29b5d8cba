#pragma once

#include <boost/rational.hpp>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/glauber.hpp"
#include "iperc/infoperc.hpp"
#include "iperc/stats.hpp"

namespace iperc {

using Rational = boost::rational<long long>;
using Complex = std::complex<double>;

// ---- abstract polymer models ----------------------------------------------

struct PolymerModel {
    std::vector<Complex> w;                  // weights
    std::vector<std::vector<double>> delta;  // symmetric compatibility, incl. diagonal
    std::vector<double> g;                   // positive size function
    std::vector<std::vector<int>> sets;      // optional set realization (delta = disjointness)

    int n() const { return static_cast<int>(w.size()); }
};

// Polymers are the intervals of length 1..max_len in {0..n_sites-1}, with
// hard-core overlap interaction and weight lambda^length.
PolymerModel interval_model(int n_sites, int max_len, Complex lambda);

// {"polymers": [[sites...]...], "weights": [[re, im]...], "g": [...] (optional)}
PolymerModel model_from_json(const std::string& text);
std::string model_to_json(const PolymerModel& m);

// Ursell function of an ordered tuple: (1/n!) sum over connected spanning
// edge-subgraphs of K_n of prod (delta - 1). Exact rationals for 0/1 delta.
Rational ursell_exact(const std::vector<std::vector<int>>& delta01);
double ursell(const std::vector<std::vector<double>>& delta);

// Exact partition function by enumeration over all polymer subsets (n <= 22).
Complex polymer_z_exact(const PolymerModel& m);

struct KpReport {
    bool pass = false;
    double min_slack = 0;    // min over gamma' of g(gamma') - criterion sum
    double weight_sum = 0;   // sum e^g |w|
    std::vector<double> slack;
};
KpReport kp_check(const PolymerModel& m);

struct ExpansionResult {
    Complex value = 0;                 // truncated log Z
    std::vector<Complex> per_order;    // contribution of each cluster order
    bool certified = false;            // convergence criterion passed
    double last_order_magnitude = 0;   // heuristic tail proxy
    long tuples = 0;
};
ExpansionResult log_z_truncated(const PolymerModel& m, int n_max);

// Truncated cluster sum with externally supplied weights on the same
// compatibility structure (used for weight differences).
Complex truncated_cluster_sum(const PolymerModel& m, const std::vector<Complex>& weights,
                              int n_max);

// ---- dependency encodings ---------------------------------------------------

// Explicit finite-support joint law of (sigma, X) with sigma in {-1,+1}^Lambda
// and X_v subsets of Lambda given as bitmasks. validate() checks the
// normalization, v in X_v, and the pairwise factorization property over all
// (Delta, Delta') and disjoint (C, C') exhaustively.
struct EncodingAtom {
    std::vector<int8_t> sigma;
    std::vector<uint8_t> x;  // X_v as bitmask over Lambda
    double prob = 0;
};

struct DependencyEncoding {
    int n_sites = 0;  // <= 6
    std::vector<EncodingAtom> support;

    void validate(double tol = 1e-12) const;  // throws on violation
};

// Partition Lambda into blocks; X_v = block(v); sigma independent across
// blocks with an arbitrary law inside each block. The factorization property
// holds by construction; validate() re-checks it anyway.
DependencyEncoding block_encoding(int n_sites, const std::vector<std::vector<int>>& blocks,
                                  uint64_t seed);
// Random partition into blocks of size 2-3 with random block marginals.
DependencyEncoding random_block_encoding(int n_sites, uint64_t seed);

// f-tilde: Omega^support -> R, table indexed by the bits of sigma on the
// (sorted) support, bit = 1 for spin +1.
struct LocalFunction {
    std::vector<int> support;
    std::vector<double> table;

    double eval(const std::vector<int8_t>& sigma) const {
        size_t idx = 0;
        for (size_t i = 0; i < support.size(); ++i)
            if (sigma[support[i]] > 0) idx |= size_t{1} << i;
        return table[idx];
    }
};

struct IdentityCheck {
    double lhs = 0;
    double rhs = 0;
    double residual = 0;
};
// Both sides of the polymer representation of < prod f-tilde >, exactly.
IdentityCheck verify_polymer_identity(const DependencyEncoding& phi,
                                      const std::vector<LocalFunction>& fs);

// ---- block decomposition of the energy and perturbation series -------------

// Splits the bond sum of the torus into intra-block terms f_v and cross-edge
// terms f_{vw} over axis-adjacent coarse blocks.
class BlockEnergy {
public:
    static BlockEnergy make(const CoarseLattice& coarse);

    const CoarseLattice& coarse() const { return coarse_; }
    int n_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    double f_block(int block, const std::vector<int8_t>& sigma) const;
    double f_edge(int edge, const std::vector<int8_t>& sigma) const;
    double total_bond_sum(const std::vector<int8_t>& sigma) const;
    double max_abs() const;  // 2d(2L+1)^d

private:
    CoarseLattice coarse_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<std::pair<int, int>>> intra_, cross_;
};

// One draw of (sigma, X) with X(v) = [KUPD(B_L(v))]_L on a coupled
// realization (the block-spin dependency encoding).
struct PhiSample {
    bool coupled = false;
    std::vector<int8_t> sigma;
    std::vector<uint32_t> x;  // per block, coarse-set bitmask (needs n_blocks <= 32)
};
PhiSample sample_phi(const CoarseLattice& coarse, const ModelParams& p, double t_max,
                     uint64_t seed);

struct WeightEstimate {
    double mean = 0;
    double se = 0;
    long used = 0;
    long censored = 0;
};

// Monte Carlo estimate of the coupling-perturbation weight w(C) for a
// connected coarse set C: sum over non-empty H in E_C u C of
// prod_b (e^{z f_b} - 1) on the event that the X's of H glue into exactly C.
WeightEstimate estimate_weight(const BlockEnergy& be, const ModelParams& p, double z,
                               const std::vector<int>& C_blocks, long replicas, uint64_t seed,
                               double t_max, int workers = 1);

struct PressureSeries {
    double z = 0;
    double first_order = 0;     // mean total bond sum per site (coefficient of z)
    double first_order_se = 0;
    double series = 0;          // truncated (1/|T|) log F_N(z)
    double series_se = 0;       // first-order error propagation through the expansion
    long used = 0;
    long censored = 0;
    ExpansionResult expansion;
    std::vector<std::vector<int>> polymers;
    std::vector<double> weight_mean, weight_se;
};
// Truncated cluster expansion of (1/|T|) log( Z_{beta+z,h} / Z_{beta,h} ),
// with polymers the connected coarse sets of size <= c_max.
PressureSeries pressure_perturbation(const BlockEnergy& be, const ModelParams& p, double z,
                                     int n_max, int c_max, long replicas, uint64_t seed,
                                     double t_max, int workers = 1);

struct CorrelationSeries {
    double z = 0;
    double estimate = 0;       // exp of the truncated difference of cluster sums
    double estimate_se = 0;
    double direct = 0;         // plain CFTP estimate of <sigma_A> at the base field
    double direct_se = 0;
    long used = 0;
    long censored = 0;
};
// <sigma_A> at field h+z via the difference of cluster sums with w^A and w
// (field-perturbation weights, H over blocks only).
CorrelationSeries correlation_perturbation(const BlockEnergy& be, const ModelParams& p, double z,
                                           const std::vector<int>& A_sites, int n_max, int c_max,
                                           long replicas, uint64_t seed, double t_max,
                                           int workers = 1);

}  // namespace iperc
