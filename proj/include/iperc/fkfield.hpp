#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/glauber.hpp"
#include "iperc/rng.hpp"
#include "iperc/stats.hpp"

namespace iperc {

// Random-cluster representation with external field:
//   P(omega) prop. (e^{2 beta} - 1)^{|omega|} prod_C (e^{h|C|} + e^{-h|C|}),
// vertices colored cluster-wise with P(+|C) = e^{h|C|} / (e^{h|C|}+e^{-h|C|}).
// Parallel edges are kept (they matter for the spin correspondence on small
// tori and for the wired boundary vertex).
struct FkGraph {
    int n_vertices = 0;                       // incl. the boundary vertex if present
    std::vector<std::pair<int, int>> edges;   // parallel edges allowed
    int boundary = -1;                        // wired boundary vertex, or -1

    int n_edges() const { return static_cast<int>(edges.size()); }
};

FkGraph graph_edges(int n, const std::vector<std::pair<int, int>>& edges);
// Box [-N,N]^d plus one boundary vertex; one edge per (inside, outside) pair.
FkGraph box_with_boundary(const BoxGeom& box);
// {"n": int, "edges": [[i,j]...], "boundary": int (optional)}
FkGraph fk_graph_from_json(const std::string& text);

struct FkClusters {
    std::vector<int> comp;   // component id per vertex
    std::vector<int> size;   // per component
    int n_comp = 0;
};
FkClusters fk_clusters(const FkGraph& g, uint64_t omega);

double fk_log_weight(const FkGraph& g, const ModelParams& p, uint64_t omega);

// Exact joint enumeration over (omega, coloring); <= 20 edges, <= 16 vertices.
// condition = -1/+1 conditions the boundary cluster color.
struct FkEnumeration {
    double log_z = 0;
    std::vector<double> omega_prob;  // size 2^m
    std::vector<double> spin_prob;   // size 2^n, bit set = spin +1
};
FkEnumeration enumerate_fk(const FkGraph& g, const ModelParams& p, int condition = 0);

// P(edge open | rest of the configuration), from an unconditioned enumeration.
double conditional_edge_open_prob(const FkEnumeration& e, int edge, uint64_t rest);

// Finite-energy bounds for that conditional probability.
inline std::pair<double, double> finite_energy_bounds(double beta) {
    double r = std::exp(2.0 * beta) - 1.0;
    return {r / (r + 2.0), r / (r + 1.0)};
}

// Sampling: spins by coupling-from-the-past on the graph (field h everywhere,
// incl. the boundary vertex), then conditionally independent edges.
Lattice padded_lattice(const FkGraph& g);
uint64_t edwards_sokal(const FkGraph& g, const ModelParams& p, const std::vector<int8_t>& sigma,
                       Rng& rng);

struct FkSample {
    bool coupled = false;
    std::vector<int8_t> sigma;
    uint64_t omega = 0;
};
FkSample sample_fk(const FkGraph& g, const ModelParams& p, double t_max, uint64_t seed);

// P(target connected to the boundary vertex) under the minus-conditioned
// measure, by two routes: rejection on sigma_boundary = -1, and reweighting of
// unconditioned samples by P(minus | C_boundary).
struct CrossingEstimate {
    double rejection = 0, rejection_se = 0;
    long accepted = 0;
    double reweight = 0, reweight_se = 0;
    long used = 0, censored = 0;
    bool agree = false;  // within 3 combined s.e.
};
CrossingEstimate crossing_prob(const FkGraph& g, const ModelParams& p, int target, long replicas,
                               uint64_t seed, double t_max, int workers = 1);

// Decomposition of the conditioned magnetization: m = bulk - link with
// link = P(v <-> boundary) and bulk = E[ tanh(h |C_v|) ; v not linked ].
struct MagnetSplit {
    double m_minus = 0;
    double link = 0;
    double bulk = 0;
    double residual = 0;
};
MagnetSplit magnet_fk_split(const FkGraph& g, const ModelParams& p, int vertex);

// Boundary-condition gaps of the one-dimensional magnetization at the origin
// over a range of box sizes, with exponential fits in N.
struct RelaxGapReport {
    std::vector<int> N;
    std::vector<double> m_plus, m_free, m_minus;
    bool ordered = false;  // plus >= free >= minus at every N
    ExpFit fit_pm, fit_pf, fit_fm;
};
RelaxGapReport relax_gap_1d(const ModelParams& p, int n_max);

}  // namespace iperc
