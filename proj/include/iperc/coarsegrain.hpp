#pragma once

#include <cstdint>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/glauber.hpp"
#include "iperc/infoperc.hpp"
#include "iperc/stats.hpp"
#include "iperc/updates.hpp"

namespace iperc {

// Site percolation on the space-time graph: open = bad box.
struct PercolationConfig {
    SpaceTimeGraph graph;
    std::vector<char> open;
};

// Realization window needed to classify every layer of the graph.
double paint_window(const SpaceTimeGraph& graph);

// Classify each Gamma vertex by the block event at its (block, lag).
PercolationConfig paint_boxes(const SpaceTimeGraph& graph, const Lattice& lat,
                              const UpdateRealization& real, const ModelParams& p);
PercolationConfig paint_boxes(const SpaceTimeGraph& graph, const ModelParams& p, uint64_t seed);

// Open cluster of a seed set plus its closed boundary and spatial projections.
struct ClusterSet {
    std::vector<int> seeds;      // V, as Gamma vertices
    std::vector<int> cluster;    // C_V (open-connected to an open seed)
    std::vector<int> boundary;   // closed vertices adjacent to C_V; {z} when C_z empty
    std::vector<int> proj;       // Proj(C_V union boundary), as coarse blocks
    std::vector<int> proj_star;  // Proj of the distance-<=1 neighbourhood of the same set
    bool truncated = false;      // cluster touches the top layer
};
ClusterSet clusters(const PercolationConfig& pc, const std::vector<int>& V);

// Survival-probability table P(size >= M) with an exponential fit in M.
struct TailEstimate {
    std::vector<double> m;
    std::vector<double> p_hat;
    std::vector<double> se;
    long n = 0;
    ExpFit fit;
};
TailEstimate tail_from_sizes(const std::vector<long>& sizes, long m_min, long m_max);

// Per-replica check of the containment of KUPD(V-bar) by the projected
// bad-box cluster neighbourhood, plus the projection cardinality bound and
// the tail of |[KUPD(V-bar)]_L|.
struct ContainmentReport {
    long replicas = 0;
    long coupled = 0;
    long censored = 0;   // replicas that failed to couple within t_max
    long truncated = 0;  // cluster touched the top layer (excluded from the fit)
    long coarse_violations = 0;     // [K]_L not within Proj(dist<=1 nbhd of C_V u dC_V)
    long fine_violations = 0;       // K not within union of B_{3L/2} over Proj(C_V u dC_V)
    long proj_bound_violations = 0; // |Proj(dist<=1 nbhd)| > 5^d (|C_V| + |V|)
    long subset_violations = 0;     // V-bar not within K (must never happen)
    TailEstimate tail;
};
ContainmentReport kupd_coarse_containment(const CoarseLattice& coarse, const ModelParams& p,
                                          const std::vector<int>& V_blocks, long replicas,
                                          uint64_t seed, double t_max, double eps = -1,
                                          int workers = 1);

// Exact number of connected vertex sets of size K containing `root`.
long count_lattice_animals(const std::vector<std::vector<int>>& adj, int root, int K);

// P_p(|C_V| >= M) for Bernoulli site percolation on the graph; exact by
// enumeration when the window has at most 20 vertices.
struct BernoulliTail {
    double estimate = 0;
    double se = 0;
    bool has_exact = false;
    double exact = 0;
};
BernoulliTail bernoulli_cluster_tail(const SpaceTimeGraph& graph, double prob,
                                     const std::vector<int>& V, long M, long replicas,
                                     uint64_t seed, int workers = 1);

// Empirical domination parameter: max conditional bad-probability of a centre
// vertex given the states at Gamma-distance > 1, compared against a
// Bernoulli cluster tail at that parameter.
struct DominationReport {
    double p_hat = 0;          // max conditional bad-probability over observed classes
    double unconditional = 0;  // overall bad fraction at the centre vertex
    long classes_used = 0;
    long classes_insufficient = 0;
    std::vector<double> m_grid;
    std::vector<double> painted_tail, painted_se;
    std::vector<double> bern_tail, bern_se;
    bool tail_ok = true;  // painted <= Bernoulli + 3 combined s.e. at every M
};
DominationReport domination_check(const SpaceTimeGraph& graph, const ModelParams& p, long replicas,
                                  uint64_t seed, long min_class_count = 20, int workers = 1);

}  // namespace iperc
