#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace iperc {

// Time-step constant of the space-time coarse graining: eps = e^{-2}/(2d).
inline double epsilon0(int d) { return std::exp(-2.0 - std::log(2.0 * d)); }

// Dense site set over a geometry's contiguous index space.
using SiteMask = std::vector<char>;

inline std::vector<int> mask_to_list(const SiteMask& m) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(m.size()); ++i)
        if (m[i]) out.push_back(i);
    return out;
}

inline SiteMask list_to_mask(int n, const std::vector<int>& l) {
    SiteMask m(n, 0);
    for (int i : l) m[i] = 1;
    return m;
}

// Flat adjacency usable by the dynamics. Missing neighbours (boundary of a
// box) are encoded as -1; `bc` is the spin value seen there (-1, 0, +1).
struct Lattice {
    int n_sites = 0;
    int deg = 0;
    std::vector<int32_t> nbr;       // n_sites * deg, -1 = outside
    std::vector<uint8_t> missing;   // # of -1 entries per site
    int bc = 0;

    int neighbour_sum(const std::vector<int8_t>& s, int v) const {
        int a = 0;
        const int32_t* p = nbr.data() + static_cast<size_t>(v) * deg;
        for (int k = 0; k < deg; ++k)
            if (p[k] >= 0) a += s[p[k]];
        return a + bc * missing[v];
    }
};

// Torus of side 2N in dimension d, sites indexed in row-major order over
// coordinates in (-N, N].
class TorusGeom {
public:
    static TorusGeom make(int d, int N);

    int d() const { return d_; }
    int half_side() const { return N_; }
    int side() const { return side_; }
    int n_sites() const { return n_sites_; }

    int index(const std::vector<int>& coords) const;
    std::vector<int> coords(int site) const;
    int neighbour(int site, int k) const { return nbr_[static_cast<size_t>(site) * 2 * d_ + k]; }
    int degree() const { return 2 * d_; }

    // Translate a site by an integer vector (periodically).
    int translate(int site, const std::vector<int>& v) const;

    // l-infinity distance on the torus.
    int linf_dist(int a, int b) const;

    Lattice lattice() const;

private:
    int d_ = 0, N_ = 0, side_ = 0, n_sites_ = 0;
    std::vector<int32_t> nbr_;
};

// Box [-N, N]^d with explicit boundary views.
class BoxGeom {
public:
    static BoxGeom make(int d, int N);

    int d() const { return d_; }
    int half_side() const { return N_; }
    int side() const { return side_; }
    int n_sites() const { return n_sites_; }

    int index(const std::vector<int>& coords) const;
    std::vector<int> coords(int site) const;

    std::vector<int> interior_boundary() const;   // sites of the box with a neighbour outside
    int exterior_boundary_size() const;           // # of outside sites adjacent to the box
    int edge_boundary_size() const;               // # of box/outside edges

    Lattice lattice(int bc) const;                // bc in {-1, 0, +1}

private:
    int d_ = 0, N_ = 0, side_ = 0, n_sites_ = 0;
    std::vector<int32_t> nbr_;                    // -1 where the neighbour leaves the box
};

// Paving of a torus by blocks B_L(v), v in the sub-lattice ((2L+1)Z)^d.
class CoarseLattice {
public:
    static CoarseLattice make(const TorusGeom& geom, int L);

    const TorusGeom& geom() const { return geom_; }
    int L() const { return L_; }
    int block_side() const { return 2 * L_ + 1; }
    int K() const { return K_; }                  // blocks per axis
    int n_blocks() const { return n_blocks_; }

    int block_of(int site) const { return block_of_[site]; }
    std::vector<int> block_sites(int block) const;
    int center_site(int block) const { return center_site_[block]; }

    // [Delta]_L: blocks intersecting Delta.
    std::vector<int> coarsen(const std::vector<int>& sites) const;
    // A coarse set seen as a set of torus sites.
    std::vector<int> fine_sites(const std::vector<int>& blocks) const;

    // Blocks at l-infinity coarse distance <= 1 (incl. diagonal), i.e. the
    // adjacency of the coarse graph with *-connectivity.
    std::vector<int> star_neighbours(int block) const;
    // Axis-adjacent blocks only (coarse centers at distance 2L+1 in one axis).
    std::vector<int> axis_neighbours(int block) const;

    int coarse_index(const std::vector<int>& coarse_coords) const;
    std::vector<int> coarse_coords(int block) const;

private:
    TorusGeom geom_;
    int L_ = 0, K_ = 0, n_blocks_ = 0;
    std::vector<int32_t> block_of_;
    std::vector<int32_t> center_site_;
};

// The half-lattice Gamma = L_L x {k eps L} with *-connectivity, truncated to
// `layers` time layers (k = 0 .. layers-1).
class SpaceTimeGraph {
public:
    // eps <= 0 selects the pinned constant epsilon0(d). Overriding eps keeps
    // every structural statement intact (it only enters probability bounds)
    // and makes good boxes observable at desk scale.
    static SpaceTimeGraph make(const CoarseLattice& coarse, int layers, double eps = -1);

    const CoarseLattice& coarse() const { return coarse_; }
    int layers() const { return layers_; }
    double eps() const { return eps_; }
    double time_step() const { return dt_; }      // eps * L
    int n_vertices() const { return layers_ * coarse_.n_blocks(); }

    int vertex(int block, int layer) const { return layer * coarse_.n_blocks() + block; }
    int block(int v) const { return v % coarse_.n_blocks(); }
    int layer(int v) const { return v / coarse_.n_blocks(); }
    double lag(int v) const { return layer(v) * dt_; }

    const std::vector<int>& neighbours(int v) const { return adj_[v]; }
    int max_degree() const;

private:
    CoarseLattice coarse_;
    int layers_ = 0;
    double eps_ = 0;
    double dt_ = 0;
    std::vector<std::vector<int>> adj_;
};

}  // namespace iperc
