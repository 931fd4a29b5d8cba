#include "iperc/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace iperc {

namespace {

int ipow(int b, int e) {
    int r = 1;
    while (e-- > 0) r *= b;
    return r;
}

int mod(int a, int m) {
    int r = a % m;
    return r < 0 ? r + m : r;
}

}  // namespace

// ---- TorusGeom -------------------------------------------------------------

TorusGeom TorusGeom::make(int d, int N) {
    if (d < 1 || N < 1) throw std::invalid_argument("torus requires d >= 1 and N >= 1");
    TorusGeom g;
    g.d_ = d;
    g.N_ = N;
    g.side_ = 2 * N;
    g.n_sites_ = ipow(g.side_, d);
    g.nbr_.assign(static_cast<size_t>(g.n_sites_) * 2 * d, -1);
    std::vector<int> c(d);
    for (int s = 0; s < g.n_sites_; ++s) {
        int rem = s;
        for (int k = d - 1; k >= 0; --k) {
            c[k] = rem % g.side_;
            rem /= g.side_;
        }
        for (int k = 0; k < d; ++k) {
            for (int dir = 0; dir < 2; ++dir) {
                std::vector<int> cc = c;
                cc[k] = mod(cc[k] + (dir ? 1 : -1), g.side_);
                int t = 0;
                for (int j = 0; j < d; ++j) t = t * g.side_ + cc[j];
                g.nbr_[static_cast<size_t>(s) * 2 * d + 2 * k + dir] = t;
            }
        }
    }
    return g;
}

int TorusGeom::index(const std::vector<int>& coords) const {
    int s = 0;
    for (int k = 0; k < d_; ++k) s = s * side_ + mod(coords[k] + N_ - 1, side_);
    return s;
}

std::vector<int> TorusGeom::coords(int site) const {
    std::vector<int> c(d_);
    for (int k = d_ - 1; k >= 0; --k) {
        c[k] = site % side_ - (N_ - 1);  // coordinates in (-N, N]
        site /= side_;
    }
    return c;
}

int TorusGeom::translate(int site, const std::vector<int>& v) const {
    std::vector<int> c = coords(site);
    for (int k = 0; k < d_; ++k) c[k] += v[k];
    return index(c);
}

int TorusGeom::linf_dist(int a, int b) const {
    std::vector<int> ca = coords(a), cb = coords(b);
    int m = 0;
    for (int k = 0; k < d_; ++k) {
        int diff = std::abs(ca[k] - cb[k]);
        diff = std::min(diff, side_ - diff);
        m = std::max(m, diff);
    }
    return m;
}

Lattice TorusGeom::lattice() const {
    Lattice l;
    l.n_sites = n_sites_;
    l.deg = 2 * d_;
    l.nbr = nbr_;
    l.missing.assign(n_sites_, 0);
    l.bc = 0;
    return l;
}

// ---- BoxGeom ---------------------------------------------------------------

BoxGeom BoxGeom::make(int d, int N) {
    if (d < 1 || N < 0) throw std::invalid_argument("box requires d >= 1 and N >= 0");
    BoxGeom g;
    g.d_ = d;
    g.N_ = N;
    g.side_ = 2 * N + 1;
    g.n_sites_ = ipow(g.side_, d);
    g.nbr_.assign(static_cast<size_t>(g.n_sites_) * 2 * d, -1);
    std::vector<int> c(d);
    for (int s = 0; s < g.n_sites_; ++s) {
        int rem = s;
        for (int k = d - 1; k >= 0; --k) {
            c[k] = rem % g.side_;
            rem /= g.side_;
        }
        for (int k = 0; k < d; ++k) {
            for (int dir = 0; dir < 2; ++dir) {
                int ck = c[k] + (dir ? 1 : -1);
                if (ck < 0 || ck >= g.side_) continue;
                std::vector<int> cc = c;
                cc[k] = ck;
                int t = 0;
                for (int j = 0; j < d; ++j) t = t * g.side_ + cc[j];
                g.nbr_[static_cast<size_t>(s) * 2 * d + 2 * k + dir] = t;
            }
        }
    }
    return g;
}

int BoxGeom::index(const std::vector<int>& coords) const {
    int s = 0;
    for (int k = 0; k < d_; ++k) {
        if (coords[k] < -N_ || coords[k] > N_) throw std::out_of_range("coordinate outside box");
        s = s * side_ + (coords[k] + N_);
    }
    return s;
}

std::vector<int> BoxGeom::coords(int site) const {
    std::vector<int> c(d_);
    for (int k = d_ - 1; k >= 0; --k) {
        c[k] = site % side_ - N_;
        site /= side_;
    }
    return c;
}

std::vector<int> BoxGeom::interior_boundary() const {
    std::vector<int> out;
    for (int s = 0; s < n_sites_; ++s) {
        const int32_t* p = nbr_.data() + static_cast<size_t>(s) * 2 * d_;
        for (int k = 0; k < 2 * d_; ++k) {
            if (p[k] < 0) {
                out.push_back(s);
                break;
            }
        }
    }
    return out;
}

int BoxGeom::edge_boundary_size() const {
    int n = 0;
    for (size_t i = 0; i < nbr_.size(); ++i)
        if (nbr_[i] < 0) ++n;
    return n;
}

int BoxGeom::exterior_boundary_size() const {
    // Outside sites adjacent to the box: face neighbours of boundary sites,
    // counted once. Each outside neighbour touches exactly one box site for a
    // full-dimensional box, so this equals the edge boundary size.
    return edge_boundary_size();
}

Lattice BoxGeom::lattice(int bc) const {
    Lattice l;
    l.n_sites = n_sites_;
    l.deg = 2 * d_;
    l.nbr = nbr_;
    l.missing.assign(n_sites_, 0);
    for (int s = 0; s < n_sites_; ++s) {
        int m = 0;
        for (int k = 0; k < 2 * d_; ++k)
            if (nbr_[static_cast<size_t>(s) * 2 * d_ + k] < 0) ++m;
        l.missing[s] = static_cast<uint8_t>(m);
    }
    l.bc = bc;
    return l;
}

// ---- CoarseLattice ---------------------------------------------------------

CoarseLattice CoarseLattice::make(const TorusGeom& geom, int L) {
    if (L < 0) throw std::invalid_argument("block half-side must be >= 0");
    int b = 2 * L + 1;
    if (geom.side() % b != 0)
        throw std::invalid_argument("torus side 2N must be divisible by 2L+1");
    CoarseLattice cl;
    cl.geom_ = geom;
    cl.L_ = L;
    cl.K_ = geom.side() / b;
    cl.n_blocks_ = 1;
    for (int k = 0; k < geom.d(); ++k) cl.n_blocks_ *= cl.K_;
    cl.block_of_.assign(geom.n_sites(), -1);
    cl.center_site_.assign(cl.n_blocks_, -1);
    for (int s = 0; s < geom.n_sites(); ++s) {
        std::vector<int> c = geom.coords(s);
        int blk = 0;
        for (int k = 0; k < geom.d(); ++k) {
            // block coordinate: center at multiples of 2L+1 on the embedded
            // axis (-N, N]; shift so every site maps into [0, K).
            int q = ((c[k] + L + geom.side()) / b) % cl.K_;
            blk = blk * cl.K_ + q;
        }
        cl.block_of_[s] = blk;
    }
    for (int blk = 0; blk < cl.n_blocks_; ++blk) {
        std::vector<int> cc(geom.d());
        int rem = blk;
        for (int k = geom.d() - 1; k >= 0; --k) {
            cc[k] = rem % cl.K_;
            rem /= cl.K_;
        }
        std::vector<int> center(geom.d());
        for (int k = 0; k < geom.d(); ++k) {
            int x = cc[k] * b;  // multiple of 2L+1, wrapped into (-N, N]
            while (x > geom.half_side()) x -= geom.side();
            center[k] = x;
        }
        cl.center_site_[blk] = geom.index(center);
    }
    return cl;
}

std::vector<int> CoarseLattice::block_sites(int block) const {
    std::vector<int> out;
    out.reserve(ipow(block_side(), geom_.d()));
    for (int s = 0; s < geom_.n_sites(); ++s)
        if (block_of_[s] == block) out.push_back(s);
    return out;
}

std::vector<int> CoarseLattice::coarsen(const std::vector<int>& sites) const {
    std::vector<char> seen(n_blocks_, 0);
    for (int s : sites) seen[block_of_[s]] = 1;
    return mask_to_list(seen);
}

std::vector<int> CoarseLattice::fine_sites(const std::vector<int>& blocks) const {
    std::vector<char> sel(n_blocks_, 0);
    for (int b : blocks) sel[b] = 1;
    std::vector<int> out;
    for (int s = 0; s < geom_.n_sites(); ++s)
        if (sel[block_of_[s]]) out.push_back(s);
    return out;
}

int CoarseLattice::coarse_index(const std::vector<int>& cc) const {
    int blk = 0;
    for (int k = 0; k < geom_.d(); ++k) blk = blk * K_ + mod(cc[k], K_);
    return blk;
}

std::vector<int> CoarseLattice::coarse_coords(int block) const {
    std::vector<int> cc(geom_.d());
    for (int k = geom_.d() - 1; k >= 0; --k) {
        cc[k] = block % K_;
        block /= K_;
    }
    return cc;
}

std::vector<int> CoarseLattice::star_neighbours(int block) const {
    std::vector<int> cc = coarse_coords(block);
    std::vector<int> out;
    std::vector<int> off(geom_.d(), -1);
    while (true) {
        bool zero = std::all_of(off.begin(), off.end(), [](int o) { return o == 0; });
        if (!zero) {
            std::vector<int> c2(geom_.d());
            for (int k = 0; k < geom_.d(); ++k) c2[k] = cc[k] + off[k];
            int b = coarse_index(c2);
            if (b != block && std::find(out.begin(), out.end(), b) == out.end())
                out.push_back(b);
        }
        int k = geom_.d() - 1;
        while (k >= 0 && off[k] == 1) off[k--] = -1;
        if (k < 0) break;
        ++off[k];
    }
    return out;
}

std::vector<int> CoarseLattice::axis_neighbours(int block) const {
    std::vector<int> cc = coarse_coords(block);
    std::vector<int> out;
    for (int k = 0; k < geom_.d(); ++k) {
        for (int dir : {-1, 1}) {
            std::vector<int> c2 = cc;
            c2[k] += dir;
            int b = coarse_index(c2);
            if (b != block && std::find(out.begin(), out.end(), b) == out.end())
                out.push_back(b);
        }
    }
    return out;
}

// ---- SpaceTimeGraph --------------------------------------------------------

SpaceTimeGraph SpaceTimeGraph::make(const CoarseLattice& coarse, int layers, double eps) {
    if (layers < 1) throw std::invalid_argument("space-time graph requires >= 1 layer");
    if (coarse.L() < 1) throw std::invalid_argument("space-time graph requires L >= 1");
    SpaceTimeGraph g;
    g.coarse_ = coarse;
    g.layers_ = layers;
    g.eps_ = eps > 0 ? eps : epsilon0(coarse.geom().d());
    g.dt_ = g.eps_ * coarse.L();
    g.adj_.assign(static_cast<size_t>(layers) * coarse.n_blocks(), {});
    const int nb = coarse.n_blocks();
    for (int t = 0; t < layers; ++t) {
        for (int b = 0; b < nb; ++b) {
            int v = g.vertex(b, t);
            // same-layer spatial edges
            for (int b2 : coarse.star_neighbours(b)) g.adj_[v].push_back(g.vertex(b2, t));
            // diagonal and vertical edges to adjacent layers
            for (int dt : {-1, 1}) {
                int t2 = t + dt;
                if (t2 < 0 || t2 >= layers) continue;
                g.adj_[v].push_back(g.vertex(b, t2));
                for (int b2 : coarse.star_neighbours(b)) g.adj_[v].push_back(g.vertex(b2, t2));
            }
            std::sort(g.adj_[v].begin(), g.adj_[v].end());
            g.adj_[v].erase(std::unique(g.adj_[v].begin(), g.adj_[v].end()), g.adj_[v].end());
        }
    }
    return g;
}

int SpaceTimeGraph::max_degree() const {
    int m = 0;
    for (const auto& a : adj_) m = std::max(m, static_cast<int>(a.size()));
    return m;
}

}  // namespace iperc
