#include "iperc/fkfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "iperc/infoperc.hpp"
#include "iperc/oracle.hpp"
#include "iperc/parallel.hpp"

namespace iperc {

FkGraph graph_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    FkGraph g;
    g.n_vertices = n;
    g.edges = edges;
    for (auto [a, b] : edges)
        if (a < 0 || b < 0 || a >= n || b >= n || a == b)
            throw std::runtime_error("fk graph: bad edge");
    return g;
}

FkGraph box_with_boundary(const BoxGeom& box) {
    Lattice lat = box.lattice(0);
    FkGraph g;
    g.n_vertices = box.n_sites() + 1;
    g.boundary = box.n_sites();
    for (int i = 0; i < lat.n_sites; ++i)
        for (int k = 0; k < lat.deg; ++k) {
            int j = lat.nbr[static_cast<size_t>(i) * lat.deg + k];
            if (j < 0)
                g.edges.push_back({i, g.boundary});  // one edge per missing neighbour
            else if (j > i)
                g.edges.push_back({i, j});
        }
    return g;
}

FkGraph fk_graph_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FkGraph g;
    g.n_vertices = j.at("n").get<int>();
    for (const auto& je : j.at("edges"))
        g.edges.push_back({je.at(0).get<int>(), je.at(1).get<int>()});
    if (j.contains("boundary")) g.boundary = j.at("boundary").get<int>();
    for (auto [a, b] : g.edges)
        if (a < 0 || b < 0 || a >= g.n_vertices || b >= g.n_vertices || a == b)
            throw std::runtime_error("fk graph: bad edge");
    return g;
}

namespace {

struct Dsu {
    std::vector<int> par;
    explicit Dsu(int n) : par(n) { std::iota(par.begin(), par.end(), 0); }
    int find(int a) {
        while (par[a] != a) a = par[a] = par[par[a]];
        return a;
    }
    void unite(int a, int b) { par[find(a)] = find(b); }
};

}  // namespace

FkClusters fk_clusters(const FkGraph& g, uint64_t omega) {
    Dsu dsu(g.n_vertices);
    for (int e = 0; e < g.n_edges(); ++e)
        if (omega >> e & 1) dsu.unite(g.edges[e].first, g.edges[e].second);
    FkClusters c;
    c.comp.assign(g.n_vertices, -1);
    for (int v = 0; v < g.n_vertices; ++v) {
        int r = dsu.find(v);
        if (c.comp[r] < 0) {
            c.comp[r] = c.n_comp++;
            c.size.push_back(0);
        }
        c.comp[v] = c.comp[r];
        ++c.size[c.comp[v]];
    }
    return c;
}

double fk_log_weight(const FkGraph& g, const ModelParams& p, uint64_t omega) {
    FkClusters c = fk_clusters(g, omega);
    double lw = __builtin_popcountll(omega) * std::log(std::exp(2.0 * p.beta) - 1.0);
    for (int k = 0; k < c.n_comp; ++k) {
        double hk = p.h * c.size[k];
        // log(e^hk + e^-hk), stably
        lw += std::abs(hk) + std::log1p(std::exp(-2.0 * std::abs(hk)));
    }
    return lw;
}

FkEnumeration enumerate_fk(const FkGraph& g, const ModelParams& p, int condition) {
    const int m = g.n_edges(), n = g.n_vertices;
    if (m > 20 || n > 16) throw std::runtime_error("enumerate_fk: graph too large");
    if (condition != 0 && g.boundary < 0)
        throw std::runtime_error("enumerate_fk: no boundary vertex to condition on");
    FkEnumeration out;
    out.omega_prob.assign(size_t{1} << m, 0.0);
    out.spin_prob.assign(size_t{1} << n, 0.0);
    const double r = std::exp(2.0 * p.beta) - 1.0;
    double z = 0;
    for (uint64_t omega = 0; omega < (uint64_t{1} << m); ++omega) {
        FkClusters c = fk_clusters(g, omega);
        double edge_w = std::pow(r, __builtin_popcountll(omega));
        int bcomp = g.boundary >= 0 ? c.comp[g.boundary] : -1;
        for (uint32_t col = 0; col < (uint32_t{1} << c.n_comp); ++col) {
            if (condition != 0) {
                int s = (col >> bcomp & 1) ? 1 : -1;
                if (s != condition) continue;
            }
            double w = edge_w;
            for (int k = 0; k < c.n_comp; ++k)
                w *= std::exp(p.h * c.size[k] * ((col >> k & 1) ? 1 : -1));
            z += w;
            out.omega_prob[omega] += w;
            uint32_t smask = 0;
            for (int v = 0; v < n; ++v)
                if (col >> c.comp[v] & 1) smask |= uint32_t{1} << v;
            out.spin_prob[smask] += w;
        }
    }
    out.log_z = std::log(z);
    for (auto& q : out.omega_prob) q /= z;
    for (auto& q : out.spin_prob) q /= z;
    return out;
}

double conditional_edge_open_prob(const FkEnumeration& e, int edge, uint64_t rest) {
    uint64_t bit = uint64_t{1} << edge;
    double p1 = e.omega_prob[(rest & ~bit) | bit];
    double p0 = e.omega_prob[rest & ~bit];
    if (p0 + p1 <= 0) throw std::runtime_error("conditional_edge_open_prob: null configuration");
    return p1 / (p0 + p1);
}

Lattice padded_lattice(const FkGraph& g) {
    std::vector<std::vector<int>> adj(g.n_vertices);
    for (auto [a, b] : g.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    Lattice lat;
    lat.n_sites = g.n_vertices;
    lat.deg = 0;
    for (const auto& a : adj) lat.deg = std::max(lat.deg, static_cast<int>(a.size()));
    lat.nbr.assign(static_cast<size_t>(lat.n_sites) * lat.deg, -1);
    lat.missing.assign(lat.n_sites, 0);  // padding slots carry no boundary field
    lat.bc = 0;
    for (int v = 0; v < g.n_vertices; ++v)
        for (size_t k = 0; k < adj[v].size(); ++k)
            lat.nbr[static_cast<size_t>(v) * lat.deg + k] = adj[v][k];
    return lat;
}

uint64_t edwards_sokal(const FkGraph& g, const ModelParams& p, const std::vector<int8_t>& sigma,
                       Rng& rng) {
    const double open_p = -std::expm1(-2.0 * p.beta);
    uint64_t omega = 0;
    for (int e = 0; e < g.n_edges(); ++e) {
        auto [a, b] = g.edges[e];
        if (sigma[a] == sigma[b] && rng.next_double() < open_p) omega |= uint64_t{1} << e;
    }
    return omega;
}

FkSample sample_fk(const FkGraph& g, const ModelParams& p, double t_max, uint64_t seed) {
    if (g.n_edges() > 64) throw std::runtime_error("sample_fk: too many edges");
    Lattice lat = padded_lattice(g);
    std::vector<int> all(lat.n_sites);
    std::iota(all.begin(), all.end(), 0);
    CouplingResult c = coupling_time(lat, p, all, 0.0, t_max, seed);
    FkSample s;
    if (!c.coupled) return s;
    s.coupled = true;
    s.sigma.assign(lat.n_sites, 0);
    for (size_t i = 0; i < c.target.size(); ++i) s.sigma[c.target[i]] = c.sample[i];
    Rng rng(mix_seed(seed, 23));
    s.omega = edwards_sokal(g, p, s.sigma, rng);
    return s;
}

CrossingEstimate crossing_prob(const FkGraph& g, const ModelParams& p, int target, long replicas,
                               uint64_t seed, double t_max, int workers) {
    if (g.boundary < 0) throw std::runtime_error("crossing_prob: needs a boundary vertex");
    std::vector<char> ok(replicas, 0), minus(replicas, 0), conn(replicas, 0);
    std::vector<double> wgt(replicas, 0.0);
    for_each_replica(replicas, workers, [&](long r) {
        FkSample s = sample_fk(g, p, t_max, mix_seed(seed, 31, static_cast<uint64_t>(r)));
        if (!s.coupled) return;
        ok[r] = 1;
        minus[r] = s.sigma[g.boundary] < 0;
        FkClusters c = fk_clusters(g, s.omega);
        conn[r] = c.comp[target] == c.comp[g.boundary];
        // P(boundary cluster colored minus | omega)
        wgt[r] = 1.0 / (std::exp(2.0 * p.h * c.size[c.comp[g.boundary]]) + 1.0);
    });

    CrossingEstimate out;
    long hits = 0;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (long r = 0; r < replicas; ++r) {
        if (!ok[r]) {
            ++out.censored;
            continue;
        }
        ++out.used;
        if (minus[r]) {
            ++out.accepted;
            hits += conn[r];
        }
        double a = wgt[r] * conn[r], b = wgt[r];
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    if (out.accepted > 0) {
        out.rejection = static_cast<double>(hits) / out.accepted;
        out.rejection_se = binomial_se(out.rejection, out.accepted);
    }
    if (out.used > 1 && sb > 0) {
        double n = static_cast<double>(out.used);
        double ma = sa / n, mb = sb / n;
        double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cab = sab / n - ma * mb;
        out.reweight = ma / mb;
        double v = (va - 2.0 * out.reweight * cab + out.reweight * out.reweight * vb) / (mb * mb);
        out.reweight_se = std::sqrt(std::max(0.0, v) / n);
    }
    double comb = std::sqrt(out.rejection_se * out.rejection_se +
                            out.reweight_se * out.reweight_se);
    out.agree = std::abs(out.rejection - out.reweight) <= 3.0 * comb + 1e-12;
    return out;
}

MagnetSplit magnet_fk_split(const FkGraph& g, const ModelParams& p, int vertex) {
    if (g.boundary < 0) throw std::runtime_error("magnet_fk_split: needs a boundary vertex");
    FkEnumeration e = enumerate_fk(g, p, -1);
    MagnetSplit out;
    for (uint64_t omega = 0; omega < e.omega_prob.size(); ++omega) {
        double q = e.omega_prob[omega];
        if (q == 0) continue;
        FkClusters c = fk_clusters(g, omega);
        if (c.comp[vertex] == c.comp[g.boundary])
            out.link += q;
        else
            out.bulk += q * std::tanh(p.h * c.size[c.comp[vertex]]);
    }
    for (uint32_t s = 0; s < e.spin_prob.size(); ++s)
        out.m_minus += e.spin_prob[s] * ((s >> vertex & 1) ? 1.0 : -1.0);
    out.residual = std::abs(out.m_minus - (out.bulk - out.link));
    return out;
}

RelaxGapReport relax_gap_1d(const ModelParams& p, int n_max) {
    RelaxGapReport out;
    std::vector<double> x, g_pm, g_pf, g_fm;
    out.ordered = true;
    for (int N = 1; N <= n_max; ++N) {
        double mp = magnetization_1d(N, p, Boundary::Plus);
        double mf = magnetization_1d(N, p, Boundary::Free);
        double mm = magnetization_1d(N, p, Boundary::Minus);
        out.N.push_back(N);
        out.m_plus.push_back(mp);
        out.m_free.push_back(mf);
        out.m_minus.push_back(mm);
        if (mp < mf - 1e-12 || mf < mm - 1e-12) out.ordered = false;
        x.push_back(N);
        g_pm.push_back(mp - mm);
        g_pf.push_back(mp - mf);
        g_fm.push_back(mf - mm);
    }
    // exact values: unit weights in the log-linear fit
    auto fit = [&](const std::vector<double>& gap) {
        return fit_exponential(x, gap, gap, 1e-14);
    };
    out.fit_pm = fit(g_pm);
    out.fit_pf = fit(g_pf);
    out.fit_fm = fit(g_fm);
    return out;
}

}  // namespace iperc
