#include "iperc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace iperc {

namespace {

constexpr int kEnumCap = 25;

struct Accum {
    double max_e = -1e300;
    double z = 0;       // sum of e^{E - max_e}
    double num = 0;     // sum of obs * e^{E - max_e}

    void add(double e, double obs) {
        if (e > max_e) {
            double f = std::exp(max_e - e);
            z *= f;
            num *= f;
            max_e = e;
        }
        double w = std::exp(e - max_e);
        z += w;
        num += obs * w;
    }

    void merge(const Accum& o) {
        if (o.z == 0) return;
        if (o.max_e > max_e) {
            double f = std::exp(max_e - o.max_e);
            z = z * f + o.z;
            num = num * f + o.num;
            max_e = o.max_e;
        } else {
            double f = std::exp(o.max_e - max_e);
            z += o.z * f;
            num += o.num * f;
        }
    }
};

// Gray-code sweep over all configurations with the first `prefix_bits` spins
// fixed by `prefix`. Calls visit(sigma, energy) for each configuration.
template <class Visit>
void gray_sweep(const IsingInstance& inst, int prefix_bits, uint32_t prefix, Visit&& visit) {
    const int n = inst.n();
    std::vector<int8_t> s(n, -1);
    for (int i = 0; i < prefix_bits; ++i)
        if (prefix >> i & 1u) s[i] = 1;
    std::vector<std::vector<int>> adj(n);
    for (auto [a, b] : inst.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    double e = 0;
    for (auto [a, b] : inst.edges) e += inst.beta * s[a] * s[b];
    for (int i = 0; i < n; ++i) e += inst.field[i] * s[i];
    visit(s, e);
    const int free_bits = n - prefix_bits;
    const uint64_t steps = free_bits > 0 ? (uint64_t{1} << free_bits) : 1;
    for (uint64_t k = 1; k < steps; ++k) {
        int bit = __builtin_ctzll(k);
        int site = prefix_bits + bit;
        int nb = 0;
        for (int j : adj[site]) nb += s[j];
        e -= 2.0 * s[site] * (inst.beta * nb + inst.field[site]);
        s[site] = static_cast<int8_t>(-s[site]);
        visit(s, e);
    }
}

Accum enumerate(const IsingInstance& inst,
                const std::function<double(const std::vector<int8_t>&)>& obs, int workers) {
    if (inst.n() > kEnumCap) throw std::invalid_argument("instance too large for enumeration");
    const int n = inst.n();
    auto eval = [&](const std::vector<int8_t>& s) { return obs ? obs(s) : 0.0; };
    if (n < 12) {
        Accum a;
        gray_sweep(inst, 0, 0, [&](const std::vector<int8_t>& s, double e) { a.add(e, eval(s)); });
        return a;
    }
    // the block decomposition and merge order are fixed by n alone so the
    // result is bit-identical for every worker count
    const int prefix_bits = std::min(8, n - 4);
    const uint32_t blocks = 1u << prefix_bits;
    std::vector<Accum> partial(blocks);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(workers, 1))
    for (int b = 0; b < static_cast<int>(blocks); ++b) {
        Accum a;
        gray_sweep(inst, prefix_bits, static_cast<uint32_t>(b),
                   [&](const std::vector<int8_t>& s, double e) { a.add(e, eval(s)); });
        partial[b] = a;
    }
    Accum total;
    for (const Accum& a : partial) total.merge(a);
    return total;
}

}  // namespace

IsingInstance torus_instance(const TorusGeom& g, const ModelParams& p) {
    if (g.side() < 4)
        throw std::invalid_argument("torus side 2N must be >= 4 (side 2 doubles edges)");
    IsingInstance inst;
    inst.beta = p.beta;
    inst.field.assign(g.n_sites(), p.h);
    for (int s = 0; s < g.n_sites(); ++s)
        for (int k = 0; k < g.degree(); ++k) {
            int t = g.neighbour(s, k);
            if (s < t) inst.edges.emplace_back(s, t);
        }
    return inst;
}

IsingInstance box_instance(const BoxGeom& g, const ModelParams& p, Boundary bc) {
    IsingInstance inst;
    inst.beta = p.beta;
    inst.field.assign(g.n_sites(), p.h);
    Lattice lat = g.lattice(static_cast<int>(bc));
    for (int s = 0; s < g.n_sites(); ++s) {
        inst.field[s] += p.beta * static_cast<int>(bc) * lat.missing[s];
        for (int k = 0; k < lat.deg; ++k) {
            int t = lat.nbr[static_cast<size_t>(s) * lat.deg + k];
            if (t >= 0 && s < t) inst.edges.emplace_back(s, t);
        }
    }
    return inst;
}

IsingInstance graph_instance(int n, std::vector<std::pair<int, int>> edges, const ModelParams& p) {
    IsingInstance inst;
    inst.beta = p.beta;
    inst.field.assign(n, p.h);
    inst.edges = std::move(edges);
    return inst;
}

double exact_log_partition(const IsingInstance& inst, int workers) {
    Accum a = enumerate(inst, nullptr, workers);
    return a.max_e + std::log(a.z);
}

double exact_expectation(const IsingInstance& inst,
                         const std::function<double(const std::vector<int8_t>&)>& obs,
                         int workers) {
    Accum a = enumerate(inst, obs, workers);
    return a.num / a.z;
}

double spin_product_expectation(const IsingInstance& inst, const std::vector<int>& sites,
                                int workers) {
    return exact_expectation(
        inst,
        [&](const std::vector<int8_t>& s) {
            double v = 1;
            for (int i : sites) v *= s[i];
            return v;
        },
        workers);
}

double bond_sum_expectation(const IsingInstance& inst, int workers) {
    return exact_expectation(
        inst,
        [&](const std::vector<int8_t>& s) {
            double v = 0;
            for (auto [a, b] : inst.edges) v += s[a] * s[b];
            return v;
        },
        workers);
}

std::vector<double> exact_distribution(const IsingInstance& inst) {
    if (inst.n() > 16) throw std::invalid_argument("distribution cap is 16 sites");
    std::vector<double> w(size_t{1} << inst.n());
    double max_e = -1e300;
    gray_sweep(inst, 0, 0, [&](const std::vector<int8_t>& s, double e) {
        uint32_t m = 0;
        for (int i = 0; i < inst.n(); ++i)
            if (s[i] > 0) m |= 1u << i;
        w[m] = e;
        max_e = std::max(max_e, e);
    });
    double z = 0;
    for (double& x : w) {
        x = std::exp(x - max_e);
        z += x;
    }
    for (double& x : w) x /= z;
    return w;
}

double transfer_pressure_1d(const ModelParams& p) {
    double lam = std::exp(p.beta) * std::cosh(p.h) +
                 std::sqrt(std::exp(2 * p.beta) * std::sinh(p.h) * std::sinh(p.h) +
                           std::exp(-2 * p.beta));
    return std::log(lam);
}

double ring_log_partition_1d(int two_n, const ModelParams& p) {
    if (two_n < 3) throw std::invalid_argument("ring needs >= 3 sites");
    // trace of T^{2N} with T[s][s'] = exp(beta s s' + h (s + s')/2)
    const double sp[2] = {1.0, -1.0};
    double t[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            t[a][b] = std::exp(p.beta * sp[a] * sp[b] + 0.5 * p.h * (sp[a] + sp[b]));
    double m[2][2] = {{1, 0}, {0, 1}};
    double log_scale = 0;
    for (int k = 0; k < two_n; ++k) {
        double r[2][2] = {{0, 0}, {0, 0}};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) r[a][b] += m[a][c] * t[c][b];
        double norm = std::max(std::max(r[0][0], r[0][1]), std::max(r[1][0], r[1][1]));
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) m[a][b] = r[a][b] / norm;
        log_scale += std::log(norm);
    }
    return log_scale + std::log(m[0][0] + m[1][1]);
}

double magnetization_1d(int N, const ModelParams& p, Boundary bc) {
    // chain sites -N..N; boundary spins at +-(N+1) fixed for Plus/Minus.
    const double sp[2] = {1.0, -1.0};
    const double eta = static_cast<double>(static_cast<int>(bc));
    double t[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) t[a][b] = std::exp(p.beta * sp[a] * sp[b] + p.h * sp[b]);
    // v[s_{-N}] with left boundary edge and field
    double v[2], vnum[2];
    for (int a = 0; a < 2; ++a) v[a] = std::exp(p.beta * eta * sp[a] + p.h * sp[a]);
    bool inserted = false;
    for (int a = 0; a < 2; ++a) vnum[a] = 0;
    for (int x = -N; x <= N; ++x) {
        if (x == 0) {
            for (int a = 0; a < 2; ++a) vnum[a] = v[a] * sp[a];
            inserted = true;
        }
        if (x == N) break;
        double w[2] = {0, 0}, wn[2] = {0, 0};
        for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) {
                w[b] += v[a] * t[a][b];
                wn[b] += vnum[a] * t[a][b];
            }
        double norm = std::max(w[0], w[1]);
        for (int b = 0; b < 2; ++b) {
            v[b] = w[b] / norm;
            vnum[b] = wn[b] / norm;
        }
    }
    (void)inserted;
    double z = 0, num = 0;
    for (int a = 0; a < 2; ++a) {
        double endw = std::exp(p.beta * eta * sp[a]);
        z += v[a] * endw;
        num += vnum[a] * endw;
    }
    return num / z;
}

OnsagerResult onsager_pressure(double beta) {
    if (beta < 0) throw std::invalid_argument("beta must be >= 0");
    OnsagerResult res;
    double prev = 0;
    for (int n = 128; n <= 8192; n *= 2) {
        // periodic trapezoid rule on [0, 2pi]^2
        double sum = 0;
        const double step = 2.0 * std::numbers::pi / n;
        const double c2 = std::cosh(2 * beta), s2 = std::sinh(2 * beta);
        for (int i = 0; i < n; ++i) {
            double ci = std::cos(i * step);
            for (int j = 0; j < n; ++j) {
                double arg = c2 * c2 - s2 * (ci + std::cos(j * step));
                sum += std::log(std::max(arg, 1e-300));
            }
        }
        double val = std::log(2.0) + sum / (2.0 * n * static_cast<double>(n));
        if (n > 128 && std::abs(val - prev) < 1e-10) {
            res.value = val;
            res.converged = true;
            return res;
        }
        prev = val;
    }
    res.value = prev;
    res.converged = false;
    return res;
}

}  // namespace iperc
