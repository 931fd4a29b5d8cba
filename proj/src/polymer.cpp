#include "iperc/polymer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

#include "iperc/parallel.hpp"
#include "iperc/rng.hpp"

namespace iperc {

namespace {

bool sets_disjoint(const std::vector<int>& a, const std::vector<int>& b) {
    // both sorted
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return false;
        if (a[i] < b[j])
            ++i;
        else
            ++j;
    }
    return true;
}

void delta_from_sets(PolymerModel& m) {
    const int n = m.n();
    m.delta.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (sets_disjoint(m.sets[i], m.sets[j])) m.delta[i][j] = m.delta[j][i] = 1.0;
}

}  // namespace

PolymerModel interval_model(int n_sites, int max_len, Complex lambda) {
    PolymerModel m;
    for (int len = 1; len <= max_len; ++len)
        for (int a = 0; a + len <= n_sites; ++a) {
            std::vector<int> s(len);
            std::iota(s.begin(), s.end(), a);
            m.sets.push_back(s);
            m.w.push_back(std::pow(lambda, len));
            m.g.push_back(len);
        }
    delta_from_sets(m);
    return m;
}

PolymerModel model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PolymerModel m;
    for (const auto& jp : j.at("polymers")) {
        std::vector<int> s = jp.get<std::vector<int>>();
        std::sort(s.begin(), s.end());
        m.sets.push_back(s);
    }
    for (const auto& jw : j.at("weights")) {
        if (jw.is_array())
            m.w.emplace_back(jw.at(0).get<double>(), jw.at(1).get<double>());
        else
            m.w.emplace_back(jw.get<double>(), 0.0);
    }
    if (m.w.size() != m.sets.size()) throw std::runtime_error("polymer/weight count mismatch");
    if (j.contains("g"))
        m.g = j.at("g").get<std::vector<double>>();
    else
        for (const auto& s : m.sets) m.g.push_back(static_cast<double>(s.size()));
    if (m.g.size() != m.w.size()) throw std::runtime_error("g size mismatch");
    delta_from_sets(m);
    return m;
}

std::string model_to_json(const PolymerModel& m) {
    nlohmann::json j;
    j["polymers"] = m.sets;
    auto& jw = j["weights"];
    for (const auto& w : m.w) jw.push_back({w.real(), w.imag()});
    j["g"] = m.g;
    return j.dump(2);
}

// ---- Ursell functions -------------------------------------------------------

// Connected-sum recursion over subsets containing vertex 0:
//   C(V) = S(V) - sum_{0 in W, W proper subset of V} C(W) S(V \ W),
// with S(V) the full product of delta over pairs inside V. U = C([n]) / n!.
template <typename T, typename Pair>
static T ursell_impl(int n, Pair delta) {
    if (n < 1) throw std::runtime_error("ursell: empty tuple");
    if (n > 14) throw std::runtime_error("ursell: tuple too large");
    const int full = (1 << n) - 1;
    std::vector<T> S(full + 1), C(full + 1, T(0));
    S[0] = T(1);
    for (int V = 1; V <= full; ++V) {
        int v = __builtin_ctz(V);
        T s = S[V & (V - 1)];
        for (int u = v + 1; u < n; ++u)
            if (V >> u & 1) s *= delta(v, u);
        S[V] = s;
    }
    for (int V = 1; V <= full; ++V) {
        if (!(V & 1)) continue;
        T c = S[V];
        // proper submasks of V containing vertex 0
        for (int W = (V - 1) & V; W; W = (W - 1) & V) {
            if (!(W & 1)) continue;
            c -= C[W] * S[V ^ W];
        }
        C[V] = c;
    }
    T fact(1);
    for (int k = 2; k <= n; ++k) fact *= T(k);
    return C[full] / fact;
}

Rational ursell_exact(const std::vector<std::vector<int>>& delta01) {
    int n = static_cast<int>(delta01.size());
    return ursell_impl<Rational>(n, [&](int i, int j) { return Rational(delta01[i][j]); });
}

double ursell(const std::vector<std::vector<double>>& delta) {
    int n = static_cast<int>(delta.size());
    return ursell_impl<double>(n, [&](int i, int j) { return delta[i][j]; });
}

// ---- exact Z and convergence criterion -------------------------------------

Complex polymer_z_exact(const PolymerModel& m) {
    const int n = m.n();
    if (n > 22) throw std::runtime_error("polymer_z_exact: too many polymers");
    Complex z = 0;
    std::vector<int> stack;
    // DFS over admissible subsets in index order, pruning on incompatibility
    std::function<void(int, Complex)> rec = [&](int next, Complex prod) {
        z += prod;
        for (int i = next; i < n; ++i) {
            bool ok = true;
            for (int j : stack)
                if (m.delta[i][j] != 1.0) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            stack.push_back(i);
            rec(i + 1, prod * m.w[i]);
            stack.pop_back();
        }
    };
    rec(0, Complex(1));
    return z;
}

KpReport kp_check(const PolymerModel& m) {
    const int n = m.n();
    KpReport r;
    r.slack.resize(n);
    r.min_slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) r.weight_sum += std::exp(m.g[i]) * std::abs(m.w[i]);
    for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int i = 0; i < n; ++i)
            s += std::exp(m.g[i]) * std::abs(m.w[i]) * std::abs(m.delta[i][j] - 1.0);
        r.slack[j] = m.g[j] - s;
        r.min_slack = std::min(r.min_slack, r.slack[j]);
    }
    r.pass = n == 0 || r.min_slack >= 0;
    return r;
}

namespace {

// Sum over multisets of polymers of size n with a connected incompatibility
// graph: (n! / prod mult_i!) * U(tuple) * prod w. Ursell values are memoized
// by the delta submatrix pattern.
struct TruncatedSum {
    const PolymerModel& m;
    const std::vector<Complex>& w;
    std::unordered_map<std::string, double> memo;
    std::vector<int> idx;
    std::vector<Complex> per_order;
    long tuples = 0;

    TruncatedSum(const PolymerModel& m_, const std::vector<Complex>& w_, int n_max)
        : m(m_), w(w_) {
        per_order.assign(n_max, Complex(0));
        for (int n = 1; n <= n_max; ++n) {
            idx.assign(n, 0);
            rec(0, 0, n);
        }
    }

    void rec(int pos, int lo, int n) {
        if (pos == n) {
            emit(n);
            return;
        }
        for (int i = lo; i < m.n(); ++i) {
            idx[pos] = i;
            rec(pos + 1, i, n);
        }
    }

    bool connected(int n) const {
        if (n == 1) return true;
        std::vector<int> seen(n, 0);
        std::vector<int> q{0};
        seen[0] = 1;
        int cnt = 1;
        while (!q.empty()) {
            int a = q.back();
            q.pop_back();
            for (int b = 0; b < n; ++b)
                if (!seen[b] && m.delta[idx[a]][idx[b]] != 1.0) {
                    seen[b] = 1;
                    ++cnt;
                    q.push_back(b);
                }
        }
        return cnt == n;
    }

    void emit(int n) {
        if (!connected(n)) return;
        ++tuples;
        std::string key;
        key.reserve(n * n * 8 + 4);
        key.push_back(static_cast<char>(n));
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                double d = m.delta[idx[a]][idx[b]];
                key.append(reinterpret_cast<const char*>(&d), sizeof d);
            }
        double u;
        auto it = memo.find(key);
        if (it != memo.end())
            u = it->second;
        else {
            std::vector<std::vector<double>> sub(n, std::vector<double>(n, 0.0));
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    if (a != b) sub[a][b] = m.delta[idx[a]][idx[b]];
            u = ursell(sub);
            memo.emplace(std::move(key), u);
        }
        if (u == 0.0) return;
        // number of ordered tuples realizing this multiset
        double count = 1;
        for (int k = 2; k <= n; ++k) count *= k;
        int run = 1;
        for (int a = 1; a <= n; ++a) {
            if (a < n && idx[a] == idx[a - 1]) {
                ++run;
                continue;
            }
            for (int k = 2; k <= run; ++k) count /= k;
            run = 1;
        }
        Complex prod(1);
        for (int a = 0; a < n; ++a) prod *= w[idx[a]];
        per_order[n - 1] += count * u * prod;
    }
};

}  // namespace

Complex truncated_cluster_sum(const PolymerModel& m, const std::vector<Complex>& weights,
                              int n_max) {
    TruncatedSum ts(m, weights, n_max);
    Complex s = 0;
    for (const auto& c : ts.per_order) s += c;
    return s;
}

ExpansionResult log_z_truncated(const PolymerModel& m, int n_max) {
    TruncatedSum ts(m, m.w, n_max);
    ExpansionResult r;
    r.per_order = ts.per_order;
    r.tuples = ts.tuples;
    for (const auto& c : r.per_order) r.value += c;
    if (!r.per_order.empty()) r.last_order_magnitude = std::abs(r.per_order.back());
    r.certified = kp_check(m).pass;
    return r;
}

// ---- dependency encodings ---------------------------------------------------

void DependencyEncoding::validate(double tol) const {
    if (n_sites < 1 || n_sites > 6) throw std::runtime_error("encoding: need 1 <= n_sites <= 6");
    const int n = n_sites;
    double total = 0;
    for (const auto& a : support) {
        if (static_cast<int>(a.sigma.size()) != n || static_cast<int>(a.x.size()) != n)
            throw std::runtime_error("encoding: atom shape mismatch");
        if (a.prob < -tol) throw std::runtime_error("encoding: negative probability");
        total += a.prob;
        for (int v = 0; v < n; ++v) {
            if (a.sigma[v] != 1 && a.sigma[v] != -1)
                throw std::runtime_error("encoding: spins must be +-1");
            if (!(a.x[v] >> v & 1)) throw std::runtime_error("encoding: v not in X_v");
            if (a.x[v] >> n) throw std::runtime_error("encoding: X_v leaves Lambda");
        }
    }
    if (std::abs(total - 1.0) > tol * support.size() + tol)
        throw std::runtime_error("encoding: probabilities do not sum to 1");

    const int nd = 1 << n;
    // Per region Delta: key (X_Delta mask << 6) | sigma bits on Delta.
    auto keys_for = [&](const EncodingAtom& a, int delta) {
        int xm = 0, sm = 0;
        for (int v = 0; v < n; ++v)
            if (delta >> v & 1) {
                xm |= a.x[v];
                if (a.sigma[v] > 0) sm |= 1 << v;
            }
        return static_cast<uint16_t>(xm << 6 | sm);
    };
    std::vector<std::map<uint16_t, double>> J(nd);
    for (int delta = 1; delta < nd; ++delta)
        for (const auto& a : support) J[delta][keys_for(a, delta)] += a.prob;

    for (int d1 = 1; d1 < nd; ++d1)
        for (int d2 = 1; d2 < nd; ++d2) {
            std::map<uint32_t, double> joint;
            for (const auto& a : support)
                joint[static_cast<uint32_t>(keys_for(a, d1)) << 12 | keys_for(a, d2)] += a.prob;
            for (const auto& [k1, p1] : J[d1])
                for (const auto& [k2, p2] : J[d2]) {
                    if ((k1 >> 6) & (k2 >> 6)) continue;  // only disjoint (C, C')
                    auto it = joint.find(static_cast<uint32_t>(k1) << 12 | k2);
                    double jp = it == joint.end() ? 0.0 : it->second;
                    if (std::abs(jp - p1 * p2) > 1e3 * tol)
                        throw std::runtime_error("encoding: factorization property fails");
                }
        }
}

DependencyEncoding block_encoding(int n_sites, const std::vector<std::vector<int>>& blocks,
                                  uint64_t seed) {
    std::vector<int> owner(n_sites, -1);
    for (size_t b = 0; b < blocks.size(); ++b)
        for (int v : blocks[b]) {
            if (v < 0 || v >= n_sites || owner[v] >= 0)
                throw std::runtime_error("block_encoding: not a partition");
            owner[v] = static_cast<int>(b);
        }
    for (int v = 0; v < n_sites; ++v)
        if (owner[v] < 0) throw std::runtime_error("block_encoding: not a partition");

    Rng rng(seed);
    std::vector<std::vector<double>> law(blocks.size());
    for (size_t b = 0; b < blocks.size(); ++b) {
        int k = 1 << blocks[b].size();
        double s = 0;
        law[b].resize(k);
        for (int i = 0; i < k; ++i) s += law[b][i] = 0.05 + rng.next_double();
        for (int i = 0; i < k; ++i) law[b][i] /= s;
    }

    std::vector<uint8_t> block_mask(blocks.size(), 0);
    for (size_t b = 0; b < blocks.size(); ++b)
        for (int v : blocks[b]) block_mask[b] |= uint8_t{1} << v;

    DependencyEncoding enc;
    enc.n_sites = n_sites;
    std::vector<int> pat(blocks.size(), 0);
    for (;;) {
        EncodingAtom a;
        a.sigma.assign(n_sites, -1);
        a.x.assign(n_sites, 0);
        a.prob = 1;
        for (size_t b = 0; b < blocks.size(); ++b) {
            a.prob *= law[b][pat[b]];
            for (size_t i = 0; i < blocks[b].size(); ++i)
                if (pat[b] >> i & 1) a.sigma[blocks[b][i]] = 1;
            for (int v : blocks[b]) a.x[v] = block_mask[b];
        }
        enc.support.push_back(std::move(a));
        size_t b = 0;
        while (b < blocks.size() && ++pat[b] == 1 << blocks[b].size()) pat[b++] = 0;
        if (b == blocks.size()) break;
    }
    return enc;
}

DependencyEncoding random_block_encoding(int n_sites, uint64_t seed) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<int> order(n_sites);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n_sites - 1; i > 0; --i)
        std::swap(order[i], order[rng.next_below(static_cast<uint32_t>(i + 1))]);
    std::vector<std::vector<int>> blocks;
    int at = 0;
    while (at < n_sites) {
        int rem = n_sites - at;
        int sz = rem >= 3 && (rng.next_u64() & 1) ? 3 : std::min(2, rem);
        if (rem - sz == 1) sz = std::min(rem, sz + 1);  // avoid a trailing singleton when possible
        blocks.emplace_back(order.begin() + at, order.begin() + at + sz);
        at += sz;
    }
    return block_encoding(n_sites, blocks, seed);
}

IdentityCheck verify_polymer_identity(const DependencyEncoding& phi,
                                      const std::vector<LocalFunction>& fs) {
    const int n = phi.n_sites;
    const int nf = static_cast<int>(fs.size());
    if (nf > 12) throw std::runtime_error("identity: too many functions");
    const int nd = 1 << n, nh = 1 << nf;

    IdentityCheck out;
    std::vector<double> w(nd, 0.0);
    std::vector<int> usupp(nh, 0);
    std::vector<double> prod(nh, 0.0);
    for (const auto& a : phi.support) {
        double lp = a.prob;
        std::vector<int> xs(nf, 0);
        std::vector<double> fm1(nf);
        for (int f = 0; f < nf; ++f) {
            for (int v : fs[f].support) xs[f] |= a.x[v];
            double fv = fs[f].eval(a.sigma);
            fm1[f] = fv - 1.0;
            lp *= fv;
        }
        out.lhs += lp;

        usupp[0] = 0;
        prod[0] = a.prob;
        for (int H = 1; H < nh; ++H) {
            int f = __builtin_ctz(H);
            usupp[H] = usupp[H & (H - 1)] | xs[f];
            prod[H] = prod[H & (H - 1)] * fm1[f];
        }
        for (int H = 1; H < nh; ++H) {
            if (prod[H] == 0.0) continue;
            // the glued support must not split into two X-disjoint halves
            bool split = false;
            for (int S = (H - 1) & H; S; S = (S - 1) & H)
                if (!(usupp[S] & usupp[H ^ S])) {
                    split = true;
                    break;
                }
            if (!split) w[usupp[H]] += prod[H];
        }
    }

    // Z over Lambda by the disjoint-collection recursion.
    std::vector<double> F(nd, 0.0);
    F[0] = 1.0;
    for (int S = 1; S < nd; ++S) {
        int v = S & -S;
        double z = F[S ^ v];
        for (int C = S; C; C = (C - 1) & S)
            if (C & v) z += w[C] * F[S ^ C];
        F[S] = z;
    }
    out.rhs = F[nd - 1];
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

// ---- block energy decomposition ---------------------------------------------

BlockEnergy BlockEnergy::make(const CoarseLattice& coarse) {
    BlockEnergy be;
    be.coarse_ = coarse;
    const TorusGeom& g = coarse.geom();
    be.intra_.resize(coarse.n_blocks());
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> cross;
    // every directed pair carries weight 1/2, so parallel bonds of small tori
    // are counted with the right multiplicity
    for (int i = 0; i < g.n_sites(); ++i)
        for (int k = 0; k < g.degree(); ++k) {
            int j = g.neighbour(i, k);
            int bi = coarse.block_of(i), bj = coarse.block_of(j);
            if (bi == bj)
                be.intra_[bi].push_back({i, j});
            else
                cross[{std::min(bi, bj), std::max(bi, bj)}].push_back({i, j});
        }
    for (auto& [e, bonds] : cross) {
        be.edges_.push_back(e);
        be.cross_.push_back(std::move(bonds));
    }
    return be;
}

static double half_bond_sum(const std::vector<std::pair<int, int>>& bonds,
                            const std::vector<int8_t>& sigma) {
    double s = 0;
    for (auto [i, j] : bonds) s += sigma[i] * sigma[j];
    return 0.5 * s;
}

double BlockEnergy::f_block(int block, const std::vector<int8_t>& sigma) const {
    return half_bond_sum(intra_[block], sigma);
}

double BlockEnergy::f_edge(int edge, const std::vector<int8_t>& sigma) const {
    return half_bond_sum(cross_[edge], sigma);
}

double BlockEnergy::total_bond_sum(const std::vector<int8_t>& sigma) const {
    double s = 0;
    for (int b = 0; b < coarse_.n_blocks(); ++b) s += f_block(b, sigma);
    for (int e = 0; e < n_edges(); ++e) s += f_edge(e, sigma);
    return s;
}

double BlockEnergy::max_abs() const {
    double bl = 1;
    for (int k = 0; k < coarse_.geom().d(); ++k) bl *= coarse_.block_side();
    return 2.0 * coarse_.geom().d() * bl;
}

// ---- coupling samples and perturbation weights ------------------------------

PhiSample sample_phi(const CoarseLattice& coarse, const ModelParams& p, double t_max,
                     uint64_t seed) {
    if (coarse.n_blocks() > 32) throw std::runtime_error("sample_phi: too many blocks");
    Lattice lat = coarse.geom().lattice();
    std::vector<int> all(lat.n_sites);
    std::iota(all.begin(), all.end(), 0);
    CouplingResult c = coupling_time(lat, p, all, 0.0, t_max, seed);
    PhiSample s;
    if (!c.coupled) return s;
    s.coupled = true;
    s.sigma.assign(lat.n_sites, 0);
    for (size_t i = 0; i < c.target.size(); ++i) s.sigma[c.target[i]] = c.sample[i];
    s.x.assign(coarse.n_blocks(), 0);
    for (int b = 0; b < coarse.n_blocks(); ++b) {
        std::vector<int> bs = coarse.block_sites(b);
        double tau = exact_tau(lat, c.real, p, bs, 0.0, c.certified_window);
        std::vector<int> K = upd(lat, c.real, tau, 0.0, bs);
        for (int blk : coarse.coarsen(K)) s.x[b] |= uint32_t{1} << blk;
    }
    return s;
}

namespace {

// A "bond" of the weight sum: a block of C or an internal coarse edge of C.
struct WeightBond {
    int block = -1;  // >= 0 for f_v
    int edge = -1;   // >= 0 for f_{vw}
    uint32_t blocks_mask = 0;
};

std::vector<WeightBond> weight_bonds(const BlockEnergy& be, uint32_t cmask) {
    std::vector<WeightBond> out;
    for (int b = 0; b < be.coarse().n_blocks(); ++b)
        if (cmask >> b & 1) out.push_back({b, -1, uint32_t{1} << b});
    for (int e = 0; e < be.n_edges(); ++e) {
        auto [v, w] = be.edges()[e];
        uint32_t m = uint32_t{1} << v | uint32_t{1} << w;
        if ((cmask & m) == m) out.push_back({-1, e, m});
    }
    return out;
}

// sum over non-empty H of prod factors, on the event that the union of the
// X-supports of H is exactly cmask and does not split.
double glued_sum(const std::vector<double>& factor, const std::vector<uint32_t>& xsupp,
                 uint32_t cmask) {
    const int nb = static_cast<int>(factor.size());
    const int nh = 1 << nb;
    std::vector<uint32_t> un(nh, 0);
    std::vector<double> prod(nh, 1.0);
    double s = 0;
    for (int H = 1; H < nh; ++H) {
        int b = __builtin_ctz(H);
        un[H] = un[H & (H - 1)] | xsupp[b];
        prod[H] = prod[H & (H - 1)] * factor[b];
        if (un[H] != cmask || prod[H] == 0.0) continue;
        bool split = false;
        for (int S = (H - 1) & H; S; S = (S - 1) & H)
            if (!(un[S] & un[H ^ S])) {
                split = true;
                break;
            }
        if (!split) s += prod[H];
    }
    return s;
}

struct SharedSamples {
    std::vector<char> ok;
    std::vector<double> bond_sum;                 // total bond sum per replica
    std::vector<std::vector<double>> cvals;       // per polymer, per replica
    std::vector<std::vector<double>> cvals_alt;   // optional second weight family
    long used = 0, censored = 0;
};

// One CFTP pass per replica; every requested weight functional is evaluated
// on the shared (sigma, X) draw.
template <typename Eval>
SharedSamples run_samples(const BlockEnergy& be, const ModelParams& p, long replicas,
                          uint64_t seed, double t_max, int workers, int n_poly, bool alt,
                          Eval eval) {
    SharedSamples ss;
    ss.ok.assign(replicas, 0);
    ss.bond_sum.assign(replicas, 0.0);
    ss.cvals.assign(n_poly, std::vector<double>(replicas, 0.0));
    if (alt) ss.cvals_alt.assign(n_poly, std::vector<double>(replicas, 0.0));
    for_each_replica(replicas, workers, [&](long r) {
        PhiSample s = sample_phi(be.coarse(), p, t_max, mix_seed(seed, 17, static_cast<uint64_t>(r)));
        if (!s.coupled) return;
        ss.ok[r] = 1;
        ss.bond_sum[r] = be.total_bond_sum(s.sigma);
        eval(r, s);
    });
    for (long r = 0; r < replicas; ++r)
        if (ss.ok[r])
            ++ss.used;
        else
            ++ss.censored;
    return ss;
}

MeanSe masked_mean(const std::vector<double>& v, const std::vector<char>& ok) {
    std::vector<double> kept;
    kept.reserve(v.size());
    for (size_t i = 0; i < v.size(); ++i)
        if (ok[i]) kept.push_back(v[i]);
    return mean_se(kept);
}

}  // namespace

WeightEstimate estimate_weight(const BlockEnergy& be, const ModelParams& p, double z,
                               const std::vector<int>& C_blocks, long replicas, uint64_t seed,
                               double t_max, int workers) {
    uint32_t cmask = 0;
    for (int b : C_blocks) cmask |= uint32_t{1} << b;
    std::vector<WeightBond> bonds = weight_bonds(be, cmask);
    if (bonds.size() > 20) throw std::runtime_error("estimate_weight: too many bonds");
    SharedSamples ss = run_samples(
        be, p, replicas, seed, t_max, workers, 1, false, [&](long r, const PhiSample& s) {
            std::vector<double> factor(bonds.size());
            std::vector<uint32_t> xsupp(bonds.size());
            for (size_t b = 0; b < bonds.size(); ++b) {
                double f = bonds[b].block >= 0 ? be.f_block(bonds[b].block, s.sigma)
                                               : be.f_edge(bonds[b].edge, s.sigma);
                factor[b] = std::expm1(z * f);
                uint32_t u = 0;
                for (int blk = 0; blk < be.coarse().n_blocks(); ++blk)
                    if (bonds[b].blocks_mask >> blk & 1) u |= s.x[blk];
                xsupp[b] = u;
            }
            ss.cvals[0][r] = glued_sum(factor, xsupp, cmask);
        });
    MeanSe m = masked_mean(ss.cvals[0], ss.ok);
    return {m.mean, m.se, ss.used, ss.censored};
}

namespace {

std::vector<std::vector<int>> connected_coarse_sets(const CoarseLattice& coarse, int c_max) {
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> frontier;
    for (int b = 0; b < coarse.n_blocks(); ++b) {
        std::vector<int> s{b};
        seen.insert(s);
        frontier.push_back(s);
    }
    for (int sz = 2; sz <= c_max; ++sz) {
        std::vector<std::vector<int>> next;
        for (const auto& s : frontier)
            for (int b : s)
                for (int nb : coarse.star_neighbours(b)) {
                    if (std::binary_search(s.begin(), s.end(), nb)) continue;
                    std::vector<int> t = s;
                    t.insert(std::lower_bound(t.begin(), t.end(), nb), nb);
                    if (seen.insert(t).second) next.push_back(t);
                }
        frontier = std::move(next);
    }
    return {seen.begin(), seen.end()};
}

PolymerModel model_from_coarse_sets(const std::vector<std::vector<int>>& sets) {
    PolymerModel m;
    m.sets = sets;
    for (const auto& s : sets) {
        m.w.push_back(0);
        m.g.push_back(static_cast<double>(s.size()));
    }
    delta_from_sets(m);
    return m;
}

// delta-method s.e. of a smooth function of the weight means: gradient by
// finite differences, then the empirical s.e. of the per-replica linearization.
double series_se_delta(const PolymerModel& m, int n_max,
                       const std::vector<Complex>& w0, const std::vector<double>& extra_grad,
                       const std::vector<std::vector<double>>& cvals,
                       const std::vector<std::vector<double>>& cvals2,
                       const std::vector<char>& ok) {
    const int np = m.n();
    double base = truncated_cluster_sum(m, w0, n_max).real();
    std::vector<double> grad(np);
    for (int i = 0; i < np; ++i) {
        double eps = 1e-6 * std::max(1.0, std::abs(w0[i]));
        std::vector<Complex> wp = w0;
        wp[i] += eps;
        grad[i] = (truncated_cluster_sum(m, wp, n_max).real() - base) / eps;
    }
    std::vector<double> lin;
    for (size_t r = 0; r < ok.size(); ++r) {
        if (!ok[r]) continue;
        double t = 0;
        for (int i = 0; i < np; ++i) {
            t += grad[i] * cvals[i][r];
            if (!extra_grad.empty()) t += extra_grad[i] * cvals2[i][r];
        }
        lin.push_back(t);
    }
    return mean_se(lin).se;
}

}  // namespace

PressureSeries pressure_perturbation(const BlockEnergy& be, const ModelParams& p, double z,
                                     int n_max, int c_max, long replicas, uint64_t seed,
                                     double t_max, int workers) {
    const CoarseLattice& coarse = be.coarse();
    const int n_sites = coarse.geom().n_sites();
    PressureSeries out;
    out.z = z;
    out.polymers = connected_coarse_sets(coarse, c_max);
    const int np = static_cast<int>(out.polymers.size());
    std::vector<uint32_t> cmask(np, 0);
    std::vector<std::vector<WeightBond>> bonds(np);
    for (int i = 0; i < np; ++i) {
        for (int b : out.polymers[i]) cmask[i] |= uint32_t{1} << b;
        bonds[i] = weight_bonds(be, cmask[i]);
    }

    SharedSamples ss = run_samples(
        be, p, replicas, seed, t_max, workers, np, false, [&](long r, const PhiSample& s) {
            std::vector<double> fblk(coarse.n_blocks()), fedg(be.n_edges());
            for (int b = 0; b < coarse.n_blocks(); ++b) fblk[b] = be.f_block(b, s.sigma);
            for (int e = 0; e < be.n_edges(); ++e) fedg[e] = be.f_edge(e, s.sigma);
            for (int i = 0; i < np; ++i) {
                std::vector<double> factor(bonds[i].size());
                std::vector<uint32_t> xsupp(bonds[i].size());
                for (size_t b = 0; b < bonds[i].size(); ++b) {
                    double f = bonds[i][b].block >= 0 ? fblk[bonds[i][b].block]
                                                      : fedg[bonds[i][b].edge];
                    factor[b] = std::expm1(z * f);
                    uint32_t u = 0;
                    for (int blk = 0; blk < coarse.n_blocks(); ++blk)
                        if (bonds[i][b].blocks_mask >> blk & 1) u |= s.x[blk];
                    xsupp[b] = u;
                }
                ss.cvals[i][r] = glued_sum(factor, xsupp, cmask[i]);
            }
        });
    out.used = ss.used;
    out.censored = ss.censored;

    MeanSe bond_mean = masked_mean(ss.bond_sum, ss.ok);
    out.first_order = bond_mean.mean / n_sites;
    out.first_order_se = bond_mean.se / n_sites;

    PolymerModel model = model_from_coarse_sets(out.polymers);
    for (int i = 0; i < np; ++i) {
        MeanSe m = masked_mean(ss.cvals[i], ss.ok);
        model.w[i] = m.mean;
        out.weight_mean.push_back(m.mean);
        out.weight_se.push_back(m.se);
    }
    out.expansion = log_z_truncated(model, n_max);
    out.series = out.expansion.value.real() / n_sites;
    out.series_se =
        series_se_delta(model, n_max, model.w, {}, ss.cvals, {}, ss.ok) / n_sites;
    return out;
}

CorrelationSeries correlation_perturbation(const BlockEnergy& be, const ModelParams& p, double z,
                                           const std::vector<int>& A_sites, int n_max, int c_max,
                                           long replicas, uint64_t seed, double t_max,
                                           int workers) {
    const CoarseLattice& coarse = be.coarse();
    CorrelationSeries out;
    out.z = z;
    std::vector<std::vector<int>> polys = connected_coarse_sets(coarse, c_max);
    const int np = static_cast<int>(polys.size());
    std::vector<uint32_t> cmask(np, 0);
    for (int i = 0; i < np; ++i)
        for (int b : polys[i]) cmask[i] |= uint32_t{1} << b;

    std::vector<std::vector<int>> a_in_block(coarse.n_blocks());
    for (int v : A_sites) a_in_block[coarse.block_of(v)].push_back(v);

    std::vector<double> direct(replicas, 0.0);
    SharedSamples ss = run_samples(
        be, p, replicas, seed, t_max, workers, np, true, [&](long r, const PhiSample& s) {
            double prod_a = 1;
            for (int v : A_sites) prod_a *= s.sigma[v];
            direct[r] = prod_a;
            std::vector<double> mag(coarse.n_blocks(), 0.0), fa(coarse.n_blocks(), 1.0);
            for (int b = 0; b < coarse.n_blocks(); ++b) {
                for (int v : coarse.block_sites(b)) mag[b] += s.sigma[v];
                for (int v : a_in_block[b]) fa[b] *= s.sigma[v];
            }
            for (int i = 0; i < np; ++i) {
                std::vector<double> f_base, f_pert;
                std::vector<uint32_t> xsupp;
                for (int b : polys[i]) {
                    double e = std::exp(z * mag[b]);
                    f_base.push_back(e - 1.0);
                    f_pert.push_back(e * fa[b] - 1.0);
                    xsupp.push_back(s.x[b]);
                }
                ss.cvals[i][r] = glued_sum(f_base, xsupp, cmask[i]);
                ss.cvals_alt[i][r] = glued_sum(f_pert, xsupp, cmask[i]);
            }
        });
    out.used = ss.used;
    out.censored = ss.censored;

    MeanSe dm = masked_mean(direct, ss.ok);
    out.direct = dm.mean;
    out.direct_se = dm.se;

    PolymerModel model = model_from_coarse_sets(polys);
    std::vector<Complex> w_base(np), w_pert(np);
    for (int i = 0; i < np; ++i) {
        w_base[i] = masked_mean(ss.cvals[i], ss.ok).mean;
        w_pert[i] = masked_mean(ss.cvals_alt[i], ss.ok).mean;
    }
    double s_base = truncated_cluster_sum(model, w_base, n_max).real();
    double s_pert = truncated_cluster_sum(model, w_pert, n_max).real();
    out.estimate = std::exp(s_pert - s_base);

    // gradient of (S_pert - S_base) in both weight families, delta method
    std::vector<double> grad_base(np), grad_pert(np);
    for (int i = 0; i < np; ++i) {
        double e1 = 1e-6 * std::max(1.0, std::abs(w_base[i]));
        std::vector<Complex> wp = w_base;
        wp[i] += e1;
        grad_base[i] = -(truncated_cluster_sum(model, wp, n_max).real() - s_base) / e1;
        double e2 = 1e-6 * std::max(1.0, std::abs(w_pert[i]));
        wp = w_pert;
        wp[i] += e2;
        grad_pert[i] = (truncated_cluster_sum(model, wp, n_max).real() - s_pert) / e2;
    }
    std::vector<double> lin;
    for (long r = 0; r < replicas; ++r) {
        if (!ss.ok[r]) continue;
        double t = 0;
        for (int i = 0; i < np; ++i)
            t += grad_base[i] * ss.cvals[i][r] + grad_pert[i] * ss.cvals_alt[i][r];
        lin.push_back(t);
    }
    out.estimate_se = out.estimate * mean_se(lin).se;
    return out;
}

}  // namespace iperc
