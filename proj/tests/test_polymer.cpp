#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "iperc/oracle.hpp"
#include "iperc/polymer.hpp"
#include "iperc/rng.hpp"

using namespace iperc;

namespace {

// direct definition: (1/n!) sum over connected edge subsets of K_n of
// prod (delta - 1); independent of the subset recursion
double ursell_direct(const std::vector<std::vector<double>>& d) {
    int n = static_cast<int>(d.size());
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
    double total = 0;
    for (uint32_t sub = 0; sub < (uint32_t{1} << pairs.size()); ++sub) {
        // connectivity of the chosen edge set on all n vertices
        std::vector<int> comp(n);
        for (int i = 0; i < n; ++i) comp[i] = i;
        std::function<int(int)> find = [&](int a) {
            while (comp[a] != a) a = comp[a] = comp[comp[a]];
            return a;
        };
        double prod = 1;
        for (size_t e = 0; e < pairs.size(); ++e)
            if (sub >> e & 1) {
                prod *= d[pairs[e].first][pairs[e].second] - 1.0;
                comp[find(pairs[e].first)] = find(pairs[e].second);
            }
        bool conn = true;
        for (int i = 1; i < n; ++i)
            if (find(i) != find(0)) {
                conn = false;
                break;
            }
        if (conn) total += prod;
    }
    double fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;
    return total / fact;
}

// hard rods on a segment: Z(i) = Z(i-1) + sum_len lambda^len Z(i-len)
double rod_partition(int n_sites, int max_len, double lambda) {
    std::vector<double> Z(n_sites + 1, 0.0);
    Z[0] = 1.0;
    for (int i = 1; i <= n_sites; ++i) {
        Z[i] = Z[i - 1];
        for (int len = 1; len <= max_len && len <= i; ++len)
            Z[i] += std::pow(lambda, len) * Z[i - len];
    }
    return Z[n_sites];
}

}  // namespace

TEST_CASE("ursell fixtures: 1, -1/2, 1/3 as exact rationals") {
    CHECK(ursell_exact({{0}}) == Rational(1));
    CHECK(ursell_exact({{0, 0}, {0, 0}}) == Rational(-1, 2));
    CHECK(ursell_exact({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}) == Rational(1, 3));
    // a pair of compatible polymers is not a cluster
    CHECK(ursell_exact({{0, 1}, {1, 0}}) == Rational(0));
}

TEST_CASE("ursell recursion equals the direct connected-graph sum") {
    Rng rng(8);
    for (int n = 2; n <= 5; ++n)
        for (int rep = 0; rep < 30; ++rep) {
            std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double v = rep % 2 ? (rng.next_u64() & 1 ? 0.0 : 1.0) : rng.next_double() * 2;
                    d[i][j] = d[j][i] = v;
                }
            CHECK(ursell(d) == doctest::Approx(ursell_direct(d)).epsilon(1e-10));
        }
}

TEST_CASE("single-polymer expansion reproduces the log(1+w) series") {
    PolymerModel m;
    m.w = {Complex(0.3, 0.0)};
    m.delta = {{0.0}};
    m.g = {1.0};
    ExpansionResult r = log_z_truncated(m, 3);
    REQUIRE(r.per_order.size() == 3);
    CHECK(r.per_order[0].real() == doctest::Approx(0.3));
    CHECK(r.per_order[1].real() == doctest::Approx(-0.3 * 0.3 / 2));
    CHECK(r.per_order[2].real() == doctest::Approx(0.3 * 0.3 * 0.3 / 3));
    CHECK(polymer_z_exact(m).real() == doctest::Approx(1.3));
}

TEST_CASE("interval models: exact Z equals the rod recursion") {
    for (double lambda : {0.05, 0.3}) {
        PolymerModel m = interval_model(7, 3, lambda);
        CHECK(polymer_z_exact(m).real() == doctest::Approx(rod_partition(7, 3, lambda)).epsilon(1e-12));
    }
}

TEST_CASE("convergence criterion separates small and large weights") {
    CHECK(kp_check(interval_model(8, 2, 0.01)).pass);
    KpReport bad = kp_check(interval_model(8, 2, 1.0));
    CHECK(!bad.pass);
    CHECK(bad.min_slack < 0);
}

TEST_CASE("truncated expansion approaches the exact log partition") {
    PolymerModel m = interval_model(8, 3, 0.02);
    REQUIRE(kp_check(m).pass);
    double exact = std::log(polymer_z_exact(m).real());
    ExpansionResult r = log_z_truncated(m, 5);
    CHECK(std::abs(r.value.real() - exact) < 1e-8);
    // orders decay
    CHECK(std::abs(r.per_order[4]) < std::abs(r.per_order[0]));
}

TEST_CASE("complex weights: expansion matches the principal log of exact Z") {
    PolymerModel m = interval_model(6, 2, Complex(0.015, 0.01));
    ExpansionResult r = log_z_truncated(m, 6);
    Complex exact = std::log(polymer_z_exact(m));
    CHECK(std::abs(r.value - exact) < 1e-9);
}

TEST_CASE("json round-trip of a polymer model") {
    PolymerModel m = interval_model(5, 2, Complex(0.1, -0.05));
    PolymerModel b = model_from_json(model_to_json(m));
    REQUIRE(b.n() == m.n());
    for (int i = 0; i < m.n(); ++i) {
        CHECK(b.w[i] == m.w[i]);
        CHECK(b.sets[i] == m.sets[i]);
        CHECK(b.g[i] == m.g[i]);
    }
    CHECK(b.delta == m.delta);
}

TEST_CASE("block encodings satisfy the exhaustive factorization check") {
    for (int n : {4, 5, 6})
        for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            DependencyEncoding enc = random_block_encoding(n, seed);
            CHECK_NOTHROW(enc.validate());
        }
}

TEST_CASE("a correlated encoding with singleton supports is rejected") {
    // two sites, X_v = {v}, but sigma_0 = sigma_1 always: declaring singleton
    // dependence while being correlated must fail the product test
    DependencyEncoding enc;
    enc.n_sites = 2;
    EncodingAtom up{{1, 1}, {1, 2}, 0.5};
    EncodingAtom dn{{-1, -1}, {1, 2}, 0.5};
    enc.support = {up, dn};
    CHECK_THROWS(enc.validate());
}

TEST_CASE("polymer identity holds exactly on synthetic encodings") {
    Rng rng(99);
    for (int rep = 0; rep < 25; ++rep) {
        DependencyEncoding enc = random_block_encoding(5, 700 + rep);
        std::vector<LocalFunction> fs;
        for (int f = 0; f < 3; ++f) {
            LocalFunction lf;
            lf.support = {static_cast<int>(rng.next_below(5))};
            int extra = static_cast<int>(rng.next_below(5));
            if (extra != lf.support[0]) lf.support.push_back(extra);
            std::sort(lf.support.begin(), lf.support.end());
            lf.table.resize(size_t{1} << lf.support.size());
            for (auto& t : lf.table) t = 0.2 + 1.6 * rng.next_double();
            fs.push_back(std::move(lf));
        }
        IdentityCheck chk = verify_polymer_identity(enc, fs);
        CHECK(chk.residual < 1e-12 * std::max(1.0, std::abs(chk.lhs)) + 1e-13);
    }
}

TEST_CASE("block energy decomposition sums to the full bond sum") {
    CoarseLattice c0 = CoarseLattice::make(TorusGeom::make(2, 2), 0);
    CoarseLattice c1 = CoarseLattice::make(TorusGeom::make(2, 3), 1);
    Rng rng(5);
    for (const CoarseLattice* c : {&c0, &c1}) {
        BlockEnergy be = BlockEnergy::make(*c);
        const TorusGeom& g = c->geom();
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<int8_t> s(g.n_sites());
            for (auto& v : s) v = rng.next_u64() & 1 ? 1 : -1;
            double direct = 0;
            for (int i = 0; i < g.n_sites(); ++i)
                for (int k = 0; k < g.degree(); ++k) direct += 0.5 * s[i] * s[g.neighbour(i, k)];
            CHECK(be.total_bond_sum(s) == doctest::Approx(direct).epsilon(1e-12));
            for (int b = 0; b < c->n_blocks(); ++b)
                CHECK(std::abs(be.f_block(b, s)) <= be.max_abs() + 1e-12);
            for (int e = 0; e < be.n_edges(); ++e)
                CHECK(std::abs(be.f_edge(e, s)) <= be.max_abs() + 1e-12);
        }
    }
}

TEST_CASE("phi samples are deterministic in the seed and X(v) contains v") {
    CoarseLattice coarse = CoarseLattice::make(TorusGeom::make(1, 2), 0);  // 4 blocks
    ModelParams p{0.3, 0.1};
    PhiSample a = sample_phi(coarse, p, 200.0, 12);
    PhiSample b = sample_phi(coarse, p, 200.0, 12);
    REQUIRE(a.coupled);
    CHECK(a.sigma == b.sigma);
    CHECK(a.x == b.x);
    for (int v = 0; v < coarse.n_blocks(); ++v) CHECK((a.x[v] >> v & 1) == 1);
}

TEST_CASE("perturbation weights vanish identically at z = 0") {
    CoarseLattice coarse = CoarseLattice::make(TorusGeom::make(1, 2), 0);
    BlockEnergy be = BlockEnergy::make(coarse);
    ModelParams p{0.3, 0.1};
    WeightEstimate w = estimate_weight(be, p, 0.0, {0, 1}, 50, 3, 200.0, 1);
    CHECK(w.mean == 0.0);
    CHECK(w.se == 0.0);
    CHECK(w.used > 0);
}

TEST_CASE("first-order pressure coefficient approximates the energy density") {
    TorusGeom g = TorusGeom::make(1, 2);  // 4-ring
    CoarseLattice coarse = CoarseLattice::make(g, 0);
    BlockEnergy be = BlockEnergy::make(coarse);
    ModelParams p{0.3, 0.1};
    PressureSeries ps = pressure_perturbation(be, p, 0.05, 3, 2, 4000, 21, 300.0, 1);
    double exact = bond_sum_expectation(torus_instance(g, p)) / g.n_sites();
    CHECK(std::abs(ps.first_order - exact) < 3.5 * ps.first_order_se + 1e-9);
    CHECK(ps.used + ps.censored == 4000);
}

TEST_CASE("correlation series at z = 0 reduces to the direct estimate") {
    TorusGeom g = TorusGeom::make(1, 2);
    CoarseLattice coarse = CoarseLattice::make(g, 0);
    BlockEnergy be = BlockEnergy::make(coarse);
    ModelParams p{0.2, 1.0};  // strong field keeps the expansion short
    CorrelationSeries cs = correlation_perturbation(be, p, 0.0, {0}, 8, 4, 4000, 77, 300.0, 1);
    double exact = spin_product_expectation(torus_instance(g, p), {0});
    CHECK(std::abs(cs.direct - exact) < 3.5 * cs.direct_se + 1e-9);
    CHECK(std::abs(cs.estimate - cs.direct) <
          3.5 * (cs.estimate_se + cs.direct_se) + 0.02);
}
