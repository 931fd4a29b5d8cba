#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "iperc/fkfield.hpp"
#include "iperc/oracle.hpp"
#include "iperc/rng.hpp"
#include "iperc/stats.hpp"

using namespace iperc;

namespace {

std::vector<double> ising_distribution(const FkGraph& g, const ModelParams& p) {
    return exact_distribution(graph_instance(g.n_vertices, g.edges, p));
}

double exact_crossing(const FkGraph& g, const ModelParams& p, int target) {
    FkEnumeration e = enumerate_fk(g, p, -1);
    double s = 0;
    for (uint64_t omega = 0; omega < e.omega_prob.size(); ++omega) {
        FkClusters c = fk_clusters(g, omega);
        if (c.comp[target] == c.comp[g.boundary]) s += e.omega_prob[omega];
    }
    return s;
}

}  // namespace

TEST_CASE("cluster weights and coloring reproduce the Ising law exactly") {
    ModelParams p{0.4, 0.15};
    std::vector<FkGraph> graphs;
    graphs.push_back(graph_edges(3, {{0, 1}, {1, 2}, {0, 2}}));          // triangle
    graphs.push_back(graph_edges(4, {{0, 1}, {1, 2}, {2, 3}}));          // path
    graphs.push_back(graph_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}));
    graphs.push_back(graph_edges(3, {{0, 1}, {0, 1}, {1, 2}}));          // parallel edge
    graphs.push_back(box_with_boundary(BoxGeom::make(1, 2)));
    graphs.push_back(box_with_boundary(BoxGeom::make(1, 3)));            // 7 sites, 8 edges
    for (const FkGraph& g : graphs) {
        REQUIRE(g.n_edges() <= 20);
        FkEnumeration e = enumerate_fk(g, p);
        std::vector<double> ising = ising_distribution(g, p);
        REQUIRE(e.spin_prob.size() == ising.size());
        double total = 0;
        for (size_t s = 0; s < ising.size(); ++s) {
            CHECK(std::abs(e.spin_prob[s] - ising[s]) < 1e-12);
            total += e.spin_prob[s];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("conditioning the boundary cluster equals the minus-boundary Ising box") {
    ModelParams p{0.5, 0.2};
    for (int N : {1, 2}) {
        BoxGeom box = BoxGeom::make(1, N);
        FkGraph g = box_with_boundary(box);
        FkEnumeration e = enumerate_fk(g, p, -1);
        std::vector<double> ref = exact_distribution(box_instance(box, p, Boundary::Minus));
        // marginalize the boundary bit (always minus under the conditioning)
        for (size_t s = 0; s < ref.size(); ++s) {
            CHECK(std::abs(e.spin_prob[s] - ref[s]) < 1e-12);
            CHECK(e.spin_prob[s | (size_t{1} << g.boundary)] == 0.0);
        }
    }
}

TEST_CASE("finite-energy bounds hold for every edge and environment") {
    ModelParams p{0.45, 0.25};
    FkGraph g = graph_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}});
    FkEnumeration e = enumerate_fk(g, p);
    auto [lo, hi] = finite_energy_bounds(p.beta);
    for (int edge = 0; edge < g.n_edges(); ++edge)
        for (uint64_t rest = 0; rest < e.omega_prob.size(); ++rest) {
            double c = conditional_edge_open_prob(e, edge, rest);
            CHECK(c >= lo - 1e-12);
            CHECK(c <= hi + 1e-12);
        }
}

TEST_CASE("a closed cut decouples the two sides exactly") {
    // path 0-1-2-3-4; conditioning edges {1,2} and {2,3} closed cuts the graph
    ModelParams p{0.6, 0.1};
    FkGraph g = graph_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    FkEnumeration e = enumerate_fk(g, p);
    // conditional joint of (edge0, edge3) given edges 1,2 closed
    double q[2][2] = {};
    for (uint64_t omega = 0; omega < e.omega_prob.size(); ++omega) {
        if (omega & 0b0110) continue;
        q[omega & 1][(omega >> 3) & 1] += e.omega_prob[omega];
    }
    double z = q[0][0] + q[0][1] + q[1][0] + q[1][1];
    for (auto& row : q)
        for (auto& v : row) v /= z;
    double p0 = q[1][0] + q[1][1], p3 = q[0][1] + q[1][1];
    CHECK(std::abs(q[1][1] - p0 * p3) < 1e-12);
    CHECK(std::abs(q[1][0] - p0 * (1 - p3)) < 1e-12);
    CHECK(std::abs(q[0][1] - (1 - p0) * p3) < 1e-12);
}

TEST_CASE("positive association on random monotone pairs") {
    ModelParams p{0.35, 0.12};
    FkGraph g = box_with_boundary(BoxGeom::make(1, 2));  // 6 edges
    FkEnumeration e = enumerate_fk(g, p);
    Rng rng(17);
    const uint64_t full = (uint64_t{1} << g.n_edges()) - 1;
    for (int rep = 0; rep < 200; ++rep) {
        // monotone indicator: omega contains at least one of k random sets
        auto make_f = [&]() {
            int k = 1 + static_cast<int>(rng.next_below(3));
            std::vector<uint64_t> sets;
            for (int i = 0; i < k; ++i) sets.push_back(rng.next_u64() & full);
            return sets;
        };
        auto sets_f = make_f(), sets_g = make_f();
        auto eval = [](const std::vector<uint64_t>& sets, uint64_t omega) {
            for (uint64_t s : sets)
                if ((omega & s) == s) return 1.0;
            return 0.0;
        };
        double ef = 0, eg = 0, efg = 0;
        for (uint64_t omega = 0; omega < e.omega_prob.size(); ++omega) {
            double f = eval(sets_f, omega), h = eval(sets_g, omega);
            ef += f * e.omega_prob[omega];
            eg += h * e.omega_prob[omega];
            efg += f * h * e.omega_prob[omega];
        }
        CHECK(efg >= ef * eg - 1e-12);
    }
}

TEST_CASE("spin sampling plus conditional edges reproduces the edge marginal") {
    ModelParams p{0.4, 0.1};
    FkGraph g = graph_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    FkEnumeration e = enumerate_fk(g, p);
    std::vector<long> count(e.omega_prob.size(), 0);
    const long reps = 20000;
    for (long r = 0; r < reps; ++r) {
        FkSample s = sample_fk(g, p, 300.0, 5000 + r);
        REQUIRE(s.coupled);
        ++count[s.omega];
    }
    for (size_t omega = 0; omega < e.omega_prob.size(); ++omega) {
        double hat = static_cast<double>(count[omega]) / reps;
        double se = binomial_se(e.omega_prob[omega], reps);
        CHECK(std::abs(hat - e.omega_prob[omega]) < 4 * se + 1e-3);
    }
}

TEST_CASE("magnetization splits into link and bulk terms") {
    ModelParams p{0.5, 0.2};
    for (int N : {1, 2}) {
        FkGraph g = box_with_boundary(BoxGeom::make(1, N));
        MagnetSplit ms = magnet_fk_split(g, p, N);  // origin of the segment
        CHECK(ms.residual < 1e-12);
        CHECK(ms.m_minus ==
              doctest::Approx(magnetization_1d(N, p, Boundary::Minus)).epsilon(1e-10));
        CHECK(ms.link >= 0.0);
        CHECK(ms.link <= 1.0);
    }
}

TEST_CASE("minus conditioning at -h mirrors plus conditioning at h") {
    FkGraph g = box_with_boundary(BoxGeom::make(1, 1));
    FkEnumeration a = enumerate_fk(g, {0.4, 0.15}, -1);
    FkEnumeration b = enumerate_fk(g, {0.4, -0.15}, 1);
    double ma = 0, mb = 0;
    for (uint32_t s = 0; s < a.spin_prob.size(); ++s) {
        ma += a.spin_prob[s] * ((s & 1) ? 1.0 : -1.0);
        mb += b.spin_prob[s] * ((s & 1) ? 1.0 : -1.0);
    }
    CHECK(ma == doctest::Approx(-mb).epsilon(1e-10));
}

TEST_CASE("single-site box: conditioned magnetization is tanh(h - 2 beta)") {
    ModelParams p{0.3, 0.2};
    FkGraph g = box_with_boundary(BoxGeom::make(1, 0));
    MagnetSplit ms = magnet_fk_split(g, p, 0);
    CHECK(ms.m_minus == doctest::Approx(std::tanh(0.2 - 2 * 0.3)).epsilon(1e-10));
}

TEST_CASE("crossing estimators agree with each other and the exact value") {
    ModelParams p{0.4, 0.1};
    FkGraph g = box_with_boundary(BoxGeom::make(1, 1));
    CrossingEstimate ce = crossing_prob(g, p, 1, 6000, 13, 300.0, 1);
    CHECK(ce.censored == 0);
    CHECK(ce.agree);
    double exact = exact_crossing(g, p, 1);
    CHECK(std::abs(ce.rejection - exact) < 4 * ce.rejection_se + 1e-9);
    CHECK(std::abs(ce.reweight - exact) < 4 * ce.reweight_se + 1e-9);
}

TEST_CASE("fk graph json loader validates and round-trips structure") {
    FkGraph g = fk_graph_from_json(R"({"n": 4, "edges": [[0,1],[1,2],[0,1]], "boundary": 3})");
    CHECK(g.n_vertices == 4);
    CHECK(g.n_edges() == 3);
    CHECK(g.boundary == 3);
    CHECK_THROWS(fk_graph_from_json(R"({"n": 2, "edges": [[0,5]]})"));
}

TEST_CASE("boundary-condition gaps are ordered and decay exponentially") {
    RelaxGapReport rep = relax_gap_1d({0.5, 0.2}, 20);
    CHECK(rep.ordered);
    CHECK(rep.fit_pm.rate > 0);
    CHECK(rep.fit_pm.rate_ci_low() > 0);
    // gaps shrink monotonically in N
    for (size_t i = 1; i < rep.N.size(); ++i)
        CHECK(rep.m_plus[i] - rep.m_minus[i] <= rep.m_plus[i - 1] - rep.m_minus[i - 1] + 1e-12);
}

TEST_CASE("padded lattice neighbour sums see each parallel edge") {
    FkGraph g = graph_edges(3, {{0, 1}, {0, 1}, {1, 2}});
    Lattice lat = padded_lattice(g);
    std::vector<int8_t> s{1, 1, -1};
    CHECK(lat.neighbour_sum(s, 0) == 2);   // two parallel edges to site 1
    CHECK(lat.neighbour_sum(s, 1) == 1);   // 1 + 1 - 1
    CHECK(lat.neighbour_sum(s, 2) == 1);
}
