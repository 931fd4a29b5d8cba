#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "iperc/geometry.hpp"

using namespace iperc;

TEST_CASE("torus indexing round-trips and is involutive under neighbours") {
    for (int d : {1, 2, 3}) {
        TorusGeom g = TorusGeom::make(d, 3);
        CHECK(g.n_sites() == static_cast<int>(std::pow(6, d)));
        for (int s = 0; s < g.n_sites(); ++s) {
            CHECK(g.index(g.coords(s)) == s);
            for (int k = 0; k < g.degree(); ++k) {
                int t = g.neighbour(s, k);
                // each neighbour relation has an inverse direction
                int back = g.neighbour(t, k ^ 1);
                CHECK(back == s);
            }
        }
    }
}

TEST_CASE("torus coordinates live in (-N, N]") {
    TorusGeom g = TorusGeom::make(2, 3);
    for (int s = 0; s < g.n_sites(); ++s)
        for (int c : g.coords(s)) {
            CHECK(c > -3);
            CHECK(c <= 3);
        }
}

TEST_CASE("translation is a bijection and respects linf distance") {
    TorusGeom g = TorusGeom::make(2, 2);
    std::vector<int> v{1, -2};
    std::set<int> image;
    for (int s = 0; s < g.n_sites(); ++s) image.insert(g.translate(s, v));
    CHECK(image.size() == static_cast<size_t>(g.n_sites()));
    for (int s = 0; s < g.n_sites(); ++s)
        for (int t = 0; t < g.n_sites(); ++t)
            CHECK(g.linf_dist(g.translate(s, v), g.translate(t, v)) == g.linf_dist(s, t));
}

TEST_CASE("box boundary counts match the closed form in d=1,2") {
    BoxGeom b1 = BoxGeom::make(1, 4);
    CHECK(b1.n_sites() == 9);
    CHECK(b1.interior_boundary().size() == 2);
    CHECK(b1.edge_boundary_size() == 2);

    BoxGeom b2 = BoxGeom::make(2, 2);
    CHECK(b2.n_sites() == 25);
    CHECK(b2.interior_boundary().size() == 16);
    CHECK(b2.edge_boundary_size() == 4 * 5);
    CHECK(b2.exterior_boundary_size() == 4 * 5);  // face-adjacent outside sites
}

TEST_CASE("box lattice folds the boundary condition into missing counts") {
    BoxGeom b = BoxGeom::make(1, 1);  // 3 sites
    Lattice lat = b.lattice(-1);
    std::vector<int8_t> s(3, 1);
    // middle site has both neighbours inside
    CHECK(lat.neighbour_sum(s, 1) == 2);
    // edge sites see one inside spin and the bc spin
    CHECK(lat.neighbour_sum(s, 0) == 1 - 1);
    CHECK(lat.neighbour_sum(s, 2) == 1 - 1);
}

TEST_CASE("coarse blocks partition the torus into cubes of side 2L+1") {
    TorusGeom g = TorusGeom::make(2, 3);  // side 6
    CoarseLattice c = CoarseLattice::make(g, 1);
    CHECK(c.K() == 2);
    CHECK(c.n_blocks() == 4);
    std::vector<int> count(c.n_blocks(), 0);
    for (int s = 0; s < g.n_sites(); ++s) ++count[c.block_of(s)];
    for (int v : count) CHECK(v == 9);
    for (int b = 0; b < c.n_blocks(); ++b) {
        std::vector<int> bs = c.block_sites(b);
        CHECK(bs.size() == 9);
        for (int s : bs) {
            CHECK(c.block_of(s) == b);
            CHECK(g.linf_dist(s, c.center_site(b)) <= 1);
        }
    }
}

TEST_CASE("coarsen inverts fine_sites") {
    TorusGeom g = TorusGeom::make(2, 3);
    CoarseLattice c = CoarseLattice::make(g, 1);
    std::vector<int> blocks{0, 3};
    std::vector<int> fine = c.fine_sites(blocks);
    CHECK(fine.size() == 18);
    CHECK(c.coarsen(fine) == blocks);
}

TEST_CASE("star neighbourhood has 3^d - 1 members, axis neighbourhood 2d") {
    TorusGeom g = TorusGeom::make(2, 4);  // side 8 -> K=2... need K>=3 for distinct
    CoarseLattice c = CoarseLattice::make(TorusGeom::make(2, 4), 0);  // K = 8
    CHECK(c.star_neighbours(0).size() == 8);
    CHECK(c.axis_neighbours(0).size() == 4);
    (void)g;
}

TEST_CASE("space-time graph degrees and lags") {
    CoarseLattice c = CoarseLattice::make(TorusGeom::make(2, 6), 1);  // K = 4
    SpaceTimeGraph st = SpaceTimeGraph::make(c, 4);
    CHECK(st.n_vertices() == 4 * c.n_blocks());
    CHECK(st.max_degree() <= 3 * 3 * 3 - 1);
    CHECK(st.eps() == doctest::Approx(epsilon0(2)));
    // interior vertex: 8 same-layer + 2*9 diagonal/vertical per adjacent layer
    int v = st.vertex(9, 1);
    CHECK(st.neighbours(v).size() == 8 + 9 + 9);
    CHECK(st.lag(st.vertex(0, 3)) == doctest::Approx(3 * st.time_step()));
}

TEST_CASE("eps override changes the time step only") {
    CoarseLattice c = CoarseLattice::make(TorusGeom::make(2, 3), 1);
    SpaceTimeGraph a = SpaceTimeGraph::make(c, 3);
    SpaceTimeGraph b = SpaceTimeGraph::make(c, 3, 0.5);
    CHECK(b.eps() == 0.5);
    CHECK(b.time_step() == doctest::Approx(0.5 * 1));
    CHECK(a.n_vertices() == b.n_vertices());
    for (int v = 0; v < a.n_vertices(); ++v) CHECK(a.neighbours(v) == b.neighbours(v));
}
