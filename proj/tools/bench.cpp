// Compares the serial reference path (workers = 1) against the OpenMP path on
// the replica-parallel kernels, asserting identical aggregated output and
// reporting timings.

#include <chrono>
#include <cstdio>
#include <vector>

#include "iperc/coarsegrain.hpp"
#include "iperc/infoperc.hpp"
#include "iperc/oracle.hpp"
#include "iperc/parallel.hpp"

using namespace iperc;

namespace {

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool close_bits(double a, double b) { return a == b; }

int check(const char* name, bool same, double t1, double tp, int workers) {
    std::printf("%-22s serial %7.2fs  workers=%d %7.2fs  speedup %4.2fx  %s\n", name, t1, workers,
                tp, tp > 0 ? t1 / tp : 0.0, same ? "identical" : "MISMATCH");
    return same ? 0 : 1;
}

}  // namespace

int main() {
    int failures = 0;
    const int workers = default_workers();
    std::printf("replica kernels, serial reference vs OpenMP (%d workers)\n\n", workers);

    {
        TorusGeom geom = TorusGeom::make(2, 3);
        Lattice lat = geom.lattice();
        ModelParams p{0.2, 0.0};
        std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5};
        double t0 = now();
        DecayFit a = estimate_sup_decay(lat, p, 1.0, grid, 20000, 7, 1);
        double t1 = now();
        DecayFit b = estimate_sup_decay(lat, p, 1.0, grid, 20000, 7, workers);
        double t2 = now();
        bool same = a.n_nonempty == b.n_nonempty && close_bits(a.fit.rate, b.fit.rate);
        failures += check("sup-decay", same, t1 - t0, t2 - t1, workers);
    }

    {
        TorusGeom geom = TorusGeom::make(2, 3);
        CoarseLattice coarse = CoarseLattice::make(geom, 1);
        ModelParams p{0.2, 0.0};
        double t0 = now();
        ContainmentReport a = kupd_coarse_containment(coarse, p, {0}, 2000, 11, 200.0, -1, 1);
        double t1 = now();
        ContainmentReport b =
            kupd_coarse_containment(coarse, p, {0}, 2000, 11, 200.0, -1, workers);
        double t2 = now();
        bool same = a.coupled == b.coupled && a.truncated == b.truncated &&
                    a.coarse_violations == b.coarse_violations &&
                    a.tail.p_hat == b.tail.p_hat && close_bits(a.tail.fit.rate, b.tail.fit.rate);
        failures += check("kupd-containment", same, t1 - t0, t2 - t1, workers);
    }

    {
        TorusGeom geom = TorusGeom::make(2, 2);
        IsingInstance inst = torus_instance(geom, {0.35, 0.1});
        double t0 = now();
        double a = exact_log_partition(inst, 1);
        double t1 = now();
        double b = exact_log_partition(inst, workers);
        double t2 = now();
        failures += check("exact-enumeration", close_bits(a, b), t1 - t0, t2 - t1, workers);
    }

    if (failures) {
        std::printf("\n%d kernel(s) diverged between paths\n", failures);
        return 1;
    }
    std::printf("\nall parallel kernels match the serial reference\n");
    return 0;
}
