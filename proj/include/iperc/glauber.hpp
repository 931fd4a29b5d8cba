#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/updates.hpp"

namespace iperc {

struct ModelParams {
    double beta = 0;
    double h = 0;
};

// +/-1 configuration with an optional boundary tag for box geometries.
enum class Boundary { Free = 0, Plus = 1, Minus = -1 };

struct SpinConfig {
    std::vector<int8_t> s;
    Boundary bc = Boundary::Free;

    static SpinConfig constant(int n, int8_t v, Boundary bc = Boundary::Free) {
        SpinConfig c;
        c.s.assign(n, v);
        c.bc = bc;
        return c;
    }
};

// Heat-bath update: +1 iff mark < (1 + e^{-2 beta A - 2 h})^{-1}.
inline int8_t flip(const ModelParams& p, int neighbour_sum, double mark) {
    double thr = 1.0 / (1.0 + std::exp(-2.0 * p.beta * neighbour_sum - 2.0 * p.h));
    return mark < thr ? int8_t{1} : int8_t{-1};
}

// Deterministic trajectory: applies the events of `real` with time in
// [-t_from, -t_upto] in increasing time order to `eta`.
SpinConfig evolve(const Lattice& lat, const UpdateRealization& real, const ModelParams& p,
                  const SpinConfig& eta, double t_from, double t_upto = 0.0);

inline SpinConfig evolve(const Lattice& lat, const UpdateRealization& real, const ModelParams& p,
                         const SpinConfig& eta) {
    return evolve(lat, real, p, eta, real.window, 0.0);
}

// Extremal coupling: trajectories from all-plus and all-minus on the same
// realization. The monotone flip rule keeps top >= bottom pointwise.
std::pair<SpinConfig, SpinConfig> evolve_extremal(const Lattice& lat, const UpdateRealization& real,
                                                  const ModelParams& p, double t_from,
                                                  double t_upto = 0.0);

}  // namespace iperc
