#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "iperc/geometry.hpp"
#include "iperc/glauber.hpp"

namespace iperc {

// A finite Ising instance: coupling beta on explicit edges, per-site fields
// (boundary conditions are folded into the fields).
struct IsingInstance {
    double beta = 0;
    std::vector<double> field;
    std::vector<std::pair<int, int>> edges;

    int n() const { return static_cast<int>(field.size()); }
};

IsingInstance torus_instance(const TorusGeom& g, const ModelParams& p);
IsingInstance box_instance(const BoxGeom& g, const ModelParams& p, Boundary bc);
IsingInstance graph_instance(int n, std::vector<std::pair<int, int>> edges, const ModelParams& p);

// log Z by Gray-code enumeration; instances capped at 25 sites.
double exact_log_partition(const IsingInstance& inst, int workers = 1);

// <obs> under the Gibbs measure of the instance.
double exact_expectation(const IsingInstance& inst,
                         const std::function<double(const std::vector<int8_t>&)>& obs,
                         int workers = 1);

double spin_product_expectation(const IsingInstance& inst, const std::vector<int>& sites,
                                int workers = 1);
double bond_sum_expectation(const IsingInstance& inst, int workers = 1);

// Full distribution over configurations (n <= 16), indexed by the bitmask of
// +1 spins.
std::vector<double> exact_distribution(const IsingInstance& inst);

// Pressure of the 1d chain (largest transfer eigenvalue).
double transfer_pressure_1d(const ModelParams& p);

// <sigma_0> on the segment [-N, N] with the given boundary condition, by
// transfer matrix. Valid for any N.
double magnetization_1d(int N, const ModelParams& p, Boundary bc);

// log Z of the 2N-site ring by transfer-matrix trace (d = 1 torus).
double ring_log_partition_1d(int two_n, const ModelParams& p);

// Onsager's d=2, h=0 pressure, by quadrature of the closed form.
struct OnsagerResult {
    double value = 0;
    bool converged = false;
};
OnsagerResult onsager_pressure(double beta);

}  // namespace iperc
