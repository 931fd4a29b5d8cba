#include "iperc/glauber.hpp"

#include <stdexcept>

namespace iperc {

SpinConfig evolve(const Lattice& lat, const UpdateRealization& real, const ModelParams& p,
                  const SpinConfig& eta, double t_from, double t_upto) {
    if (static_cast<int>(eta.s.size()) != lat.n_sites)
        throw std::invalid_argument("configuration does not match lattice");
    if (t_from > real.window + 1e-12) throw std::invalid_argument("window too short for evolve");
    SpinConfig out = eta;
    auto [lo, hi] = real.range(t_from, t_upto);
    for (size_t i = lo; i < hi; ++i) {
        const UpdateEvent& e = real.events[i];
        out.s[e.site] = flip(p, lat.neighbour_sum(out.s, e.site), e.mark);
    }
    return out;
}

std::pair<SpinConfig, SpinConfig> evolve_extremal(const Lattice& lat, const UpdateRealization& real,
                                                  const ModelParams& p, double t_from,
                                                  double t_upto) {
    SpinConfig top = SpinConfig::constant(lat.n_sites, 1);
    SpinConfig bottom = SpinConfig::constant(lat.n_sites, -1);
    return {evolve(lat, real, p, top, t_from, t_upto),
            evolve(lat, real, p, bottom, t_from, t_upto)};
}

}  // namespace iperc
