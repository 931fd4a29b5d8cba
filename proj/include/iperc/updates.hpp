#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iperc/rng.hpp"

namespace iperc {

// One clock ring: a site, the (negative) time at which it rings and the
// uniform mark deciding the heat-bath update.
struct UpdateEvent {
    double time = 0;  // in [-t, 0]
    int site = 0;
    double mark = 0;
};

// The per-site Poisson clocks and marks on a window [-t, 0]. Events are drawn
// from streams keyed by (seed, site, epoch) where epochs are the unit
// intervals [-(k+1), -k]; extending the window backward therefore never
// perturbs existing events, which is what coupling-from-the-past requires.
struct UpdateRealization {
    int n_sites = 0;
    double window = 0;      // length t of the window [-t, 0]
    uint64_t seed = 0;
    bool synthetic = false; // built from explicit events; cannot be extended
    std::vector<UpdateEvent> events;  // sorted by increasing time

    // Events with time in [-t_hi, -t_lo], as [first, last) indices into `events`.
    std::pair<size_t, size_t> range(double t_hi, double t_lo) const;
};

UpdateRealization sample_updates(int n_sites, double window, uint64_t seed);

// Same infinite update sequence, longer window. Restriction to the original
// window is bit-exact.
UpdateRealization extend_backward(const UpdateRealization& real, double new_window);

// Explicit event list (validated: times in window, distinct, marks in [0,1]).
UpdateRealization realization_from_events(int n_sites, double window,
                                          std::vector<UpdateEvent> events);

// JSON dump/replay of (site, time, mark) triples.
std::string dump_realization_json(const UpdateRealization& real);
UpdateRealization load_realization_json(const std::string& text);

}  // namespace iperc
