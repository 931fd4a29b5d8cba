#include "iperc/updates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace iperc {

namespace {

// Draw the events of site `site` in the epoch [-(k+1), -k]. The stream is a
// pure function of (seed, site, k). Extra draws past the nominal ones are
// used only to regenerate colliding times.
struct EpochDraw {
    std::vector<double> times;  // descending within the epoch
    std::vector<double> marks;
    Rng rng;

    EpochDraw(uint64_t seed, int site, int epoch)
        : rng(mix_seed(seed, static_cast<uint64_t>(site) + 1, static_cast<uint64_t>(epoch) + 1)) {
        int n = rng.next_poisson1();
        times.resize(n);
        marks.resize(n);
        for (int i = 0; i < n; ++i) times[i] = -(epoch + rng.next_double());
        for (int i = 0; i < n; ++i) marks[i] = rng.next_double();
        std::sort(times.begin(), times.end());
    }
};

}  // namespace

std::pair<size_t, size_t> UpdateRealization::range(double t_hi, double t_lo) const {
    auto lo = std::lower_bound(events.begin(), events.end(), -t_hi,
                               [](const UpdateEvent& e, double t) { return e.time < t; });
    auto hi = std::upper_bound(events.begin(), events.end(), -t_lo,
                               [](double t, const UpdateEvent& e) { return t < e.time; });
    return {static_cast<size_t>(lo - events.begin()), static_cast<size_t>(hi - events.begin())};
}

UpdateRealization sample_updates(int n_sites, double window, uint64_t seed) {
    if (n_sites < 1) throw std::invalid_argument("n_sites must be >= 1");
    if (window < 0) throw std::invalid_argument("window length must be >= 0");
    UpdateRealization real;
    real.n_sites = n_sites;
    real.window = window;
    real.seed = seed;
    int epochs = static_cast<int>(std::ceil(window));
    for (int k = 0; k < epochs; ++k) {
        for (int s = 0; s < n_sites; ++s) {
            EpochDraw draw(seed, s, k);
            for (size_t i = 0; i < draw.times.size(); ++i) {
                if (draw.times[i] >= -window)
                    real.events.push_back({draw.times[i], s, draw.marks[i]});
            }
        }
    }
    std::sort(real.events.begin(), real.events.end(),
              [](const UpdateEvent& a, const UpdateEvent& b) { return a.time < b.time; });
    // Ties across the whole realization have probability ~0 at double
    // precision; if one occurs, regenerate the later event's time from its
    // epoch stream continuation.
    for (size_t pass = 0; pass < 8; ++pass) {
        bool collision = false;
        for (size_t i = 1; i < real.events.size(); ++i) {
            if (real.events[i].time == real.events[i - 1].time) {
                collision = true;
                UpdateEvent& e = real.events[i];
                int k = static_cast<int>(std::floor(-e.time));
                Rng extra(mix_seed(seed ^ 0x5bd1e995u, static_cast<uint64_t>(e.site) + 1,
                                   static_cast<uint64_t>(k) + pass + 1));
                e.time = std::max(-(k + extra.next_double()), -real.window);
            }
        }
        if (!collision) break;
        std::sort(real.events.begin(), real.events.end(),
                  [](const UpdateEvent& a, const UpdateEvent& b) { return a.time < b.time; });
    }
    return real;
}

UpdateRealization extend_backward(const UpdateRealization& real, double new_window) {
    if (new_window < real.window) throw std::invalid_argument("can only extend backward");
    if (real.synthetic) throw std::invalid_argument("synthetic realization cannot be extended");
    if (new_window == real.window) return real;
    return sample_updates(real.n_sites, new_window, real.seed);
}

UpdateRealization realization_from_events(int n_sites, double window,
                                          std::vector<UpdateEvent> events) {
    UpdateRealization real;
    real.n_sites = n_sites;
    real.window = window;
    real.synthetic = true;
    std::sort(events.begin(), events.end(),
              [](const UpdateEvent& a, const UpdateEvent& b) { return a.time < b.time; });
    for (size_t i = 0; i < events.size(); ++i) {
        const UpdateEvent& e = events[i];
        if (e.site < 0 || e.site >= n_sites) throw std::invalid_argument("event site out of range");
        if (e.time < -window || e.time > 0) throw std::invalid_argument("event time outside window");
        if (e.mark < 0 || e.mark > 1) throw std::invalid_argument("mark outside [0,1]");
        if (i > 0 && e.time == events[i - 1].time)
            throw std::invalid_argument("duplicate event time");
    }
    real.events = std::move(events);
    return real;
}

std::string dump_realization_json(const UpdateRealization& real) {
    nlohmann::json j;
    j["n_sites"] = real.n_sites;
    j["window"] = real.window;
    j["seed"] = real.seed;
    j["synthetic"] = real.synthetic;
    auto& ev = j["events"] = nlohmann::json::array();
    for (const UpdateEvent& e : real.events) ev.push_back({e.site, e.time, e.mark});
    return j.dump();
}

UpdateRealization load_realization_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<UpdateEvent> events;
    for (const auto& t : j.at("events"))
        events.push_back({t.at(1).get<double>(), t.at(0).get<int>(), t.at(2).get<double>()});
    UpdateRealization real = realization_from_events(j.at("n_sites").get<int>(),
                                                     j.at("window").get<double>(), std::move(events));
    real.seed = j.value("seed", 0ULL);
    real.synthetic = j.value("synthetic", true);
    return real;
}

}  // namespace iperc
