#include "iperc/coarsegrain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <stdexcept>

#include "iperc/parallel.hpp"
#include "iperc/rng.hpp"

namespace iperc {

double paint_window(const SpaceTimeGraph& graph) {
    return (graph.layers() - 1) * graph.time_step() + 1.5 * graph.time_step();
}

PercolationConfig paint_boxes(const SpaceTimeGraph& graph, const Lattice& lat,
                              const UpdateRealization& real, const ModelParams& p) {
    if (real.window + 1e-12 < paint_window(graph))
        throw std::invalid_argument("realization window too short to classify all layers");
    const CoarseLattice& coarse = graph.coarse();
    PercolationConfig pc{graph, std::vector<char>(graph.n_vertices(), 0)};
    for (int v = 0; v < graph.n_vertices(); ++v) {
        int center = coarse.center_site(graph.block(v));
        bool good = check_block_event(coarse.geom(), lat, real, p, center, graph.lag(v),
                                      coarse.L(), graph.eps());
        pc.open[v] = good ? 0 : 1;
    }
    return pc;
}

PercolationConfig paint_boxes(const SpaceTimeGraph& graph, const ModelParams& p, uint64_t seed) {
    Lattice lat = graph.coarse().geom().lattice();
    UpdateRealization real = sample_updates(lat.n_sites, paint_window(graph), seed);
    return paint_boxes(graph, lat, real, p);
}

ClusterSet clusters(const PercolationConfig& pc, const std::vector<int>& V) {
    const SpaceTimeGraph& g = pc.graph;
    ClusterSet cs;
    cs.seeds = V;
    std::vector<char> in_cluster(g.n_vertices(), 0);
    std::deque<int> queue;
    for (int z : V)
        if (pc.open[z] && !in_cluster[z]) {
            in_cluster[z] = 1;
            queue.push_back(z);
        }
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        cs.cluster.push_back(v);
        if (g.layer(v) == g.layers() - 1) cs.truncated = true;
        for (int w : g.neighbours(v))
            if (pc.open[w] && !in_cluster[w]) {
                in_cluster[w] = 1;
                queue.push_back(w);
            }
    }
    std::sort(cs.cluster.begin(), cs.cluster.end());

    std::vector<char> in_boundary(g.n_vertices(), 0);
    for (int v : cs.cluster)
        for (int w : g.neighbours(v))
            if (!in_cluster[w]) in_boundary[w] = 1;
    for (int z : V)
        if (!pc.open[z]) in_boundary[z] = 1;  // the dC_z = {z} convention
    for (int v = 0; v < g.n_vertices(); ++v)
        if (in_boundary[v]) cs.boundary.push_back(v);

    std::vector<char> proj(g.coarse().n_blocks(), 0), proj_star(g.coarse().n_blocks(), 0);
    auto mark = [&](int vertex, bool star_only) {
        int b = g.block(vertex);
        if (!star_only) proj[b] = 1;
        proj_star[b] = 1;
        for (int w : g.neighbours(vertex)) proj_star[g.block(w)] = 1;
    };
    for (int v : cs.cluster) mark(v, false);
    for (int v : cs.boundary) mark(v, false);
    cs.proj = mask_to_list(proj);
    cs.proj_star = mask_to_list(proj_star);
    return cs;
}

TailEstimate tail_from_sizes(const std::vector<long>& sizes, long m_min, long m_max) {
    TailEstimate t;
    t.n = static_cast<long>(sizes.size());
    if (t.n == 0 || m_max < m_min) return t;
    for (long m = m_min; m <= m_max; ++m) {
        long hits = std::count_if(sizes.begin(), sizes.end(), [&](long s) { return s >= m; });
        double ph = static_cast<double>(hits) / static_cast<double>(t.n);
        t.m.push_back(static_cast<double>(m));
        t.p_hat.push_back(ph);
        t.se.push_back(binomial_se(ph, static_cast<size_t>(t.n)));
    }
    t.fit = fit_exponential(t.m, t.p_hat, t.se);
    return t;
}

ContainmentReport kupd_coarse_containment(const CoarseLattice& coarse, const ModelParams& p,
                                          const std::vector<int>& V_blocks, long replicas,
                                          uint64_t seed, double t_max, double eps,
                                          int workers) {
    if (V_blocks.empty()) throw std::invalid_argument("containment check needs a seed set");
    const TorusGeom& geom = coarse.geom();
    const Lattice lat = geom.lattice();
    const double eps_used = eps > 0 ? eps : epsilon0(geom.d());
    const double dt = eps_used * coarse.L();
    const std::vector<int> v_bar = coarse.fine_sites(V_blocks);

    struct Rep {
        char coupled = 0, truncated = 0;
        char coarse_bad = 0, fine_bad = 0, proj_bad = 0, subset_bad = 0;
        long kl_size = 0;
    };
    std::vector<Rep> reps(replicas);

    for_each_replica(replicas, workers, [&](long r) {
        Rep& rep = reps[r];
        CouplingResult c =
            coupling_time(lat, p, v_bar, 0.0, t_max, mix_seed(seed, static_cast<uint64_t>(r)));
        if (!c.coupled) return;
        rep.coupled = 1;
        std::vector<int> K = kupd_from_coupling(lat, c);

        int layers = std::max(2, static_cast<int>(std::ceil(c.tau / dt)) + 2);
        SpaceTimeGraph stg = SpaceTimeGraph::make(coarse, layers, eps_used);
        UpdateRealization real =
            extend_backward(c.real, std::max(c.real.window, paint_window(stg) + 1e-9));
        PercolationConfig pc = paint_boxes(stg, lat, real, p);

        std::vector<int> seeds;
        for (int b : V_blocks) seeds.push_back(stg.vertex(b, 0));
        ClusterSet cs = clusters(pc, seeds);
        rep.truncated = cs.truncated ? 1 : 0;

        std::vector<int> kl = coarse.coarsen(K);
        rep.kl_size = static_cast<long>(kl.size());

        std::vector<char> star(coarse.n_blocks(), 0), in_proj(coarse.n_blocks(), 0);
        for (int b : cs.proj_star) star[b] = 1;
        for (int b : cs.proj) in_proj[b] = 1;
        for (int b : kl)
            if (!star[b]) rep.coarse_bad = 1;
        const double rad = 1.5 * coarse.L();
        for (int u : K) {
            bool covered = false;
            for (int b : cs.proj)
                if (geom.linf_dist(u, coarse.center_site(b)) <= rad) {
                    covered = true;
                    break;
                }
            if (!covered) {
                rep.fine_bad = 1;
                break;
            }
        }
        long bound = 1;
        for (int k = 0; k < geom.d(); ++k) bound *= 5;
        if (static_cast<long>(cs.proj_star.size()) >
            bound * (static_cast<long>(cs.cluster.size()) + static_cast<long>(V_blocks.size())))
            rep.proj_bad = 1;

        std::vector<char> in_k(lat.n_sites, 0);
        for (int u : K) in_k[u] = 1;
        for (int u : v_bar)
            if (!in_k[u]) rep.subset_bad = 1;
    });

    ContainmentReport out;
    out.replicas = replicas;
    std::vector<long> sizes;
    for (const Rep& rep : reps) {
        if (!rep.coupled) {
            ++out.censored;
            continue;
        }
        ++out.coupled;
        out.coarse_violations += rep.coarse_bad;
        out.fine_violations += rep.fine_bad;
        out.proj_bound_violations += rep.proj_bad;
        out.subset_violations += rep.subset_bad;
        if (rep.truncated)
            ++out.truncated;
        else
            sizes.push_back(rep.kl_size);
    }
    if (!sizes.empty()) {
        long m_max = *std::max_element(sizes.begin(), sizes.end());
        out.tail = tail_from_sizes(sizes, static_cast<long>(V_blocks.size()), m_max);
    }
    return out;
}

namespace {

void grow_animals(const std::vector<std::vector<int>>& adj, int K, std::vector<int>& current,
                  std::vector<int>& ext, std::vector<char>& in_set, std::vector<char>& seen,
                  long& count) {
    if (static_cast<int>(current.size()) == K) {
        ++count;
        return;
    }
    // Take extension candidates one at a time; once a candidate has been
    // explored it is banned for the rest of this branch, which makes every
    // connected set come out exactly once.
    std::vector<int> local = ext;
    while (!local.empty()) {
        int v = local.back();
        local.pop_back();
        std::vector<int> next = local;
        std::vector<int> newly;
        for (int w : adj[v])
            if (!in_set[w] && !seen[w]) {
                seen[w] = 1;
                newly.push_back(w);
                next.push_back(w);
            }
        in_set[v] = 1;
        current.push_back(v);
        grow_animals(adj, K, current, next, in_set, seen, count);
        current.pop_back();
        in_set[v] = 0;
        for (int w : newly) seen[w] = 0;
    }
}

}  // namespace

long count_lattice_animals(const std::vector<std::vector<int>>& adj, int root, int K) {
    if (K < 1 || K > 12) throw std::invalid_argument("animal size must be in [1, 12]");
    std::vector<char> in_set(adj.size(), 0), seen(adj.size(), 0);
    std::vector<int> current{root}, ext;
    in_set[root] = 1;
    seen[root] = 1;
    for (int w : adj[root]) {
        if (!seen[w]) {
            seen[w] = 1;
            ext.push_back(w);
        }
    }
    long count = 0;
    grow_animals(adj, K, current, ext, in_set, seen, count);
    return count;
}

namespace {

long bern_cluster_size(const SpaceTimeGraph& g, const std::vector<char>& open,
                       const std::vector<int>& V) {
    std::vector<char> vis(g.n_vertices(), 0);
    std::deque<int> q;
    long size = 0;
    for (int z : V)
        if (open[z] && !vis[z]) {
            vis[z] = 1;
            q.push_back(z);
        }
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        ++size;
        for (int w : g.neighbours(v))
            if (open[w] && !vis[w]) {
                vis[w] = 1;
                q.push_back(w);
            }
    }
    return size;
}

}  // namespace

BernoulliTail bernoulli_cluster_tail(const SpaceTimeGraph& graph, double prob,
                                     const std::vector<int>& V, long M, long replicas,
                                     uint64_t seed, int workers) {
    if (prob < 0 || prob > 1) throw std::invalid_argument("probability outside [0,1]");
    BernoulliTail out;
    const int n = graph.n_vertices();
    std::vector<char> hit(replicas, 0);
    for_each_replica(replicas, workers, [&](long r) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(r)));
        std::vector<char> open(n);
        for (int v = 0; v < n; ++v) open[v] = rng.next_double() < prob ? 1 : 0;
        hit[r] = bern_cluster_size(graph, open, V) >= M ? 1 : 0;
    });
    long hits = std::count(hit.begin(), hit.end(), char{1});
    out.estimate = static_cast<double>(hits) / static_cast<double>(replicas);
    out.se = binomial_se(out.estimate, static_cast<size_t>(replicas));
    if (n <= 20) {
        out.has_exact = true;
        double total = 0;
        std::vector<char> open(n);
        for (uint32_t mask = 0; mask < (1u << n); ++mask) {
            double w = 1;
            for (int v = 0; v < n; ++v) {
                open[v] = mask >> v & 1u;
                w *= open[v] ? prob : 1 - prob;
            }
            if (w == 0) continue;
            if (bern_cluster_size(graph, open, V) >= M) total += w;
        }
        out.exact = total;
    }
    return out;
}

DominationReport domination_check(const SpaceTimeGraph& graph, const ModelParams& p,
                                  long replicas, uint64_t seed, long min_class_count,
                                  int workers) {
    const CoarseLattice& coarse = graph.coarse();
    // centre vertex: middle block, middle layer
    std::vector<int> cc(coarse.geom().d(), coarse.K() / 2);
    const int z = graph.vertex(coarse.coarse_index(cc), graph.layers() / 2);

    std::vector<int> far;  // vertices at Gamma-distance > 1 from z
    {
        std::vector<char> near(graph.n_vertices(), 0);
        near[z] = 1;
        for (int w : graph.neighbours(z)) near[w] = 1;
        for (int v = 0; v < graph.n_vertices(); ++v)
            if (!near[v]) far.push_back(v);
    }

    struct Rep {
        char bad = 0;
        long csize = 0;
        std::string key;
    };
    std::vector<Rep> reps(replicas);
    for_each_replica(replicas, workers, [&](long r) {
        PercolationConfig pc = paint_boxes(graph, p, mix_seed(seed, 11, static_cast<uint64_t>(r)));
        Rep& rep = reps[r];
        rep.bad = pc.open[z];
        rep.csize = bern_cluster_size(graph, pc.open, {z});
        rep.key.resize(far.size());
        for (size_t i = 0; i < far.size(); ++i) rep.key[i] = pc.open[far[i]] ? '1' : '0';
    });

    DominationReport out;
    std::map<std::string, std::pair<long, long>> classes;  // key -> (count, bad)
    long bad_total = 0;
    std::vector<long> sizes;
    for (const Rep& rep : reps) {
        auto& c = classes[rep.key];
        ++c.first;
        c.second += rep.bad;
        bad_total += rep.bad;
        sizes.push_back(rep.csize);
    }
    out.unconditional = static_cast<double>(bad_total) / static_cast<double>(replicas);
    for (const auto& [key, c] : classes) {
        if (c.first < min_class_count) {
            ++out.classes_insufficient;
            continue;
        }
        ++out.classes_used;
        out.p_hat = std::max(out.p_hat,
                             static_cast<double>(c.second) / static_cast<double>(c.first));
    }
    if (out.classes_used == 0) out.p_hat = out.unconditional;  // flagged via classes_used

    long m_max = std::max<long>(1, *std::max_element(sizes.begin(), sizes.end()));
    for (long m = 1; m <= m_max; ++m) {
        long hits = std::count_if(sizes.begin(), sizes.end(), [&](long s) { return s >= m; });
        double ph = static_cast<double>(hits) / static_cast<double>(replicas);
        double se = binomial_se(ph, static_cast<size_t>(replicas));
        BernoulliTail bt = bernoulli_cluster_tail(graph, out.p_hat, {z}, m, replicas,
                                                  mix_seed(seed, 13), workers);
        out.m_grid.push_back(static_cast<double>(m));
        out.painted_tail.push_back(ph);
        out.painted_se.push_back(se);
        out.bern_tail.push_back(bt.has_exact ? bt.exact : bt.estimate);
        out.bern_se.push_back(bt.has_exact ? 0.0 : bt.se);
        double comb = 3 * std::sqrt(se * se + (bt.has_exact ? 0.0 : bt.se * bt.se));
        if (ph > out.bern_tail.back() + comb) out.tail_ok = false;
    }
    return out;
}

}  // namespace iperc
