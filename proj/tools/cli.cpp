// Experiment runner. Every subcommand reads a JSON config, writes a headered
// CSV plus a JSON summary (config echoed back) into --out, and is
// byte-reproducible for a fixed (config, seed) regardless of --workers.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iperc/coarsegrain.hpp"
#include "iperc/fkfield.hpp"
#include "iperc/infoperc.hpp"
#include "iperc/oracle.hpp"
#include "iperc/parallel.hpp"
#include "iperc/polymer.hpp"
#include "iperc/rng.hpp"

using nlohmann::json;
using namespace iperc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct Ctx {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 1;
    int workers = 1;

    std::string config_text;
    json cfg;
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void load_config(Ctx& c) {
    std::ifstream in(c.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + c.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    c.config_text = ss.str();
    c.cfg = json::parse(c.config_text);
}

void write_file(const Ctx& c, const std::string& name, const std::string& body) {
    std::string path = c.out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
}

void write_summary(const Ctx& c, const std::string& name, json j) {
    j["config"] = c.cfg;
    j["config_text"] = c.config_text;
    j["seed"] = c.seed;
    write_file(c, name + ".json", j.dump(2) + "\n");
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) {
        for (size_t i = 0; i < header.size(); ++i) row_ += (i ? "," : "") + header[i];
        row_ += "\n";
    }
    void add(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) row_ += (i ? "," : "") + cells[i];
        row_ += "\n";
    }
    const std::string& str() const { return row_; }

private:
    std::string row_;
};

json fit_json(const ExpFit& f) {
    return {{"rate", f.rate},
            {"rate_se", f.rate_se},
            {"rate_ci_low", f.rate_ci_low()},
            {"rate_ci_high", f.rate_ci_high()},
            {"log_prefactor", f.log_prefactor},
            {"points_used", f.points_used},
            {"degenerate", f.degenerate}};
}

ModelParams params_of(const json& cfg) {
    return {cfg.at("beta").get<double>(), cfg.value("h", 0.0)};
}

// ---- subcommands -----------------------------------------------------------

int run_sup_decay(const Ctx& c) {
    const json& cfg = c.cfg;
    TorusGeom geom = TorusGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
    Lattice lat = geom.lattice();
    ModelParams p = params_of(cfg);
    double t = cfg.value("t", 0.0);
    std::vector<double> grid = cfg.at("t_prime_grid").get<std::vector<double>>();
    long replicas = cfg.at("replicas").get<long>();

    DecayFit fit = estimate_sup_decay(lat, p, t, grid, replicas, c.seed, c.workers);

    Csv csv({"t_prime", "replicas", "nonempty", "p_hat", "se"});
    for (size_t i = 0; i < fit.t_prime.size(); ++i)
        csv.add({fmt(fit.t_prime[i]), std::to_string(fit.n_replicas[i]),
                 std::to_string(fit.n_nonempty[i]), fmt(fit.p_hat[i]), fmt(fit.se[i])});
    write_file(c, "sup_decay.csv", csv.str());
    write_summary(c, "sup_decay", {{"fit", fit_json(fit.fit)}});
    return 0;
}

int run_kupd_tail(const Ctx& c) {
    const json& cfg = c.cfg;
    TorusGeom geom = TorusGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
    CoarseLattice coarse = CoarseLattice::make(geom, cfg.at("L").get<int>());
    ModelParams p = params_of(cfg);
    std::vector<int> V = cfg.at("V_blocks").get<std::vector<int>>();
    long replicas = cfg.at("replicas").get<long>();
    double t_max = cfg.value("t_max", 200.0);
    double eps = cfg.value("eps", -1.0);

    ContainmentReport rep =
        kupd_coarse_containment(coarse, p, V, replicas, c.seed, t_max, eps, c.workers);

    Csv csv({"m", "p_hat", "se"});
    for (size_t i = 0; i < rep.tail.m.size(); ++i)
        csv.add({fmt(rep.tail.m[i]), fmt(rep.tail.p_hat[i]), fmt(rep.tail.se[i])});
    write_file(c, "kupd_tail.csv", csv.str());
    write_summary(c, "kupd_tail",
                  {{"replicas", rep.replicas},
                   {"coupled", rep.coupled},
                   {"censored", rep.censored},
                   {"truncated", rep.truncated},
                   {"coarse_violations", rep.coarse_violations},
                   {"fine_violations", rep.fine_violations},
                   {"proj_bound_violations", rep.proj_bound_violations},
                   {"subset_violations", rep.subset_violations},
                   {"fit", fit_json(rep.tail.fit)}});
    if (rep.coarse_violations || rep.proj_bound_violations || rep.subset_violations)
        return kExitInvariant;
    return 0;
}

int run_domination(const Ctx& c) {
    const json& cfg = c.cfg;
    TorusGeom geom = TorusGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
    CoarseLattice coarse = CoarseLattice::make(geom, cfg.at("L").get<int>());
    SpaceTimeGraph graph =
        SpaceTimeGraph::make(coarse, cfg.at("layers").get<int>(), cfg.value("eps", -1.0));
    ModelParams p = params_of(cfg);
    long replicas = cfg.at("replicas").get<long>();
    long min_class = cfg.value("min_class_count", 20L);

    DominationReport rep = domination_check(graph, p, replicas, c.seed, min_class, c.workers);

    Csv csv({"m", "painted", "painted_se", "bernoulli", "bernoulli_se"});
    for (size_t i = 0; i < rep.m_grid.size(); ++i)
        csv.add({fmt(rep.m_grid[i]), fmt(rep.painted_tail[i]), fmt(rep.painted_se[i]),
                 fmt(rep.bern_tail[i]), fmt(rep.bern_se[i])});
    write_file(c, "domination.csv", csv.str());
    write_summary(c, "domination",
                  {{"p_hat", rep.p_hat},
                   {"unconditional", rep.unconditional},
                   {"classes_used", rep.classes_used},
                   {"classes_insufficient", rep.classes_insufficient},
                   {"tail_ok", rep.tail_ok}});
    return 0;
}

int run_polymer_identity(const Ctx& c) {
    const json& cfg = c.cfg;
    int n_enc = cfg.value("n_encodings", 100);
    int n_sites = cfg.value("n_sites", 6);
    int n_funcs = cfg.value("n_functions", 4);
    double tol = cfg.value("tolerance", 1e-10);

    Csv csv({"index", "lhs", "rhs", "residual"});
    double max_res = 0;
    for (int i = 0; i < n_enc; ++i) {
        uint64_t s = mix_seed(c.seed, 41, i);
        DependencyEncoding enc = random_block_encoding(n_sites, s);
        enc.validate();
        Rng rng(mix_seed(s, 42));
        std::vector<LocalFunction> fs;
        for (int f = 0; f < n_funcs; ++f) {
            LocalFunction lf;
            int sz = 1 + static_cast<int>(rng.next_below(3));
            while (static_cast<int>(lf.support.size()) < sz) {
                int v = static_cast<int>(rng.next_below(n_sites));
                if (std::find(lf.support.begin(), lf.support.end(), v) == lf.support.end())
                    lf.support.push_back(v);
            }
            std::sort(lf.support.begin(), lf.support.end());
            lf.table.resize(size_t{1} << lf.support.size());
            for (auto& t : lf.table) t = 0.25 + 1.5 * rng.next_double();
            fs.push_back(std::move(lf));
        }
        IdentityCheck chk = verify_polymer_identity(enc, fs);
        max_res = std::max(max_res, chk.residual);
        csv.add({std::to_string(i), fmt(chk.lhs), fmt(chk.rhs), fmt(chk.residual)});
    }
    write_file(c, "polymer_identity.csv", csv.str());
    write_summary(c, "polymer_identity",
                  {{"n_encodings", n_enc}, {"max_residual", max_res}, {"tolerance", tol}});
    return max_res < tol ? 0 : kExitInvariant;
}

int run_pressure_series(const Ctx& c) {
    const json& cfg = c.cfg;
    TorusGeom geom = TorusGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
    CoarseLattice coarse = CoarseLattice::make(geom, cfg.at("L").get<int>());
    BlockEnergy be = BlockEnergy::make(coarse);
    ModelParams p = params_of(cfg);
    double z = cfg.at("z").get<double>();
    long replicas = cfg.at("replicas").get<long>();

    PressureSeries ps = pressure_perturbation(be, p, z, cfg.value("n_max", 3),
                                              cfg.value("c_max", 2), replicas, c.seed,
                                              cfg.value("t_max", 200.0), c.workers);

    Csv csv({"polymer", "size", "weight", "weight_se"});
    for (size_t i = 0; i < ps.polymers.size(); ++i)
        csv.add({std::to_string(i), std::to_string(ps.polymers[i].size()),
                 fmt(ps.weight_mean[i]), fmt(ps.weight_se[i])});
    write_file(c, "pressure_series.csv", csv.str());
    json per_order = json::array();
    for (const auto& o : ps.expansion.per_order) per_order.push_back(o.real());
    write_summary(c, "pressure_series",
                  {{"z", z},
                   {"first_order", ps.first_order},
                   {"first_order_se", ps.first_order_se},
                   {"series", ps.series},
                   {"series_se", ps.series_se},
                   {"per_order", per_order},
                   {"used", ps.used},
                   {"censored", ps.censored}});
    return 0;
}

int run_fk_relax(const Ctx& c) {
    const json& cfg = c.cfg;
    ModelParams p = params_of(cfg);
    RelaxGapReport rep = relax_gap_1d(p, cfg.value("n_max", 30));

    Csv csv({"N", "m_plus", "m_free", "m_minus"});
    for (size_t i = 0; i < rep.N.size(); ++i)
        csv.add({std::to_string(rep.N[i]), fmt(rep.m_plus[i]), fmt(rep.m_free[i]),
                 fmt(rep.m_minus[i])});
    write_file(c, "fk_relax.csv", csv.str());
    write_summary(c, "fk_relax",
                  {{"ordered", rep.ordered},
                   {"fit_plus_minus", fit_json(rep.fit_pm)},
                   {"fit_plus_free", fit_json(rep.fit_pf)},
                   {"fit_free_minus", fit_json(rep.fit_fm)}});
    return rep.ordered ? 0 : kExitInvariant;
}

int run_crossing(const Ctx& c) {
    const json& cfg = c.cfg;
    BoxGeom box = BoxGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
    FkGraph g = box_with_boundary(box);
    ModelParams p = params_of(cfg);
    int target = cfg.value("target", 0);
    long replicas = cfg.at("replicas").get<long>();

    CrossingEstimate ce =
        crossing_prob(g, p, target, replicas, c.seed, cfg.value("t_max", 200.0), c.workers);

    Csv csv({"estimator", "value", "se", "samples"});
    csv.add({"rejection", fmt(ce.rejection), fmt(ce.rejection_se), std::to_string(ce.accepted)});
    csv.add({"reweight", fmt(ce.reweight), fmt(ce.reweight_se), std::to_string(ce.used)});
    write_file(c, "crossing.csv", csv.str());
    write_summary(c, "crossing",
                  {{"rejection", ce.rejection},
                   {"rejection_se", ce.rejection_se},
                   {"accepted", ce.accepted},
                   {"reweight", ce.reweight},
                   {"reweight_se", ce.reweight_se},
                   {"used", ce.used},
                   {"censored", ce.censored},
                   {"agree", ce.agree}});
    return 0;
}

int run_oracle(const Ctx& c) {
    const json& cfg = c.cfg;
    ModelParams p = params_of(cfg);
    std::string mode = cfg.at("mode").get<std::string>();
    Csv csv({"quantity", "value"});
    json out;
    if (mode == "torus") {
        TorusGeom geom = TorusGeom::make(cfg.at("d").get<int>(), cfg.at("N").get<int>());
        IsingInstance inst = torus_instance(geom, p);
        double lz = exact_log_partition(inst);
        double bs = bond_sum_expectation(inst);
        csv.add({"log_partition", fmt(lz)});
        csv.add({"bond_sum", fmt(bs)});
        out = {{"log_partition", lz}, {"bond_sum", bs}};
    } else if (mode == "pressure_1d") {
        double psi = transfer_pressure_1d(p);
        csv.add({"pressure", fmt(psi)});
        out = {{"pressure", psi}};
    } else if (mode == "onsager") {
        OnsagerResult r = onsager_pressure(p.beta);
        csv.add({"pressure", fmt(r.value)});
        out = {{"pressure", r.value}, {"converged", r.converged}};
    } else if (mode == "magnetization_1d") {
        int N = cfg.at("N").get<int>();
        int bc = cfg.value("bc", 0);
        Boundary b = bc > 0 ? Boundary::Plus : bc < 0 ? Boundary::Minus : Boundary::Free;
        double m = magnetization_1d(N, p, b);
        csv.add({"magnetization", fmt(m)});
        out = {{"magnetization", m}};
    } else {
        throw std::runtime_error("unknown oracle mode: " + mode);
    }
    write_file(c, "oracle.csv", csv.str());
    write_summary(c, "oracle", out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"information-percolation experiment runner"};
    app.require_subcommand(1);
    Ctx ctx;

    std::vector<std::pair<std::string, int (*)(const Ctx&)>> cmds = {
        {"sup-decay", run_sup_decay},     {"kupd-tail", run_kupd_tail},
        {"domination", run_domination},   {"polymer-identity", run_polymer_identity},
        {"pressure-series", run_pressure_series}, {"fk-relax", run_fk_relax},
        {"crossing", run_crossing},       {"oracle", run_oracle}};

    int (*chosen)(const Ctx&) = nullptr;
    for (auto& [name, fn] : cmds) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", ctx.config_path)->required();
        sub->add_option("--seed", ctx.seed);
        sub->add_option("--out", ctx.out_dir);
        sub->add_option("--workers", ctx.workers);
        int (*f)(const Ctx&) = fn;
        sub->callback([&chosen, f] { chosen = f; });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        load_config(ctx);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    try {
        return chosen(ctx);
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
