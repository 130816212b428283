// kerrlab: command-line front end.
//
// Exit status: 0 success, 1 usage or validation error, 2 runtime failure
// (including an oracle check that misses its tolerances).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kerr/config.hpp"
#include "kerr/io.hpp"
#include "kerr/lindblad.hpp"
#include "kerr/lyapunov.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/meanfield.hpp"
#include "kerr/stats.hpp"
#include "kerr/sweep.hpp"

namespace fs = std::filesystem;
using namespace kerr;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool quiet = false;
    std::optional<double> A, T;
    std::optional<int> N, M_r;
    std::optional<double> transient, measure;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "configuration file (key = value)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", c.quiet, "suppress the JSON summary");
}

void add_point(CLI::App* sub, Common& c) {
    sub->add_option("--A", c.A, "drive amplitude");
    sub->add_option("--T", c.T, "drive period");
    sub->add_option("--N", c.N, "Fock truncation");
    sub->add_option("--runs", c.M_r, "trajectories (M_r)");
    sub->add_option("--transient-periods", c.transient, "transient length in periods");
    sub->add_option("--measure-periods", c.measure, "measurement length in periods");
}

// Single-point commands read the first grid entries of the config; flags
// override individual values. Without a config the grids come from --A/--T.
SweepSpec load_spec(const Common& c, bool need_point) {
    SweepSpec s;
    if (!c.config.empty()) {
        s = parse_config(read_file(c.config));
    } else if (need_point) {
        if (!c.A || !c.T) throw ValidationError("either --config or both --A and --T are required");
    }
    if (c.A) s.A_grid = {*c.A};
    if (c.T) s.T_grid = {*c.T};
    if (c.N) s.N = *c.N;
    if (c.M_r) s.M_r = *c.M_r;
    if (c.transient) s.t_transient_periods = *c.transient;
    if (c.measure) s.t_measure_periods = *c.measure;
    if (c.seed) s.master_seed = *c.seed;
    if (need_point) {
        s.A_grid.resize(1);
        s.T_grid.resize(1);
    }
    validate(s);
    return s;
}

void emit(const Common& c, const json& j) {
    if (!c.quiet) std::cout << j.dump(2) << std::endl;
}

int cmd_trajectory(const Common& c, std::uint64_t traj) {
    SweepSpec s = load_spec(c, true);
    PointSetup ps = resolve_point(s, 0, 0);
    ps.trajectory.trajectory_index = traj;
    ps.trajectory.record_n_series = true;
    ps.trajectory.n_series_stride = static_cast<int>(std::max<std::int64_t>(1, grid_steps(0.5 * ps.params.T, ps.trajectory.resolved_dt(ps.params)) / 10));
    const TrajectoryRecord rec = run_trajectory(ps.params, ps.trajectory);
    json j = {{"command", "trajectory"},
              {"params", to_json(ps.params)},
              {"dt", rec.dt},
              {"trajectory_index", traj},
              {"jumps", rec.jump_times.size()},
              {"strobe_samples", rec.strobe_xi.size()},
              {"truncation_warning", rec.truncation_warning},
              {"max_top_band_fraction", rec.max_top_band_fraction},
              {"eta_seed", rec.eta_seed},
              {"provenance", provenance_json(config_hash(s), s.master_seed)}};
    if (!c.out.empty()) {
        const fs::path o = c.out;
        write_file_atomic(o / "jumps.csv", to_text([&](std::ostream& os) { write_jumps_csv(os, rec); }));
        write_file_atomic(o / "strobe.csv", to_text([&](std::ostream& os) { write_strobe_csv(os, rec); }));
        write_file_atomic(o / "n_series.csv", to_text([&](std::ostream& os) { write_n_series_csv(os, rec); }));
        write_file_atomic(o / "meta.json", j.dump(2) + "\n");
    }
    emit(c, j);
    return 0;
}

int cmd_lyapunov(const Common& c, const std::string& observable) {
    SweepSpec s = load_spec(c, true);
    if (!observable.empty()) s.observable = observable_from_string(observable);
    PointSetup ps = resolve_point(s, 0, 0);
    ps.lyapunov.threads = c.threads;
    const LyapunovResult lr = quantum_lyapunov(ps.params, ps.trajectory, ps.lyapunov);
    json j = to_json(lr);
    j["command"] = "lyapunov";
    j["params"] = to_json(ps.params);
    j["observable"] = to_string(ps.lyapunov.observable);
    j["provenance"] = provenance_json(config_hash(s), s.master_seed);
    if (!c.out.empty()) {
        const fs::path o = c.out;
        for (std::size_t k = 0; k < lr.runs.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof name, "run%03zu_resets.csv", k);
            write_file_atomic(o / name, to_text([&](std::ostream& os) { write_lyapunov_csv(os, lr.runs[k]); }));
            std::snprintf(name, sizeof name, "run%03zu_lambda.csv", k);
            write_file_atomic(o / name, to_text([&](std::ostream& os) { write_lambda_series_csv(os, lr.runs[k]); }));
        }
        write_file_atomic(o / "lyapunov.json", j.dump(2) + "\n");
    }
    emit(c, j);
    return 0;
}

int cmd_meanfield(const Common& c, double transient, std::size_t samples) {
    SweepSpec s = load_spec(c, false);
    if (s.A_grid.empty() || s.T_grid.empty()) throw ValidationError("meanfield needs A and T grids");
    json rows = json::array();
    for (std::size_t it = 0; it < s.T_grid.size(); ++it) {
        ModelParams base{s.chi, s.gamma, 0.0, s.T_grid[it], s.N};
        for (double A : s.A_grid) {
            ModelParams p = base;
            p.A = A;
            rows.push_back({{"A", A}, {"T", p.T}, {"lambda_cl", classical_lyapunov(p)}});
        }
        if (!c.out.empty()) {
            BifurcationOptions opt;
            opt.transient_periods = transient;
            opt.samples_per_A = samples;
            opt.seed = derive_seed(s.master_seed, it, 0, StreamTag::point);
            opt.threads = c.threads;
            const auto pts = bifurcation_scan(base, s.A_grid, opt);
            char name[64];
            std::snprintf(name, sizeof name, "bifurcation_T%03zu.csv", it);
            write_file_atomic(fs::path(c.out) / name, to_text([&](std::ostream& os) { write_bifurcation_csv(os, pts); }));
        }
    }
    json j = {{"command", "meanfield"}, {"points", rows}, {"provenance", provenance_json(config_hash(s), s.master_seed)}};
    if (!c.out.empty()) write_file_atomic(fs::path(c.out) / "meanfield.json", j.dump(2) + "\n");
    emit(c, j);
    return 0;
}

int cmd_wtd(const Common& c) {
    SweepSpec s = load_spec(c, true);
    s.tasks = {"wtd"};
    PointArtifacts art = compute_point(s, 0, 0, c.threads);
    art.result["command"] = "wtd";
    if (!c.out.empty()) {
        for (const auto& [name, content] : art.files) write_file_atomic(fs::path(c.out) / name, content);
        write_file_atomic(fs::path(c.out) / "result.json", art.result.dump(2) + "\n");
    }
    emit(c, art.result);
    return 0;
}

int cmd_sweep(const Common& c, bool fresh) {
    if (c.config.empty() || c.out.empty()) throw ValidationError("sweep requires --config and --out");
    SweepSpec s = parse_config(read_file(c.config));
    if (c.seed) s.master_seed = *c.seed;
    SweepOptions opt;
    opt.threads = c.threads;
    opt.resume = !fresh;
    if (!c.quiet)
        opt.progress = [](std::size_t done, std::size_t total, const json& pt) {
            std::cerr << "[" << done << "/" << total << "] A=" << pt.at("A") << " T=" << pt.at("T") << " "
                      << pt.at("status").get<std::string>() << "\n";
        };
    const SweepSummary sum = run_sweep(s, c.out, opt);
    json j = sum.to_json();
    j["command"] = "sweep";
    j["points"] = s.points();
    j["provenance"] = provenance_json(config_hash(s), s.master_seed);
    emit(c, j);
    return 0;
}

int cmd_oracle(const Common& c, const std::vector<std::size_t>& sizes) {
    OracleCheckOptions opt;
    if (c.A) opt.params.A = *c.A;
    if (c.T) opt.params.T = *c.T;
    if (c.N) opt.params.N = *c.N;
    if (c.seed) opt.seed = *c.seed;
    if (!sizes.empty()) opt.ensemble_sizes = sizes;
    opt.threads = c.threads;
    const OracleCheckResult r = oracle_check(opt);
    json j = {{"command", "oracle-check"},
              {"params", to_json(r.params)},
              {"ensemble_sizes", r.ensemble_sizes},
              {"probe_times", r.probe_times},
              {"trace_distance", r.distance},
              {"mean_distance", r.mean_distance},
              {"slope", r.slope},
              {"slope_stderr", r.slope_stderr},
              {"bound_ok", r.bound_ok},
              {"slope_ok", r.slope_ok},
              {"passed", r.passed()}};
    if (!c.out.empty()) write_file_atomic(fs::path(c.out) / "oracle_check.json", j.dump(2) + "\n");
    emit(c, j);
    return r.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven Kerr cavity: quantum trajectories, Lyapunov exponents, waiting-time statistics"};
    app.require_subcommand(1);
    Common c;
    std::uint64_t traj = 0;
    std::string observable;
    double bif_transient = 500.0;
    std::size_t bif_samples = 200;
    bool fresh = false;
    std::vector<std::size_t> sizes;

    auto* t = app.add_subcommand("trajectory", "one MCWF trajectory: jump record and stroboscopic xi");
    add_common(t, c);
    add_point(t, c);
    t->add_option("--trajectory", traj, "trajectory index");

    auto* l = app.add_subcommand("lyapunov", "quantum Lyapunov exponent over M_r pairs");
    add_common(l, c);
    add_point(l, c);
    l->add_option("--observable", observable, "xi or n")->check(CLI::IsMember({"xi", "n"}));

    auto* m = app.add_subcommand("meanfield", "classical exponent and bifurcation tables");
    add_common(m, c);
    m->add_option("--A", c.A, "single drive amplitude");
    m->add_option("--T", c.T, "single drive period");
    m->add_option("--transient", bif_transient, "bifurcation transient in periods");
    m->add_option("--samples", bif_samples, "stroboscopic samples per amplitude");

    auto* w = app.add_subcommand("wtd", "pooled waiting-time distribution and fits");
    add_common(w, c);
    add_point(w, c);

    auto* s = app.add_subcommand("sweep", "parameter-plane sweep with checkpoint/resume");
    add_common(s, c);
    s->add_flag("--fresh", fresh, "recompute points that already have valid results");

    auto* o = app.add_subcommand("oracle-check", "MCWF ensembles against the dense Lindblad solution");
    add_common(o, c);
    o->add_option("--A", c.A, "drive amplitude");
    o->add_option("--T", c.T, "drive period");
    o->add_option("--N", c.N, "Fock truncation (<= 60)");
    o->add_option("--sizes", sizes, "ensemble sizes, increasing")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*t) return cmd_trajectory(c, traj);
        if (*l) return cmd_lyapunov(c, observable);
        if (*m) return cmd_meanfield(c, bif_transient, bif_samples);
        if (*w) return cmd_wtd(c);
        if (*s) return cmd_sweep(c, fresh);
        if (*o) return cmd_oracle(c, sizes);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
