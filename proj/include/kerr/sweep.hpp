#pragma once

// Parameter-plane sweep with per-point checkpoint files.
//
//   out/<iA>x<iT>/result.json     one per grid point, written atomically
//   out/<iA>x<iT>/pdf.csv, ws.csv, fit.json, lambda_series.csv
//   out/lambda_map.csv, out/alpha_map.csv, out/sweep.json
//   out/bifurcation_T<iT>.csv
//
// Aggregates are rebuilt from the result files only, so a resumed sweep and
// a fresh one produce identical tables.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "kerr/config.hpp"
#include "kerr/io.hpp"
#include "kerr/lyapunov.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/meanfield.hpp"
#include "kerr/parallel.hpp"
#include "kerr/stats.hpp"

namespace kerr {

class ProvenanceMismatch : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t config_hash(const SweepSpec& s) { return fnv1a64(emit_config(s)); }

/// Refuses to compare artifacts produced from different configurations or
/// code versions.
inline void check_provenance(const json& a, const json& b) {
    const json& pa = a.at("provenance");
    const json& pb = b.at("provenance");
    if (pa.at("config_hash") != pb.at("config_hash"))
        throw ProvenanceMismatch("config hash mismatch: " + pa.at("config_hash").get<std::string>() + " vs " +
                                 pb.at("config_hash").get<std::string>());
    if (pa.at("code_version") != pb.at("code_version"))
        throw ProvenanceMismatch("code version mismatch");
    if (pa.at("master_seed") != pb.at("master_seed")) throw ProvenanceMismatch("master seed mismatch");
}

inline std::string point_dir_name(std::size_t ia, std::size_t it) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zux%03zu", ia, it);
    return buf;
}

/// Fully resolved inputs of one grid point.
struct PointSetup {
    std::size_t ia = 0, it = 0, index = 0;
    ModelParams params;
    TrajectoryConfig trajectory;
    LyapunovConfig lyapunov;
    int M_r = 1;
};

inline PointSetup resolve_point(const SweepSpec& s, std::size_t ia, std::size_t it) {
    PointSetup ps;
    ps.ia = ia;
    ps.it = it;
    ps.index = s.point_index(ia, it);
    PointOverride o;
    if (const auto f = s.overrides.find({ia, it}); f != s.overrides.end()) o = f->second;
    ps.params = ModelParams{s.chi, s.gamma, s.A_grid[ia], s.T_grid[it], o.N.value_or(s.N)};
    ps.params.validate();
    ps.trajectory = TrajectoryConfig::with_periods(ps.params, o.t_transient_periods.value_or(s.t_transient_periods),
                                                   o.t_measure_periods.value_or(s.t_measure_periods));
    const double dt_req = o.dt_override.value_or(s.dt_override);
    if (dt_req > 0.0) {
        ps.trajectory.dt = snap_step(0.5 * ps.params.T, dt_req);
        ps.trajectory.jump_time_tol = 1e-3 * ps.trajectory.dt;
    }
    ps.trajectory.seed = s.master_seed;
    ps.trajectory.point_index = ps.index;
    ps.M_r = o.M_r.value_or(s.M_r);
    ps.lyapunov.runs = ps.M_r;
    ps.lyapunov.observable = s.observable;
    ps.lyapunov.epsilon = s.epsilon;
    ps.lyapunov.delta_0_factor = s.delta_0_factor;
    ps.lyapunov.threads = 1;
    return ps;
}

struct PointArtifacts {
    json result;
    std::vector<std::pair<std::string, std::string>> files;  ///< name, content
};

/// Runs every requested per-point task. Deterministic in (spec, ia, it).
inline PointArtifacts compute_point(const SweepSpec& s, std::size_t ia, std::size_t it, unsigned threads = 1) {
    const PointSetup ps = resolve_point(s, ia, it);
    PointArtifacts art;
    json& r = art.result;
    r["A"] = ps.params.A;
    r["T"] = ps.params.T;
    r["ia"] = ia;
    r["it"] = it;
    r["index"] = ps.index;
    r["params"] = to_json(ps.params);
    r["dt"] = ps.trajectory.resolved_dt(ps.params);
    r["M_r"] = ps.M_r;
    r["t_transient"] = ps.trajectory.t_transient;
    r["t_measure"] = ps.trajectory.t_measure;
    json flags = {{"truncation_warning", false}};

    WaitingTimeSample pooled;
    bool have_jumps = false;
    if (s.has_task("lyapunov")) {
        LyapunovConfig lc = ps.lyapunov;
        lc.threads = threads;
        const LyapunovResult lr = quantum_lyapunov(ps.params, ps.trajectory, lc);
        r["lambda_q"] = lr.lambda;
        r["stderr"] = lr.stderr_;
        r["lyapunov"] = to_json(lr);
        r["observable"] = to_string(lc.observable);
        flags["truncation_warning"] = flags["truncation_warning"].get<bool>() || lr.truncation_warning;
        std::size_t desyncs = 0;
        for (const auto& run : lr.runs) desyncs += run.desyncs;
        flags["lyapunov_desyncs"] = desyncs;
        for (const auto& run : lr.runs) {
            std::vector<double> t, e;
            for (const auto& j : run.fiducial_jumps) {
                t.push_back(j.time);
                e.push_back(j.threshold);
            }
            append_waiting_times(pooled, t, e);
        }
        have_jumps = true;
        std::ostringstream ls;
        ls << "t,lambda\n";
        const auto& ref = lr.runs.front().lambda_times;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            double m = 0.0;
            for (const auto& run : lr.runs) m += run.lambda_series[k];
            ls << fmt_double(ref[k]) << ',' << fmt_double(m / static_cast<double>(lr.runs.size())) << '\n';
        }
        art.files.emplace_back("lambda_series.csv", ls.str());
    }
    if (s.has_task("wtd")) {
        if (!have_jumps) {
            std::vector<TrajectoryRecord> recs(static_cast<std::size_t>(ps.M_r));
            parallel_for(recs.size(), threads, [&](std::size_t j) {
                TrajectoryConfig c = ps.trajectory;
                c.trajectory_index = j;
                recs[j] = run_trajectory(ps.params, c);
            });
            for (const auto& rec : recs)
                if (rec.truncation_warning) flags["truncation_warning"] = true;
            pooled = pool_waiting_times(recs);
        }
        json w;
        w["waiting_times"] = pooled.tau.size();
        if (pooled.tau.size() >= 2) {
            const WtdAnalysis a = analyze_waiting_times(std::move(pooled), s.bins_per_decade);
            w["support_ok"] = a.support_ok;
            w["power_law"] = to_json(a.power_law);
            if (a.sample.tau.size() >= 100) w["exponential"] = to_json(a.exponential);
            w["ws_median"] = a.decay_rates.median;
            w["ws_iqr"] = a.decay_rates.iqr;
            w["ws_broadening"] = a.decay_rates.broadening;
            art.files.emplace_back("pdf.csv", to_text([&](std::ostream& os) { write_pdf_csv(os, a.pdf); }));
            art.files.emplace_back("ws.csv", to_text([&](std::ostream& os) { write_pdf_csv(os, a.decay_rates.pdf); }));
            json fit = to_json(a.power_law);
            fit["provenance"] = provenance_json(config_hash(s), s.master_seed);
            art.files.emplace_back("fit.json", fit.dump(2) + "\n");
        } else {
            w["support_ok"] = false;
            w["power_law"] = to_json(FitResult{});
        }
        r["wtd"] = w;
        r["alpha"] = w["power_law"]["alpha"];
        r["r2"] = w["power_law"]["r2"];
        r["accepted"] = w["power_law"]["accepted"];
    }
    if (s.has_task("meanfield-le")) r["lambda_cl"] = classical_lyapunov(ps.params);
    r["flags"] = flags;
    r["status"] = "ok";
    r["provenance"] = provenance_json(config_hash(s), s.master_seed);
    return art;
}

/// A result file is reusable when it parses, completed, and carries the
/// current config hash and code version.
inline bool valid_result_file(const std::filesystem::path& path, const SweepSpec& s) {
    if (!std::filesystem::exists(path)) return false;
    try {
        const json j = json::parse(read_file(path));
        return j.at("status") == "ok" && j.at("provenance").at("config_hash") == hex64(config_hash(s)) &&
               j.at("provenance").at("code_version") == kCodeVersion;
    } catch (const std::exception&) {
        return false;
    }
}

struct SweepOptions {
    unsigned threads = 1;
    bool resume = true;
    std::function<void(std::size_t done, std::size_t total, const json& point)> progress;
};

struct SweepSummary {
    std::size_t computed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    std::vector<std::size_t> failed_points;
    json to_json() const {
        return {{"computed", computed}, {"skipped", skipped}, {"failed", failed}, {"failed_points", failed_points}};
    }
};

/// Reads all per-point result files in grid order and writes the aggregate
/// tables. Points carrying a foreign config hash abort the build.
inline json build_aggregates(const SweepSpec& s, const std::filesystem::path& out) {
    const std::string hash = hex64(config_hash(s));
    std::ostringstream lam, alp;
    lam << "A,T,lambda_q,stderr\n";
    alp << "A,T,alpha,r2,accepted\n";
    json failed = json::array();
    for (std::size_t ia = 0; ia < s.A_grid.size(); ++ia) {
        for (std::size_t it = 0; it < s.T_grid.size(); ++it) {
            const double A = s.A_grid[ia], T = s.T_grid[it];
            json j;
            const auto path = out / point_dir_name(ia, it) / "result.json";
            if (std::filesystem::exists(path)) j = json::parse(read_file(path));
            if (!j.is_null() && j.at("provenance").at("config_hash") != hash)
                throw ProvenanceMismatch("point " + path.string() + " was produced by a different configuration");
            const bool ok = !j.is_null() && j.at("status") == "ok";
            if (!ok) failed.push_back(s.point_index(ia, it));
            if (s.has_task("lyapunov")) {
                lam << fmt_double(A) << ',' << fmt_double(T) << ','
                    << fmt_double(ok ? get_num(j.at("lambda_q")) : std::nan("")) << ','
                    << fmt_double(ok ? get_num(j.at("stderr")) : std::nan("")) << '\n';
            }
            if (s.has_task("wtd")) {
                const bool acc = ok && j.at("accepted").get<bool>();
                alp << fmt_double(A) << ',' << fmt_double(T) << ','
                    << fmt_double(ok ? get_num(j.at("alpha")) : std::nan("")) << ','
                    << fmt_double(ok ? get_num(j.at("r2")) : std::nan("")) << ',' << (acc ? 1 : 0) << '\n';
            }
        }
    }
    if (s.has_task("lyapunov")) write_file_atomic(out / "lambda_map.csv", lam.str());
    if (s.has_task("wtd")) write_file_atomic(out / "alpha_map.csv", alp.str());
    json meta = {{"provenance", provenance_json(config_hash(s), s.master_seed)},
                 {"config", emit_config(s)},
                 {"grid", {{"A", s.A_grid}, {"T", s.T_grid}}},
                 {"incomplete_points", failed}};
    write_file_atomic(out / "sweep.json", meta.dump(2) + "\n");
    return meta;
}

inline void run_bifurcation_tables(const SweepSpec& s, const std::filesystem::path& out, unsigned threads) {
    for (std::size_t it = 0; it < s.T_grid.size(); ++it) {
        ModelParams base{s.chi, s.gamma, 0.0, s.T_grid[it], s.N};
        BifurcationOptions opt;
        opt.seed = derive_seed(s.master_seed, it, 0, StreamTag::point);
        opt.threads = threads;
        const auto pts = bifurcation_scan(base, s.A_grid, opt);
        char name[64];
        std::snprintf(name, sizeof name, "bifurcation_T%03zu.csv", it);
        write_file_atomic(out / name, to_text([&](std::ostream& os) { write_bifurcation_csv(os, pts); }));
    }
}

/// Executes the sweep. Points run in parallel, one worker each; failures
/// are recorded in the point's result file instead of aborting the sweep.
inline SweepSummary run_sweep(const SweepSpec& s, const std::filesystem::path& out, const SweepOptions& opt = {}) {
    validate(s);
    std::filesystem::create_directories(out);
    write_file_atomic(out / "config.cfg", emit_config(s));
    SweepSummary sum;
    std::vector<std::pair<std::size_t, std::size_t>> todo;
    for (std::size_t ia = 0; ia < s.A_grid.size(); ++ia)
        for (std::size_t it = 0; it < s.T_grid.size(); ++it) {
            const auto path = out / point_dir_name(ia, it) / "result.json";
            if (opt.resume && valid_result_file(path, s)) ++sum.skipped;
            else todo.emplace_back(ia, it);
        }

    std::mutex mu;
    std::atomic<std::size_t> done{0};
    parallel_for(todo.size(), opt.threads, [&](std::size_t k) {
        const auto [ia, it] = todo[k];
        const auto dir = out / point_dir_name(ia, it);
        json result;
        bool ok = true;
        try {
            PointArtifacts art = compute_point(s, ia, it, 1);
            for (const auto& [name, content] : art.files) write_file_atomic(dir / name, content);
            result = std::move(art.result);
        } catch (const std::exception& e) {
            ok = false;
            result = {{"A", s.A_grid[ia]}, {"T", s.T_grid[it]}, {"ia", ia}, {"it", it},
                      {"index", s.point_index(ia, it)}, {"status", "failed"}, {"error", e.what()},
                      {"provenance", provenance_json(config_hash(s), s.master_seed)}};
        }
        write_file_atomic(dir / "result.json", result.dump(2) + "\n");
        std::lock_guard lock(mu);
        if (ok) ++sum.computed;
        else {
            ++sum.failed;
            sum.failed_points.push_back(s.point_index(ia, it));
        }
        if (opt.progress) opt.progress(++done, todo.size(), result);
    });
    std::sort(sum.failed_points.begin(), sum.failed_points.end());
    if (s.has_task("bifurcation")) run_bifurcation_tables(s, out, opt.threads);
    build_aggregates(s, out);
    return sum;
}

}  // namespace kerr
