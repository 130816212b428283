#pragma once

// Largest Lyapunov exponents.
//
// Quantum: a fiducial and an auxiliary trajectory evolve under H_eff and
// consume the same threshold sequence eta_1, eta_2, ...; each state jumps
// when its own squared norm reaches its own next threshold. At each period
// boundary (once both have used the same number of thresholds) the
// observable mismatch Delta = |o_f - o_a| is checked against
// [delta_min, delta_max]; outside the window the auxiliary is pulled back
// along psi_a - psi_f to mismatch delta_0 and the growth factor
// d_k = Delta / delta_0 is recorded. lambda(t) = (1/t) sum_k ln d_k.
//
// Applying the fiducial's jump record to the auxiliary instead
// (JumpCoupling::shared_record) contracts the pair: conditioning both
// states on one measurement record is a stable filter, and the estimate
// comes out negative even in the chaotic regime.
//
// Classical: Benettin tangent-space exponent of the mean-field flow, with a
// two-trajectory finite-separation estimate as an independent check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/meanfield.hpp"
#include "kerr/parallel.hpp"
#include "kerr/rng.hpp"

namespace kerr {

enum class Observable { xi, n };

inline std::string to_string(Observable o) { return o == Observable::xi ? "xi" : "n"; }
inline Observable observable_from_string(const std::string& s) {
    if (s == "xi") return Observable::xi;
    if (s == "n") return Observable::n;
    throw ValidationError("unknown observable '" + s + "' (expected xi or n)");
}

inline complex observable_value(const StateVector& psi, Observable o) {
    return o == Observable::xi ? mean_field_amplitude(psi) : complex{mean_photon_number(psi), 0.0};
}

/// |o(psi_f) - o(psi_a)| on normalized expectations.
inline double observable_distance(const StateVector& psi_f, const StateVector& psi_a, Observable o) {
    return std::abs(observable_value(psi_f, o) - observable_value(psi_a, o));
}

/// normalize(psi_f + epsilon psi_r), psi_r with i.i.d. standard complex
/// Gaussian entries.
inline StateVector init_auxiliary(const StateVector& psi_f, double epsilon, CounterRng& rng) {
    StateVector out = psi_f;
    if (epsilon == 0.0) return out;
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += epsilon * rng.complex_gaussian();
    out.normalize();
    return out;
}

struct PairReset {
    StateVector auxiliary;  ///< unit norm
    double growth = 1.0;    ///< d_k = Delta / delta_0; NaN when re-perturbed
    bool reperturbed = false;
};

/// Pulls the auxiliary back along the mismatch direction so that its
/// observable distance to the fiducial is delta_0 to first order. A
/// degenerate pair (Delta = 0) is re-perturbed with epsilon = delta_0.
inline PairReset renormalize_pair(const StateVector& psi_f, const StateVector& psi_a, double delta_0,
                                  Observable o, CounterRng& rng) {
    require(delta_0 > 0.0, "delta_0 must be > 0");
    const StateVector f = psi_f.normalized();
    StateVector a = psi_a.normalized();
    // Remove the relative global phase: it is invisible to observables but
    // would otherwise dominate psi_a - psi_f.
    complex overlap{};
    for (std::size_t n = 0; n < f.size(); ++n) overlap += std::conj(f[n]) * a[n];
    if (std::abs(overlap) > 0.0) {
        const complex phase = std::conj(overlap) / std::abs(overlap);
        for (auto& c : a.raw()) c *= phase;
    }
    const double delta = observable_distance(f, a, o);
    PairReset r;
    if (!(delta > 0.0)) {
        r.auxiliary = init_auxiliary(f, delta_0, rng);
        r.growth = std::numeric_limits<double>::quiet_NaN();
        r.reperturbed = true;
        return r;
    }
    const double scale = delta_0 / delta;
    StateVector out(f.size());
    for (std::size_t n = 0; n < f.size(); ++n) out[n] = f[n] + scale * (a[n] - f[n]);
    out.normalize();
    r.auxiliary = std::move(out);
    r.growth = delta / delta_0;
    return r;
}

struct LyapunovConfig {
    double epsilon = 1e-4;
    /// Absolute thresholds. When delta_0 <= 0 they are derived as
    /// delta_0 = delta_0_factor * sigma, delta_max = max_ratio * delta_0,
    /// delta_min = min_ratio * delta_0, with sigma the spread of the
    /// stroboscopic observable over the second half of the transient.
    double delta_0 = 0.0;
    double delta_min = 0.0;
    double delta_max = 0.0;
    // Single-period growth factors reach ~1e4 in the chaotic regime, so the
    // window must start far below sigma to stay linear between checks. At
    // 1e-3 the estimate is biased low and depends on the observable; from
    // 1e-5 down to 1e-7 it no longer moves.
    double delta_0_factor = 1e-6;
    double max_ratio = 10.0;
    double min_ratio = 1e-2;
    double sigma_floor = 1e-4;
    Observable observable = Observable::xi;
    int runs = 10;  ///< M_r
    bool swap_roles = false;
    JumpCoupling coupling = JumpCoupling::shared_thresholds;
    unsigned threads = 1;

    void validate() const {
        require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0, 1)");
        require(runs >= 1, "M_r must be >= 1");
        if (delta_0 > 0.0) {
            require(delta_min > 0.0 && delta_min < delta_0 && delta_0 < delta_max,
                    "thresholds must satisfy 0 < delta_min < delta_0 < delta_max");
        } else {
            require(delta_0_factor > 0.0, "delta_0_factor must be > 0");
            require(min_ratio > 0.0 && min_ratio < 1.0 && max_ratio > 1.0,
                    "ratios must satisfy 0 < min_ratio < 1 < max_ratio");
        }
    }
};

struct LyapunovRun {
    std::vector<double> reset_times;  ///< measured from the start of the measurement window
    std::vector<double> growth_factors;
    std::vector<double> lambda_times;
    std::vector<double> lambda_series;
    double lambda_final = 0.0;
    double sigma = 0.0;
    double delta_0 = 0.0, delta_min = 0.0, delta_max = 0.0;
    double max_reset_residual = 0.0;  ///< max |Delta_after - delta_0| / delta_0
    std::size_t reperturbations = 0;
    std::size_t desyncs = 0;  ///< pairs re-seeded after falling out of jump step
    bool truncation_warning = false;
    std::vector<JumpEvent> fiducial_jumps;  ///< jumps inside the measurement window
    std::uint64_t eta_seed = 0;
};

struct LyapunovResult {
    std::vector<LyapunovRun> runs;
    double lambda = 0.0;
    double stderr_ = 0.0;
    bool truncation_warning = false;
    double dt = 0.0;
};

/// lambda(t) from stored (t_k, d_k): (1/t) sum_{t_k <= t} ln d_k.
inline double lambda_at(const LyapunovRun& run, double t) {
    double s = 0.0;
    for (std::size_t k = 0; k < run.reset_times.size() && run.reset_times[k] <= t; ++k)
        s += std::log(run.growth_factors[k]);
    return s / t;
}

/// Mean of the last 10% of a series (at least one entry).
inline double tail_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const std::size_t k = std::max<std::size_t>(1, (v.size() + 9) / 10);
    return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(k), v.end(), 0.0) / static_cast<double>(k);
}

/// Mean and standard error of the mean (0 for a single value).
inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

/// One fiducial/auxiliary pair. The transient length is rounded to whole
/// periods.
inline LyapunovRun quantum_lyapunov_run(const ModelParams& p, const TrajectoryConfig& tc, const LyapunovConfig& lc,
                                        std::uint64_t trajectory_index) {
    p.validate();
    tc.validate(p);
    lc.validate();
    TrajectoryConfig cfg = tc;
    cfg.trajectory_index = trajectory_index;
    const double dt = cfg.resolved_dt(p);

    LyapunovRun run;
    run.eta_seed = cfg.eta_seed();
    CounterRng pert(derive_seed(cfg.seed, cfg.point_index, trajectory_index, StreamTag::perturbation));
    TrajectoryStepper stepper(p, dt, cfg.resolved_tol(p), run.eta_seed, StateVector::vacuum(p.N), cfg.integrator,
                              lc.coupling);
    const std::int64_t period = stepper.steps_per_period();
    const std::int64_t transient_periods = grid_steps(cfg.t_transient, dt) / period;
    const std::int64_t measure_periods = std::max<std::int64_t>(1, grid_steps(cfg.t_measure, dt) / period);

    auto check_truncation = [&] {
        if (stepper.state(0).top_band_fraction() > cfg.truncation_fraction) run.truncation_warning = true;
    };

    std::vector<complex> samples;
    for (std::int64_t k = 1; k <= transient_periods; ++k) {
        stepper.advance(period);
        check_truncation();
        if (2 * k > transient_periods) samples.push_back(observable_value(stepper.state(0), lc.observable));
    }
    if (!samples.empty()) {
        complex mean{};
        for (auto s : samples) mean += s;
        mean /= static_cast<double>(samples.size());
        double var = 0.0;
        for (auto s : samples) var += std::norm(s - mean);
        run.sigma = std::sqrt(var / static_cast<double>(samples.size()));
    }
    if (lc.delta_0 > 0.0) {
        run.delta_0 = lc.delta_0;
        run.delta_min = lc.delta_min;
        run.delta_max = lc.delta_max;
    } else {
        run.delta_0 = lc.delta_0_factor * std::max(run.sigma, lc.sigma_floor);
        run.delta_min = lc.min_ratio * run.delta_0;
        run.delta_max = lc.max_ratio * run.delta_0;
    }

    // Start the pair at exactly delta_0 so the first recorded factor is not
    // dominated by the arbitrary epsilon scale.
    const StateVector fid = stepper.state(0);
    const double fid_norm = std::sqrt(fid.norm2());
    StateVector aux = init_auxiliary(fid.normalized(), lc.epsilon, pert);
    aux = renormalize_pair(fid, aux, run.delta_0, lc.observable, pert).auxiliary;
    for (auto& c : aux.raw()) c *= fid_norm;
    stepper.add_follower(std::move(aux));
    if (lc.swap_roles) stepper.swap_states(0, 1);

    const double t0 = stepper.time();
    const std::int64_t g0 = stepper.grid_index();
    const std::int64_t g_end = g0 + measure_periods * period;
    std::int64_t next_check = g0 + period;
    double log_sum = 0.0;
    run.lambda_times.reserve(static_cast<std::size_t>(measure_periods));
    run.lambda_series.reserve(static_cast<std::size_t>(measure_periods));

    // Pulls the auxiliary back to delta_0. The norm offset relative to the
    // fiducial (which sets the next jump instant) is scaled by the same factor.
    auto reset = [&](double t, bool record) {
        const StateVector& f = stepper.state(0);
        const StateVector& a = stepper.state(1);
        PairReset r = renormalize_pair(f, a, run.delta_0, lc.observable, pert);
        const double norm_f = std::sqrt(f.norm2());
        double norm_new = norm_f;
        if (!r.reperturbed) norm_new = norm_f * (1.0 + (std::sqrt(a.norm2()) / norm_f - 1.0) / r.growth);
        for (auto& c : r.auxiliary.raw()) c *= norm_new;
        if (r.reperturbed) {
            ++run.reperturbations;
        } else if (record) {
            run.reset_times.push_back(t);
            run.growth_factors.push_back(r.growth);
            log_sum += std::log(r.growth);
            const double after = observable_distance(f, r.auxiliary, lc.observable);
            run.max_reset_residual = std::max(run.max_reset_residual, std::abs(after - run.delta_0) / run.delta_0);
        }
        stepper.state(1) = std::move(r.auxiliary);
        stepper.set_jump_count(1, stepper.jump_count(0));
    };

    // The window check runs at the first grid step at or after each period
    // boundary where both states have consumed the same number of
    // thresholds; mid-jump comparisons are meaningless. A pair that stays
    // out of step for a full period is re-seeded without recording.
    while (stepper.grid_index() < g_end) {
        stepper.step();
        for (const auto& j : stepper.last_jumps()) run.fiducial_jumps.push_back(j);
        const std::int64_t g = stepper.grid_index();
        const double t = stepper.time() - t0;
        if (g >= next_check) {
            if (stepper.jump_count(0) == stepper.jump_count(1)) {
                const double delta = observable_distance(stepper.state(0), stepper.state(1), lc.observable);
                if (delta > run.delta_max || delta < run.delta_min) reset(t, true);
                next_check += period;
            } else if (g >= next_check + period) {
                ++run.desyncs;
                reset(t, false);
                next_check += 2 * period;
            }
        }
        if ((g - g0) % period == 0) {
            check_truncation();
            run.lambda_times.push_back(t);
            run.lambda_series.push_back(log_sum / t);
        }
    }
    run.lambda_final = tail_mean(run.lambda_series);
    return run;
}

/// M_r independent pairs; lambda is the mean of the per-run tail averages.
inline LyapunovResult quantum_lyapunov(const ModelParams& p, const TrajectoryConfig& tc, const LyapunovConfig& lc) {
    lc.validate();
    LyapunovResult res;
    res.dt = tc.resolved_dt(p);
    res.runs.resize(static_cast<std::size_t>(lc.runs));
    parallel_for(res.runs.size(), lc.threads, [&](std::size_t j) {
        res.runs[j] = quantum_lyapunov_run(p, tc, lc, tc.trajectory_index + j);
    });
    std::vector<double> finals;
    for (const auto& r : res.runs) {
        finals.push_back(r.lambda_final);
        res.truncation_warning = res.truncation_warning || r.truncation_warning;
    }
    std::tie(res.lambda, res.stderr_) = mean_stderr(finals);
    return res;
}

// ---------------------------------------------------------------------------
// Mean-field exponent

struct MeanFieldConfig {
    double transient_periods = 500.0;
    double measure_periods = 1000.0;
    double dt = 0.0;
    complex xi0{1e-6, 0.0};
    double separation = 1e-8;  ///< two-trajectory method only
};

// Tangent flow of the mean-field equation:
//   d(dxi)/dt = -gamma/2 dxi - i chi (2|xi|^2 dxi + xi^2 conj(dxi)).
inline complex mf_tangent_rhs(complex xi, complex dxi, const ModelParams& p) noexcept {
    return -0.5 * p.gamma * dxi - complex{0.0, p.chi} * (2.0 * std::norm(xi) * dxi + xi * xi * std::conj(dxi));
}

/// Benettin estimate: joint RK4 of (xi, dxi), dxi renormalized to unit
/// length at every period boundary.
inline double classical_lyapunov(const ModelParams& p, const MeanFieldConfig& mc = {}) {
    p.validate();
    const double dt = mc.dt > 0.0 ? mc.dt : default_mf_step(p);
    MeanFieldStepper s(p, mc.xi0, dt);
    const std::int64_t period = s.steps_per_period();
    s.advance(static_cast<std::int64_t>(std::llround(mc.transient_periods)) * period);
    complex xi = s.value();
    complex dxi{1.0, 0.0};
    double log_sum = 0.0;
    const auto periods = static_cast<std::int64_t>(std::llround(mc.measure_periods));
    const std::int64_t half = period / 2;
    for (std::int64_t k = 0; k < periods; ++k) {
        for (std::int64_t j = 0; j < period; ++j) {
            const double F = j < half ? p.A : 0.0;
            const complex a1 = mf_rhs_const(xi, F, p), b1 = mf_tangent_rhs(xi, dxi, p);
            const complex x2 = xi + 0.5 * dt * a1, d2 = dxi + 0.5 * dt * b1;
            const complex a2 = mf_rhs_const(x2, F, p), b2 = mf_tangent_rhs(x2, d2, p);
            const complex x3 = xi + 0.5 * dt * a2, d3 = dxi + 0.5 * dt * b2;
            const complex a3 = mf_rhs_const(x3, F, p), b3 = mf_tangent_rhs(x3, d3, p);
            const complex x4 = xi + dt * a3, d4 = dxi + dt * b3;
            const complex a4 = mf_rhs_const(x4, F, p), b4 = mf_tangent_rhs(x4, d4, p);
            xi += (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            dxi += (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        const double g = std::abs(dxi);
        log_sum += std::log(g);
        dxi /= g;
    }
    return log_sum / (static_cast<double>(periods) * p.T);
}

/// Finite-separation estimate from two mean-field trajectories.
inline double classical_lyapunov_two_trajectory(const ModelParams& p, const MeanFieldConfig& mc = {}) {
    p.validate();
    const double dt = mc.dt > 0.0 ? mc.dt : default_mf_step(p);
    MeanFieldStepper s(p, mc.xi0, dt);
    const std::int64_t period = s.steps_per_period();
    s.advance(static_cast<std::int64_t>(std::llround(mc.transient_periods)) * period);
    complex x = s.value();
    complex y = x + mc.separation;
    const std::int64_t half = period / 2;
    double log_sum = 0.0;
    const auto periods = static_cast<std::int64_t>(std::llround(mc.measure_periods));
    for (std::int64_t k = 0; k < periods; ++k) {
        for (std::int64_t j = 0; j < period; ++j) {
            const double F = j < half ? p.A : 0.0;
            x = mf_rk4_step(x, F, dt, p);
            y = mf_rk4_step(y, F, dt, p);
        }
        const double d = std::abs(y - x);
        log_sum += std::log(d / mc.separation);
        y = x + (y - x) * (mc.separation / d);
    }
    return log_sum / (static_cast<double>(periods) * p.T);
}

}  // namespace kerr
