#pragma once

// Monte-Carlo wave-function unraveling of the damped, quench-driven Kerr
// cavity.
//
// Between jumps the state obeys i dpsi/dt = H_eff psi with H_eff
// tridiagonal and piecewise constant in time. The diagonal part
// (Kerr energy and damping) is integrated exactly; the drive coupling is
// handled by a fixed-step fourth-order integrating-factor Runge-Kutta
// scheme (Lawson RK4). In the undriven half-period the step is exact.
//
// A jump fires when the squared norm of the fiducial state falls to the
// current threshold eta. The crossing time inside a step is located by
// bisection on re-integrated sub-steps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/fpenv.hpp"
#include "kerr/rng.hpp"

namespace kerr {

/// Quench drive: A on (0, T/2] of each period, 0 on (T/2, T].
inline double drive_value(double t, const ModelParams& p) {
    double r = std::fmod(t, p.T);
    if (r < 0.0) r += p.T;
    return (r > 0.0 && r <= 0.5 * p.T) ? p.A : 0.0;
}

/// Largest step not exceeding `requested` that divides T/2 exactly.
inline double snap_step(double half_period, double requested) {
    require(requested > 0.0 && std::isfinite(requested), "step must be > 0");
    const double m = std::ceil(half_period / requested - 1e-9);
    return half_period / std::max(1.0, m);
}

/// Stability/accuracy heuristic for the drive coupling, whose norm is
/// bounded by 2 A sqrt(N+1). The Kerr and damping parts are exact and do
/// not constrain the step.
inline double default_step(const ModelParams& p) {
    double target = 0.01;
    const double drive_norm = 2.0 * p.A * std::sqrt(static_cast<double>(p.N) + 1.0);
    if (drive_norm > 0.0) target = std::min(target, 0.5 / drive_norm);
    return snap_step(0.5 * p.T, target);
}

enum class Integrator { lawson_rk4, classical_rk4 };

/// Fixed-step propagator under H_eff. Holds scratch buffers, so one
/// instance belongs to one trajectory worker.
class Propagator {
  public:
    Propagator(const ModelParams& p, double dt, Integrator scheme = Integrator::lawson_rk4)
        : params_(p), dt_(dt), scheme_(scheme) {
        p.validate();
        require(dt > 0.0 && std::isfinite(dt), "dt must be > 0");
        const std::size_t d = p.dim();
        sqrt_n_.resize(d + 1);
        for (std::size_t n = 0; n <= d; ++n) sqrt_n_[n] = std::sqrt(static_cast<double>(n));
        rate_.resize(d);
        for (std::size_t n = 0; n < d; ++n) {
            const double nd = static_cast<double>(n);
            rate_[n] = complex{-0.5 * p.gamma * nd, -0.5 * p.chi * nd * (nd - 1.0)};
        }
        exact_factors(dt_, e_full_);
        exact_factors(0.5 * dt_, e_half_);
        for (auto* b : {&k1_, &k2_, &k3_, &k4_, &u_, &ey_, &ef_, &eh_}) b->assign(d, complex{});
    }

    const ModelParams& params() const noexcept { return params_; }
    double dt() const noexcept { return dt_; }
    Integrator scheme() const noexcept { return scheme_; }

    /// Advances `in` by h with constant drive F; writes to `out` (may not
    /// alias `in`). Returns the squared norm of the result.
    double step(std::span<const complex> in, std::span<complex> out, double F, double h) {
        const std::size_t d = rate_.size();
        require(in.size() == d && out.size() == d, "state dimension mismatch");
        if (scheme_ == Integrator::classical_rk4) return classical_step(in, out, F, h);

        const bool cached = (h == dt_);
        const complex* ef = cached ? e_full_.data() : (fill_factors(h, ef_), ef_.data());
        const complex* eh = cached ? e_half_.data() : (fill_factors(0.5 * h, eh_), eh_.data());

        double n2 = 0.0;
        if (F == 0.0) {
            for (std::size_t n = 0; n < d; ++n) {
                out[n] = ef[n] * in[n];
                n2 += std::norm(out[n]);
            }
            return n2;
        }
        const double hh = 0.5 * h;
        drive(F, in, k1_);
        for (std::size_t n = 0; n < d; ++n) {
            ey_[n] = eh[n] * in[n];
            u_[n] = eh[n] * (in[n] + hh * k1_[n]);
        }
        drive(F, u_, k2_);
        for (std::size_t n = 0; n < d; ++n) u_[n] = ey_[n] + hh * k2_[n];
        drive(F, u_, k3_);
        for (std::size_t n = 0; n < d; ++n) u_[n] = ef[n] * in[n] + h * (eh[n] * k3_[n]);
        drive(F, u_, k4_);
        const double h6 = h / 6.0;
        for (std::size_t n = 0; n < d; ++n) {
            out[n] = ef[n] * in[n] + h6 * (ef[n] * k1_[n] + 2.0 * eh[n] * (k2_[n] + k3_[n]) + k4_[n]);
            n2 += std::norm(out[n]);
        }
        return n2;
    }

    /// Squared norm after advancing by h, without keeping the state.
    double norm2_after(std::span<const complex> in, double F, double h) {
        if (F == 0.0 && scheme_ == Integrator::lawson_rk4) {
            double n2 = 0.0;
            for (std::size_t n = 0; n < rate_.size(); ++n) n2 += std::norm(in[n]) * std::exp(2.0 * rate_[n].real() * h);
            return n2;
        }
        probe_.resize(in.size());
        return step(in, probe_, F, h);
    }

  private:
    // out[n] = F (sqrt(n) x[n-1] - sqrt(n+1) x[n+1]),  i.e. -i * iF(a^+ - a) x.
    void drive(double F, std::span<const complex> x, std::vector<complex>& out) const {
        const std::size_t d = x.size();
        if (d == 1) {
            out[0] = 0.0;
            return;
        }
        out[0] = -F * sqrt_n_[1] * x[1];
        for (std::size_t n = 1; n + 1 < d; ++n) out[n] = F * (sqrt_n_[n] * x[n - 1] - sqrt_n_[n + 1] * x[n + 1]);
        out[d - 1] = F * sqrt_n_[d - 1] * x[d - 2];
    }

    void exact_factors(double h, std::vector<complex>& e) const {
        e.resize(rate_.size());
        for (std::size_t n = 0; n < rate_.size(); ++n) e[n] = std::exp(rate_[n] * h);
    }

    // exp(rate_n h) by the ratio recurrence r_{n+1} = r_n exp(-i chi h).
    // Used for off-grid sub-steps only.
    void fill_factors(double h, std::vector<complex>& e) const {
        const double g = params_.gamma, c = params_.chi;
        const complex q = std::exp(complex{0.0, -c * h});
        complex r = std::exp(complex{-0.5 * g * h, 0.0});  // r_0 = e_1 / e_0
        e[0] = 1.0;
        for (std::size_t n = 1; n < e.size(); ++n) {
            e[n] = e[n - 1] * r;
            r *= q;
        }
    }

    double classical_step(std::span<const complex> in, std::span<complex> out, double F, double h) {
        const std::size_t d = rate_.size();
        auto rhs = [&](std::span<const complex> x, std::vector<complex>& k) {
            drive(F, x, k);
            for (std::size_t n = 0; n < d; ++n) k[n] += rate_[n] * x[n];
        };
        const double hh = 0.5 * h;
        rhs(in, k1_);
        for (std::size_t n = 0; n < d; ++n) u_[n] = in[n] + hh * k1_[n];
        rhs(u_, k2_);
        for (std::size_t n = 0; n < d; ++n) u_[n] = in[n] + hh * k2_[n];
        rhs(u_, k3_);
        for (std::size_t n = 0; n < d; ++n) u_[n] = in[n] + h * k3_[n];
        rhs(u_, k4_);
        double n2 = 0.0;
        const double h6 = h / 6.0;
        for (std::size_t n = 0; n < d; ++n) {
            out[n] = in[n] + h6 * (k1_[n] + 2.0 * (k2_[n] + k3_[n]) + k4_[n]);
            n2 += std::norm(out[n]);
        }
        return n2;
    }

    ModelParams params_;
    double dt_;
    Integrator scheme_;
    std::vector<double> sqrt_n_;
    std::vector<complex> rate_;  // diagonal of -i H_eff
    std::vector<complex> e_full_, e_half_;
    std::vector<complex> k1_, k2_, k3_, k4_, u_, ey_, ef_, eh_, probe_;
};

/// Which half-period an interval [t, t+h] lies in; throws if it straddles
/// a multiple of T/2.
inline double segment_drive(const ModelParams& p, double t, double h) {
    const double q = 0.5 * p.T;
    const double eps = 1e-9;
    const double begin = std::floor(t / q + eps);
    const double end = std::ceil((t + h) / q - eps) - 1.0;
    if (begin != end) throw ValidationError("integration step straddles a drive discontinuity");
    return drive_value(q * (begin + 0.5), p);
}

/// One step of i dpsi/dt = H_eff psi over [t, t+h].
inline StateVector propagate_segment(Propagator& prop, const StateVector& psi, double t, double h) {
    const double F = segment_drive(prop.params(), t, h);
    StateVector out(psi.size());
    prop.step(psi.data(), out.data(), F, h);
    return out;
}

/// Bisection for the time t* in [t, t+h] where ||psi||^2 falls to eta,
/// re-integrating from psi_before for each trial sub-step. The final
/// bracket is closed by linear interpolation of the norm, which keeps t* a
/// smooth function of the state: two nearly equal states must get nearly
/// equal jump times, not times that agree exactly or differ by tol.
inline double locate_jump_time(Propagator& prop, const StateVector& psi_before, double t, double h, double F,
                               double eta, double tol) {
    double n_lo = psi_before.norm2();
    if (n_lo <= eta) return t;
    double n_hi = prop.norm2_after(psi_before.data(), F, h);
    if (n_hi > eta) throw NumericalError("locate_jump_time: no threshold crossing in bracket");
    double lo = 0.0, hi = h;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double n_mid = prop.norm2_after(psi_before.data(), F, mid);
        if (n_mid > eta) {
            lo = mid;
            n_lo = n_mid;
        } else {
            hi = mid;
            n_hi = n_mid;
        }
    }
    const double w = n_lo > n_hi ? (n_lo - eta) / (n_lo - n_hi) : 0.5;
    return t + lo + w * (hi - lo);
}

inline double locate_jump_time(Propagator& prop, const StateVector& psi_before, double t, double h, double eta,
                               double tol) {
    return locate_jump_time(prop, psi_before, t, h, segment_drive(prop.params(), t, h), eta, tol);
}

/// Photon emission: psi -> a psi / ||a psi||.
inline void apply_jump_inplace(StateVector& psi) {
    const std::size_t d = psi.size();
    double n2 = 0.0;
    for (std::size_t n = 0; n + 1 < d; ++n) {
        psi[n] = std::sqrt(static_cast<double>(n + 1)) * psi[n + 1];
        n2 += std::norm(psi[n]);
    }
    psi[d - 1] = 0.0;
    if (!(n2 > 0.0)) throw NumericalError("jump applied to the vacuum (state in the kernel of a)");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& c : psi.raw()) c *= inv;
}

inline StateVector apply_jump(StateVector psi) {
    apply_jump_inplace(psi);
    return psi;
}

struct JumpEvent {
    double time;
    double threshold;
};

/// How follower states (e.g. the auxiliary trajectory of a Lyapunov pair)
/// receive jumps.
enum class JumpCoupling {
    /// Every state consumes the same threshold sequence eta_1, eta_2, ...
    /// but jumps when its own squared norm reaches its own next threshold.
    shared_thresholds,
    /// Followers jump at the fiducial's jump instants.
    shared_record,
};

/// Grid-stepping MCWF kernel. State 0 is the fiducial trajectory; its jumps
/// are the ones reported. Further states ("followers") see the same drive
/// and the same threshold stream, coupled per JumpCoupling.
class TrajectoryStepper {
  public:
    TrajectoryStepper(const ModelParams& p, double dt, double jump_time_tol, std::uint64_t eta_seed,
                      StateVector initial, Integrator scheme = Integrator::lawson_rk4,
                      JumpCoupling coupling = JumpCoupling::shared_thresholds)
        : params_(p), prop_(p, dt, scheme), rng_(eta_seed), tol_(jump_time_tol), coupling_(coupling) {
        enable_flush_to_zero();
        require(initial.size() == p.dim(), "initial state dimension mismatch");
        const double q = 0.5 * p.T;
        const double m = std::round(q / dt);
        require(m >= 1.0 && std::abs(m * dt - q) <= 1e-9 * q, "dt must divide T/2 exactly");
        require(jump_time_tol > 0.0 && jump_time_tol < dt, "jump_time_tol must lie in (0, dt)");
        steps_per_half_ = static_cast<std::int64_t>(m);
        states_.push_back(std::move(initial));
        next_.emplace_back(p.dim());
        jump_count_.push_back(0);
    }

    /// The follower starts at the fiducial's position in the threshold
    /// stream.
    std::size_t add_follower(StateVector psi) {
        require(psi.size() == params_.dim(), "follower dimension mismatch");
        states_.push_back(std::move(psi));
        next_.emplace_back(params_.dim());
        jump_count_.push_back(jump_count_[0]);
        return states_.size() - 1;
    }
    void drop_followers() {
        states_.resize(1);
        next_.resize(1);
        jump_count_.resize(1);
    }

    /// Swaps which state drives the reported jump record.
    void swap_states(std::size_t i, std::size_t j) {
        std::swap(states_.at(i), states_.at(j));
        std::swap(jump_count_.at(i), jump_count_.at(j));
    }

    /// Advances one grid step; returns the number of fiducial jumps in it.
    int step() {
        const bool driven = ((index_ / steps_per_half_) % 2) == 0;
        const double F = driven ? params_.A : 0.0;
        last_jumps_.clear();
        if (coupling_ == JumpCoupling::shared_record || states_.size() == 1) {
            step_shared_record(F);
        } else {
            for (std::size_t i = 0; i < states_.size(); ++i) step_single(i, F);
        }
        for (std::size_t i = 0; i < states_.size(); ++i) std::swap(states_[i], next_[i]);
        ++index_;
        trim_thresholds();
        return static_cast<int>(last_jumps_.size());
    }

    void advance(std::int64_t steps) {
        for (std::int64_t k = 0; k < steps; ++k) step();
    }

    double time() const noexcept { return static_cast<double>(index_) * prop_.dt(); }
    std::int64_t grid_index() const noexcept { return index_; }
    std::int64_t steps_per_period() const noexcept { return 2 * steps_per_half_; }
    double dt() const noexcept { return prop_.dt(); }
    double threshold(std::size_t i = 0) { return eta(jump_count_.at(i)); }
    std::uint64_t jump_count(std::size_t i = 0) const { return jump_count_.at(i); }
    void set_jump_count(std::size_t i, std::uint64_t k) {
        require(k >= eta_base_, "threshold stream position already discarded");
        jump_count_.at(i) = k;
    }

    const StateVector& state(std::size_t i = 0) const { return states_.at(i); }
    StateVector& state(std::size_t i = 0) { return states_.at(i); }
    std::size_t state_count() const noexcept { return states_.size(); }

    std::span<const JumpEvent> last_jumps() const noexcept { return last_jumps_; }

  private:
    // k-th threshold of the shared stream (0-based).
    double eta(std::uint64_t k) {
        while (eta_base_ + eta_.size() <= k) eta_.push_back(rng_.uniform_open());
        return eta_[static_cast<std::size_t>(k - eta_base_)];
    }

    void trim_thresholds() {
        const std::uint64_t lowest = *std::min_element(jump_count_.begin(), jump_count_.end());
        const std::uint64_t drop = lowest - eta_base_;
        if (drop > 1024) {
            eta_.erase(eta_.begin(), eta_.begin() + static_cast<std::ptrdiff_t>(drop));
            eta_base_ = lowest;
        }
    }

    // One state against its own threshold sequence. Result in next_[i].
    void step_single(std::size_t i, double F) {
        const double dt = prop_.dt();
        double t = time();
        const double t_end = static_cast<double>(index_ + 1) * dt;
        double n2 = prop_.step(states_[i].data(), next_[i].data(), F, dt);
        double threshold = eta(jump_count_[i]);
        while (n2 <= threshold) {
            const double ts = locate_jump_time(prop_, states_[i], t, t_end - t, F, threshold, tol_);
            if (ts > t) {
                prop_.step(states_[i].data(), next_[i].data(), F, ts - t);
                std::swap(states_[i], next_[i]);
            }
            apply_jump_inplace(states_[i]);
            if (i == 0) last_jumps_.push_back({ts, threshold});
            threshold = eta(++jump_count_[i]);
            t = ts;
            if (t_end - t > 0.0) {
                n2 = prop_.step(states_[i].data(), next_[i].data(), F, t_end - t);
            } else {
                next_[i] = states_[i];
                n2 = next_[i].norm2();
            }
        }
    }

    void step_shared_record(double F) {
        const double dt = prop_.dt();
        double t = time();
        const double t_end = static_cast<double>(index_ + 1) * dt;
        double n2 = 0.0;
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const double v = prop_.step(states_[i].data(), next_[i].data(), F, dt);
            if (i == 0) n2 = v;
        }
        double threshold = eta(jump_count_[0]);
        while (n2 <= threshold) {
            const double ts = locate_jump_time(prop_, states_[0], t, t_end - t, F, threshold, tol_);
            for (std::size_t i = 0; i < states_.size(); ++i) {
                if (ts > t) {
                    prop_.step(states_[i].data(), next_[i].data(), F, ts - t);
                    std::swap(states_[i], next_[i]);
                }
                apply_jump_inplace(states_[i]);
                ++jump_count_[i];
            }
            last_jumps_.push_back({ts, threshold});
            threshold = eta(jump_count_[0]);
            t = ts;
            const double rest = t_end - t;
            for (std::size_t i = 0; i < states_.size(); ++i) {
                if (rest > 0.0) {
                    const double v = prop_.step(states_[i].data(), next_[i].data(), F, rest);
                    if (i == 0) n2 = v;
                } else {
                    next_[i] = states_[i];
                    if (i == 0) n2 = next_[i].norm2();
                }
            }
        }
    }

    ModelParams params_;
    Propagator prop_;
    CounterRng rng_;
    double tol_;
    JumpCoupling coupling_;
    std::int64_t steps_per_half_ = 1;
    std::int64_t index_ = 0;
    std::vector<double> eta_;
    std::uint64_t eta_base_ = 0;
    std::vector<std::uint64_t> jump_count_;
    std::vector<StateVector> states_, next_;
    std::vector<JumpEvent> last_jumps_;
};

struct TrajectoryConfig {
    double t_transient = 0.0;
    double t_measure = 0.0;
    double dt = 0.0;
    double jump_time_tol = 0.0;
    std::uint64_t seed = 0;  ///< master seed; streams derive from (seed, point, trajectory)
    std::uint64_t point_index = 0;
    std::uint64_t trajectory_index = 0;
    double strobe_offset = 0.0;
    bool record_n_series = false;
    int n_series_stride = 1;
    double truncation_fraction = 1e-6;
    Integrator integrator = Integrator::lawson_rk4;

    /// Long-run defaults: 2000 periods of transient, 1000 measured.
    static TrajectoryConfig defaults(const ModelParams& p) {
        TrajectoryConfig c;
        c.t_transient = 2000.0 * p.T;
        c.t_measure = 1000.0 * p.T;
        c.dt = default_step(p);
        c.jump_time_tol = 1e-3 * c.dt;
        return c;
    }

    static TrajectoryConfig with_periods(const ModelParams& p, double transient_periods, double measure_periods) {
        TrajectoryConfig c = defaults(p);
        c.t_transient = transient_periods * p.T;
        c.t_measure = measure_periods * p.T;
        return c;
    }

    std::uint64_t eta_seed() const noexcept {
        return derive_seed(seed, point_index, trajectory_index, StreamTag::jump_threshold);
    }

    double resolved_dt(const ModelParams& p) const { return dt > 0.0 ? dt : default_step(p); }
    double resolved_tol(const ModelParams& p) const {
        return jump_time_tol > 0.0 ? jump_time_tol : 1e-3 * resolved_dt(p);
    }

    void validate(const ModelParams& p) const {
        const double h = resolved_dt(p);
        const double q = 0.5 * p.T;
        const double m = std::round(q / h);
        require(m >= 1.0 && std::abs(m * h - q) <= 1e-9 * q, "dt must divide T/2 exactly");
        require(resolved_tol(p) > 0.0 && resolved_tol(p) < h, "jump_time_tol must lie in (0, dt)");
        require(t_transient >= 0.0 && t_measure >= 0.0, "durations must be >= 0");
        require(strobe_offset >= 0.0 && strobe_offset < p.T, "strobe_offset must lie in [0, T)");
        require(n_series_stride >= 1, "n_series_stride must be >= 1");
    }
};

struct TrajectoryRecord {
    std::vector<double> jump_times;
    std::vector<double> jump_thresholds;
    std::vector<complex> strobe_xi;
    std::vector<std::int64_t> strobe_period;
    std::vector<double> n_times;
    std::vector<double> n_series;
    bool truncation_warning = false;
    double max_top_band_fraction = 0.0;
    double dt = 0.0;
    std::uint64_t eta_seed = 0;
};

inline std::int64_t grid_steps(double duration, double dt) {
    return static_cast<std::int64_t>(std::llround(duration / dt));
}

/// Full MCWF loop over [0, t_transient + t_measure]. Jumps are recorded
/// only after the transient; xi is sampled once per period from the start
/// of the measurement window (shifted by strobe_offset).
inline TrajectoryRecord run_trajectory(const ModelParams& p, const TrajectoryConfig& cfg, StateVector psi_init) {
    p.validate();
    cfg.validate(p);
    require(psi_init.size() == p.dim(), "initial state dimension mismatch");
    require(std::abs(psi_init.norm2() - 1.0) < 1e-9, "initial state must have unit norm");

    TrajectoryRecord rec;
    rec.dt = cfg.resolved_dt(p);
    rec.eta_seed = cfg.eta_seed();
    TrajectoryStepper stepper(p, rec.dt, cfg.resolved_tol(p), rec.eta_seed, std::move(psi_init), cfg.integrator);

    const std::int64_t g_transient = grid_steps(cfg.t_transient, rec.dt);
    const std::int64_t g_total = g_transient + grid_steps(cfg.t_measure, rec.dt);
    const std::int64_t period = stepper.steps_per_period();
    const std::int64_t offset = grid_steps(cfg.strobe_offset, rec.dt);
    const double t_transient = static_cast<double>(g_transient) * rec.dt;

    auto sample = [&](std::int64_t g) {
        const auto& psi = stepper.state();
        const double top = psi.top_band_fraction();
        rec.max_top_band_fraction = std::max(rec.max_top_band_fraction, top);
        if (top > cfg.truncation_fraction) rec.truncation_warning = true;
        if (g >= g_transient) {
            rec.strobe_xi.push_back(mean_field_amplitude(psi));
            rec.strobe_period.push_back((g - g_transient - offset) / period);
        }
    };

    if (offset == 0) sample(0);
    while (stepper.grid_index() < g_total) {
        stepper.step();
        const std::int64_t g = stepper.grid_index();
        for (const auto& j : stepper.last_jumps()) {
            if (j.time > t_transient) {
                rec.jump_times.push_back(j.time);
                rec.jump_thresholds.push_back(j.threshold);
            }
        }
        if ((g - offset) % period == 0) sample(g);
        if (cfg.record_n_series && g >= g_transient && (g - g_transient) % cfg.n_series_stride == 0) {
            rec.n_times.push_back(stepper.time());
            rec.n_series.push_back(mean_photon_number(stepper.state()));
        }
    }
    return rec;
}

inline TrajectoryRecord run_trajectory(const ModelParams& p, const TrajectoryConfig& cfg) {
    return run_trajectory(p, cfg, StateVector::vacuum(p.N));
}

/// Normalized states of one trajectory at the requested probe times
/// (snapped to the integration grid), starting from psi_init at t = 0.
inline std::vector<StateVector> sample_states(const ModelParams& p, const TrajectoryConfig& cfg,
                                              StateVector psi_init, std::span<const double> probe_times) {
    cfg.validate(p);
    const double dt = cfg.resolved_dt(p);
    TrajectoryStepper stepper(p, dt, cfg.resolved_tol(p), cfg.eta_seed(), std::move(psi_init), cfg.integrator);
    std::vector<StateVector> out;
    out.reserve(probe_times.size());
    for (double tp : probe_times) {
        const std::int64_t g = grid_steps(tp, dt);
        require(g >= stepper.grid_index(), "probe times must be non-decreasing");
        stepper.advance(g - stepper.grid_index());
        out.push_back(stepper.state().normalized());
    }
    return out;
}

}  // namespace kerr
