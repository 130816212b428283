#pragma once

// Mean-field (classical) limit of the driven Kerr cavity:
//
//   dxi/dt = -gamma/2 xi + F(t) - i chi |xi|^2 xi
//
// integrated with classical RK4 on a grid that divides T/2, so every step
// sees a constant drive.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/parallel.hpp"
#include "kerr/rng.hpp"

namespace kerr {

inline complex mf_rhs_const(complex xi, double F, const ModelParams& p) noexcept {
    return -0.5 * p.gamma * xi + F - complex{0.0, p.chi * std::norm(xi)} * xi;
}

inline complex mf_rhs(complex xi, double t, const ModelParams& p) {
    return mf_rhs_const(xi, drive_value(t, p), p);
}

inline complex mf_rk4_step(complex xi, double F, double h, const ModelParams& p) noexcept {
    const complex k1 = mf_rhs_const(xi, F, p);
    const complex k2 = mf_rhs_const(xi + 0.5 * h * k1, F, p);
    const complex k3 = mf_rhs_const(xi + 0.5 * h * k2, F, p);
    const complex k4 = mf_rhs_const(xi + h * k3, F, p);
    return xi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline double default_mf_step(const ModelParams& p) { return snap_step(0.5 * p.T, 0.005); }

struct MeanFieldPath {
    std::vector<double> times;
    std::vector<complex> values;
};

/// Fixed-grid integrator state over whole steps of a T/2-dividing grid.
class MeanFieldStepper {
  public:
    MeanFieldStepper(const ModelParams& p, complex xi0, double dt) : params_(p), xi_(xi0), dt_(dt) {
        p.validate();
        const double q = 0.5 * p.T;
        const double m = std::round(q / dt);
        require(m >= 1.0 && std::abs(m * dt - q) <= 1e-9 * q, "dt must divide T/2 exactly");
        steps_per_half_ = static_cast<std::int64_t>(m);
    }

    void step() {
        xi_ = mf_rk4_step(xi_, current_drive(), dt_, params_);
        ++index_;
    }
    void advance(std::int64_t n) {
        for (std::int64_t k = 0; k < n; ++k) step();
    }

    double current_drive() const noexcept {
        return ((index_ / steps_per_half_) % 2) == 0 ? params_.A : 0.0;
    }
    complex value() const noexcept { return xi_; }
    double time() const noexcept { return static_cast<double>(index_) * dt_; }
    std::int64_t steps_per_period() const noexcept { return 2 * steps_per_half_; }
    std::int64_t grid_index() const noexcept { return index_; }
    double dt() const noexcept { return dt_; }

  private:
    ModelParams params_;
    complex xi_;
    double dt_;
    std::int64_t steps_per_half_ = 1;
    std::int64_t index_ = 0;
};

/// RK4 path from xi0 over [0, t_end], keeping every `stride`-th point.
inline MeanFieldPath mf_trajectory(complex xi0, const ModelParams& p, double t_end, double dt, int stride = 1) {
    require(stride >= 1, "stride must be >= 1");
    MeanFieldStepper s(p, xi0, dt);
    const std::int64_t steps = grid_steps(t_end, dt);
    MeanFieldPath path;
    path.times.push_back(0.0);
    path.values.push_back(xi0);
    for (std::int64_t k = 1; k <= steps; ++k) {
        s.step();
        if (k % stride == 0 || k == steps) {
            path.times.push_back(s.time());
            path.values.push_back(s.value());
        }
    }
    return path;
}

/// xi_k = xi(t0 + kT), k = 0..count-1, with t0 = transient_periods * T.
inline std::vector<complex> mf_stroboscopic(complex xi0, const ModelParams& p, double transient_periods,
                                            std::size_t count, double dt = 0.0) {
    if (dt <= 0.0) dt = default_mf_step(p);
    MeanFieldStepper s(p, xi0, dt);
    const std::int64_t period = s.steps_per_period();
    s.advance(static_cast<std::int64_t>(std::llround(transient_periods)) * period);
    std::vector<complex> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        if (k > 0) s.advance(period);
        out.push_back(s.value());
    }
    return out;
}

/// Smallest p in [1, max_period] with |xi_{k+p} - xi_k| < tol over the
/// whole sequence, or 0 when the sequence has no such period.
inline int detect_period(const std::vector<complex>& seq, int max_period, double tol) {
    for (int per = 1; per <= max_period; ++per) {
        if (static_cast<std::size_t>(per) >= seq.size()) break;
        bool periodic = true;
        for (std::size_t k = 0; k + static_cast<std::size_t>(per) < seq.size(); ++k) {
            if (std::abs(seq[k + static_cast<std::size_t>(per)] - seq[k]) >= tol) {
                periodic = false;
                break;
            }
        }
        if (periodic) return per;
    }
    return 0;
}

struct BifurcationPoint {
    double A;
    complex xi;
    std::size_t sample_index;
    std::size_t initial_condition;  ///< 0 = near-origin start, 1.. = random starts
};

struct BifurcationOptions {
    double transient_periods = 500.0;
    std::size_t samples_per_A = 200;
    std::size_t random_initial_conditions = 8;
    double random_radius = 10.0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    unsigned threads = 1;
};

/// Stroboscopic Re/Im xi after the transient for every amplitude in the
/// grid. Starts from xi = 1e-6 and from `random_initial_conditions`
/// uniform draws in a disk; merged output surfaces coexisting attractors.
inline std::vector<BifurcationPoint> bifurcation_scan(const ModelParams& base, const std::vector<double>& A_grid,
                                                      const BifurcationOptions& opt) {
    require(!A_grid.empty(), "A grid must be non-empty");
    std::vector<std::vector<BifurcationPoint>> per_A(A_grid.size());
    parallel_for(A_grid.size(), opt.threads, [&](std::size_t i) {
        ModelParams p = base;
        p.A = A_grid[i];
        CounterRng rng(derive_seed(opt.seed, i, 0, StreamTag::initial_condition));
        for (std::size_t ic = 0; ic <= opt.random_initial_conditions; ++ic) {
            complex xi0{1e-6, 0.0};
            if (ic > 0) {
                const double r = opt.random_radius * std::sqrt(rng.uniform_open());
                const double phi = 2.0 * std::numbers::pi * rng.uniform_open();
                xi0 = std::polar(r, phi);
            }
            const auto seq = mf_stroboscopic(xi0, p, opt.transient_periods, opt.samples_per_A, opt.dt);
            for (std::size_t k = 0; k < seq.size(); ++k) per_A[i].push_back({p.A, seq[k], k, ic});
        }
    });
    std::vector<BifurcationPoint> out;
    for (auto& v : per_A) out.insert(out.end(), v.begin(), v.end());
    return out;
}

}  // namespace kerr
