#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kerr/fock.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/parallel.hpp"
#include "kerr/stats.hpp"

using namespace kerr;

namespace {

ModelParams params(double A, double T, int N, double gamma = 0.05, double chi = 0.008) {
    return ModelParams{chi, gamma, A, T, N};
}

// A smooth, spread-out initial state for integrator checks.
StateVector coherent(int N, complex alpha) {
    StateVector psi(static_cast<std::size_t>(N) + 1);
    complex c = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n <= N; ++n) {
        psi[static_cast<std::size_t>(n)] = c;
        c *= alpha / std::sqrt(double(n + 1));
    }
    return psi.normalized();
}

double distance(const StateVector& a, const StateVector& b) {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += std::norm(a[n] - b[n]);
    return std::sqrt(s);
}

StateVector evolve(const ModelParams& p, StateVector psi, double F, double h, int steps, Integrator scheme) {
    Propagator prop(p, h, scheme);
    StateVector out(psi.size());
    for (int k = 0; k < steps; ++k) {
        prop.step(psi.data(), out.data(), F, h);
        std::swap(psi, out);
    }
    return psi;
}

}  // namespace

TEST(Drive, QuenchProfile) {
    const ModelParams p = params(2.0, 4.0, 10);
    EXPECT_EQ(drive_value(0.25 * p.T, p), 2.0);
    EXPECT_EQ(drive_value(0.75 * p.T, p), 0.0);
    EXPECT_EQ(drive_value(3.25 * p.T, p), 2.0);
    EXPECT_EQ(drive_value(0.5 * p.T, p), 2.0);  // closed at T/2
    EXPECT_EQ(drive_value(0.0, p), 0.0);        // open at 0
    EXPECT_EQ(drive_value(p.T, p), 0.0);
}

TEST(Step, SnapDividesHalfPeriod) {
    for (double T : {0.5, 1.0, 2.0, 10.0, 20.0, 48.0, 3.7}) {
        const double h = snap_step(0.5 * T, 0.0037);
        EXPECT_LE(h, 0.0037 * (1 + 1e-12));
        const double m = 0.5 * T / h;
        EXPECT_NEAR(m, std::round(m), 1e-9);
    }
    EXPECT_DOUBLE_EQ(snap_step(0.25, 1.0), 0.25);
}

TEST(Propagate, UnitaryEigenstatePhase) {
    for (auto scheme : {Integrator::lawson_rk4, Integrator::classical_rk4}) {
        const ModelParams p = params(0.0, 1.0, 12, 0.0);
        Propagator prop(p, 0.01, scheme);
        const int n = 7;
        const StateVector out = propagate_segment(prop, StateVector::fock(12, n), 0.6, 0.01);
        const complex want = std::exp(complex{0.0, -0.5 * p.chi * n * (n - 1) * 0.01});
        EXPECT_NEAR(std::abs(out[n] - want), 0.0, 1e-13);
        EXPECT_NEAR(out.norm2(), 1.0, 1e-13);
    }
}

TEST(Propagate, DampedEigenstateNorm) {
    for (auto scheme : {Integrator::lawson_rk4, Integrator::classical_rk4}) {
        const ModelParams p = params(3.0, 1.0, 12);
        Propagator prop(p, 0.01, scheme);
        for (int n : {1, 4, 12}) {
            // t = 0.7 lies in the undriven half.
            const StateVector out = propagate_segment(prop, StateVector::fock(12, n), 0.7, 0.01);
            EXPECT_NEAR(out.norm2(), std::exp(-p.gamma * n * 0.01), 1e-12);
        }
    }
}

TEST(Propagate, RejectsStraddledDiscontinuity) {
    const ModelParams p = params(1.0, 1.0, 5);
    Propagator prop(p, 0.1);
    EXPECT_THROW(propagate_segment(prop, StateVector::vacuum(5), 0.45, 0.1), ValidationError);
    EXPECT_NO_THROW(propagate_segment(prop, StateVector::vacuum(5), 0.4, 0.1));
    EXPECT_NO_THROW(propagate_segment(prop, StateVector::vacuum(5), 0.5, 0.1));
}

TEST(Propagate, NormNonIncreasing) {
    const ModelParams p = params(2.0, 10.0, 60);
    Propagator prop(p, default_step(p));
    StateVector psi = coherent(60, {2.0, 1.0}), out(psi.size());
    double prev = psi.norm2();
    for (int k = 0; k < 2000; ++k) {
        const double n2 = prop.step(psi.data(), out.data(), p.A, prop.dt());
        EXPECT_LE(n2, prev * (1.0 + 1e-12));
        prev = n2;
        std::swap(psi, out);
    }
}

// Richardson order check: halving h cuts the error over a fixed interval
// by about 2^4, for both schemes, against an h/100 reference.
TEST(Propagate, FourthOrderConvergence) {
    const ModelParams p = params(1.5, 2.0, 40);
    const StateVector psi0 = coherent(40, {1.5, -0.5});
    const StateVector ref = evolve(p, psi0, p.A, 0.0005, 1000, Integrator::lawson_rk4);
    for (auto scheme : {Integrator::lawson_rk4, Integrator::classical_rk4}) {
        const double e1 = distance(evolve(p, psi0, p.A, 0.05, 10, scheme), ref);
        const double e2 = distance(evolve(p, psi0, p.A, 0.025, 20, scheme), ref);
        const double e3 = distance(evolve(p, psi0, p.A, 0.0125, 40, scheme), ref);
        EXPECT_GT(e1 / e2, 12.0);
        EXPECT_LT(e1 / e2, 20.0);
        EXPECT_GT(e2 / e3, 13.0);
        EXPECT_LT(e2 / e3, 19.0);
    }
}

TEST(Propagate, LawsonMatchesClassicalAtSmallStep) {
    const ModelParams p = params(2.0, 2.0, 50);
    const StateVector psi0 = coherent(50, {2.0, 0.0});
    const StateVector a = evolve(p, psi0, p.A, 0.001, 500, Integrator::lawson_rk4);
    const StateVector b = evolve(p, psi0, p.A, 0.001, 500, Integrator::classical_rk4);
    EXPECT_LT(distance(a, b), 1e-9);
}

// d||psi||^2/dt = -gamma <psi|n|psi> with the unnormalized state.
TEST(Propagate, NormDecayMatchesPhotonNumber) {
    const ModelParams p = params(3.0, 2.0, 80);
    const double h = 0.001;
    Propagator prop(p, h);
    std::vector<StateVector> path{coherent(80, {1.0, 2.0})};
    for (int k = 0; k < 400; ++k) {
        StateVector out(path.back().size());
        prop.step(path.back().data(), out.data(), p.A, h);
        path.push_back(out);
    }
    const BandedOperator num = build_number(80);
    for (std::size_t k = 1; k + 1 < path.size(); k += 37) {
        const double deriv = (path[k + 1].norm2() - path[k - 1].norm2()) / (2.0 * h);
        const double want = -p.gamma * expectation_unnormalized(path[k], num).real();
        EXPECT_NEAR(deriv, want, 1e-6 * std::abs(want));
    }
}

TEST(Propagate, UnitaryLimitConservesNorm) {
    // gamma = 0 with a weak drive: the squared norm drifts by less than
    // 1e-10 per period at the default step.
    const ModelParams p = params(0.1, 1.0, 100, 0.0);
    TrajectoryStepper st(p, default_step(p), 1e-3 * default_step(p), 1, StateVector::vacuum(100));
    double prev = st.state().norm2();
    for (int k = 0; k < 200; ++k) {
        st.advance(st.steps_per_period());
        const double n2 = st.state().norm2();
        EXPECT_LT(std::abs(n2 - prev), 1e-10);
        prev = n2;
    }
}

TEST(Propagate, UnitaryLimitDriftShrinksWithStep) {
    // Stronger drive: the per-period drift is larger but falls by at least
    // 2^4 per halving of dt.
    const ModelParams p = params(0.5, 2.0, 100, 0.0);
    auto drift = [&](double h) {
        TrajectoryStepper st(p, h, 1e-3 * h, 1, StateVector::vacuum(100));
        double prev = 1.0, worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            st.advance(st.steps_per_period());
            worst = std::max(worst, std::abs(st.state().norm2() - prev));
            prev = st.state().norm2();
        }
        return worst;
    };
    const double d1 = drift(0.01), d2 = drift(0.005), d3 = drift(0.0025);
    EXPECT_GT(d1 / d2, 16.0);
    EXPECT_GT(d2 / d3, 16.0);
    EXPECT_LT(d3, 1e-10);
}

TEST(JumpTime, PureDecayAnalytic) {
    const ModelParams p = params(0.0, 1.0, 10);
    const double dt = 0.01;
    Propagator prop(p, dt);
    for (int n : {1, 3, 7}) {
        // Pick eta so that the crossing falls strictly inside [t, t+dt].
        const double t = 0.31, frac = 0.37;
        const double eta = std::exp(-p.gamma * n * frac * dt);
        const double ts = locate_jump_time(prop, StateVector::fock(10, n), t, dt, eta, 1e-3 * dt);
        EXPECT_NEAR(ts, t + (-std::log(eta) / (p.gamma * n)), 1e-3 * dt);
    }
}

TEST(JumpTime, ThresholdAtBracketStart) {
    const ModelParams p = params(0.0, 1.0, 5);
    Propagator prop(p, 0.01);
    StateVector psi = StateVector::fock(5, 2);
    for (auto& c : psi.raw()) c *= std::sqrt(0.6);
    EXPECT_EQ(locate_jump_time(prop, psi, 0.2, 0.01, psi.norm2(), 1e-5), 0.2);
}

TEST(JumpTime, NoBracketIsAnError) {
    const ModelParams p = params(0.0, 1.0, 5);
    Propagator prop(p, 0.01);
    EXPECT_THROW(locate_jump_time(prop, StateVector::fock(5, 1), 0.2, 0.01, 0.5, 1e-5), NumericalError);
}

TEST(Jump, SinglePhotonEmission) {
    const StateVector out = apply_jump(StateVector::fock(4, 1));
    EXPECT_EQ(out, StateVector::vacuum(4));
}

TEST(Jump, SuperpositionAction) {
    StateVector psi(4);
    psi[0] = {0.5, 0.0};
    psi[1] = {0.0, 0.5};
    psi[2] = {0.5, 0.5};
    psi.normalize();
    const StateVector out = apply_jump(psi);
    complex w1 = psi[1], w2 = std::sqrt(2.0) * psi[2];
    const double nrm = std::sqrt(std::norm(w1) + std::norm(w2));
    EXPECT_NEAR(std::abs(out[0] - w1 / nrm), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(out[1] - w2 / nrm), 0.0, 1e-15);
    EXPECT_NEAR(out.norm2(), 1.0, 1e-15);
}

TEST(Jump, VacuumIsAnError) {
    EXPECT_THROW(apply_jump(StateVector::vacuum(3)), NumericalError);
}

TEST(Trajectory, UndrivenTwoPhotonDecay) {
    // From |2>: exactly two jumps; first wait ~ Exp(2 gamma), second ~ Exp(gamma).
    const ModelParams p = params(0.0, 1.0, 8);
    TrajectoryConfig cfg;
    cfg.t_transient = 0.0;
    cfg.t_measure = 500.0;
    cfg.dt = 0.05;
    cfg.jump_time_tol = 1e-5;
    cfg.seed = 5;
    const int runs = 10000;
    std::vector<double> first(runs), second(runs);
    std::vector<std::size_t> jumps(runs);
    parallel_for(runs, hardware_threads(), [&](std::size_t j) {
        TrajectoryConfig c = cfg;
        c.trajectory_index = j;
        const TrajectoryRecord r = run_trajectory(p, c, StateVector::fock(8, 2));
        jumps[j] = r.jump_times.size();
        if (r.jump_times.size() == 2) {
            first[j] = r.jump_times[0];
            second[j] = r.jump_times[1] - r.jump_times[0];
        }
    });
    for (auto n : jumps) ASSERT_EQ(n, 2u);
    const double g = p.gamma;
    const double d1 = ks_statistic(first, [g](double x) { return 1.0 - std::exp(-2.0 * g * x); });
    const double d2 = ks_statistic(second, [g](double x) { return 1.0 - std::exp(-g * x); });
    EXPECT_GT(ks_p_value(d1, runs), 0.01);
    EXPECT_GT(ks_p_value(d2, runs), 0.01);
    // The wrong rate is clearly rejected.
    const double dw = ks_statistic(first, [g](double x) { return 1.0 - std::exp(-g * x); });
    EXPECT_LT(ks_p_value(dw, runs), 1e-6);
}

TEST(Trajectory, DarkVacuum) {
    const ModelParams p = params(0.0, 2.0, 20);
    TrajectoryConfig cfg = TrajectoryConfig::with_periods(p, 10, 50);
    const TrajectoryRecord r = run_trajectory(p, cfg);
    EXPECT_TRUE(r.jump_times.empty());
    ASSERT_FALSE(r.strobe_xi.empty());
    for (auto xi : r.strobe_xi) EXPECT_EQ(xi, complex{});
}

TEST(Trajectory, SameSeedSameRecord) {
    const ModelParams p = params(4.0, 20.0, 150);
    TrajectoryConfig cfg = TrajectoryConfig::with_periods(p, 5, 10);
    cfg.seed = 77;
    cfg.trajectory_index = 3;
    const TrajectoryRecord a = run_trajectory(p, cfg);
    const TrajectoryRecord b = run_trajectory(p, cfg);
    ASSERT_GT(a.jump_times.size(), 50u);
    EXPECT_EQ(a.jump_times, b.jump_times);
    EXPECT_EQ(a.jump_thresholds, b.jump_thresholds);
    EXPECT_EQ(a.strobe_xi, b.strobe_xi);
    cfg.trajectory_index = 4;
    EXPECT_NE(run_trajectory(p, cfg).jump_times, a.jump_times);
}

TEST(Trajectory, RecordInvariants) {
    const ModelParams p = params(2.0, 5.0, 100);
    TrajectoryConfig cfg = TrajectoryConfig::with_periods(p, 10, 40);
    const TrajectoryRecord r = run_trajectory(p, cfg);
    ASSERT_EQ(r.jump_times.size(), r.jump_thresholds.size());
    ASSERT_GT(r.jump_times.size(), 10u);
    EXPECT_GT(r.jump_times.front(), cfg.t_transient);
    for (std::size_t k = 1; k < r.jump_times.size(); ++k) EXPECT_GT(r.jump_times[k], r.jump_times[k - 1]);
    for (double e : r.jump_thresholds) {
        EXPECT_GT(e, 0.0);
        EXPECT_LT(e, 1.0);
    }
    EXPECT_EQ(r.strobe_xi.size(), 41u);
}

TEST(Trajectory, ThresholdsAreExponentialInLog) {
    // zeta = -ln eta over >= 10^4 jumps follows exp(-zeta).
    const ModelParams p = params(3.0, 10.0, 120);
    std::vector<double> zeta;
    for (std::uint64_t j = 0; zeta.size() < 12000; ++j) {
        TrajectoryConfig cfg = TrajectoryConfig::with_periods(p, 5, 60);
        cfg.trajectory_index = j;
        const TrajectoryRecord r = run_trajectory(p, cfg);
        for (double e : r.jump_thresholds) zeta.push_back(-std::log(e));
    }
    const double d = ks_statistic(zeta, [](double z) { return 1.0 - std::exp(-z); });
    EXPECT_GT(ks_p_value(d, zeta.size()), 0.01);
}

TEST(Trajectory, TruncationGuardFlags) {
    const ModelParams p = params(4.0, 20.0, 30);
    const TrajectoryRecord r = run_trajectory(p, TrajectoryConfig::with_periods(p, 2, 3));
    EXPECT_TRUE(r.truncation_warning);
    EXPECT_GT(r.max_top_band_fraction, 1e-6);
    const ModelParams q = params(0.1, 1.0, 60);
    EXPECT_FALSE(run_trajectory(q, TrajectoryConfig::with_periods(q, 20, 20)).truncation_warning);
}

TEST(Trajectory, ConfigValidation) {
    const ModelParams p = params(1.0, 1.0, 10);
    TrajectoryConfig cfg = TrajectoryConfig::with_periods(p, 1, 1);
    cfg.dt = 0.03;  // 0.5 / 0.03 is not an integer
    EXPECT_THROW(run_trajectory(p, cfg), ValidationError);
    cfg.dt = 0.01;
    cfg.jump_time_tol = 0.02;
    EXPECT_THROW(run_trajectory(p, cfg), ValidationError);
    cfg.jump_time_tol = 0.0;
    StateVector bad = StateVector::vacuum(10);
    bad[0] = 0.5;
    EXPECT_THROW(run_trajectory(p, cfg, bad), ValidationError);
}

TEST(Trajectory, JumpsMatchStateDecayBetweenEvents) {
    // Replaying a record: the squared norm reaches each eta_k at t_k.
    const ModelParams p = params(1.0, 4.0, 60);
    const double dt = default_step(p);
    TrajectoryStepper st(p, dt, 1e-6 * dt, 9, StateVector::vacuum(60));
    std::size_t seen = 0;
    for (int k = 0; k < 20000 && seen < 20; ++k) {
        const StateVector before = st.state();
        const double eta = st.threshold();
        const double t0 = st.time();
        st.step();
        if (!st.last_jumps().empty()) {
            const auto& j = st.last_jumps().front();
            EXPECT_EQ(j.threshold, eta);
            Propagator prop(p, dt);
            StateVector at(before.size());
            if (j.time > t0) prop.step(before.data(), at.data(), drive_value(t0 + 0.5 * dt, p), j.time - t0);
            else at = before;
            EXPECT_NEAR(at.norm2(), eta, 1e-5 * eta);
            ++seen;
        }
    }
    EXPECT_EQ(seen, 20u);
}
