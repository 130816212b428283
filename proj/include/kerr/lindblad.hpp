#pragma once

// Dense Lindblad reference integrator at small truncation:
//
//   drho/dt = -i[H(t), rho] + gamma (a rho a^+ - {n, rho}/2)
//
// The commutator uses the tridiagonal H directly, so one RHS costs O(N^2).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/parallel.hpp"
#include "kerr/stats.hpp"

namespace kerr {

inline constexpr int kOracleMaxN = 60;

using DenseMatrix = Eigen::MatrixXcd;

struct DensityTolerance {
    double hermiticity = 1e-10;
    double trace = 1e-8;
    double positivity = 1e-8;
};

class DensityMatrix {
  public:
    DensityMatrix() = default;
    explicit DensityMatrix(DenseMatrix rho) : rho_(std::move(rho)) {
        require(rho_.rows() == rho_.cols() && rho_.rows() >= 1, "density matrix must be square");
    }

    static DensityMatrix pure(const StateVector& psi) {
        const double n2 = psi.norm2();
        if (!(n2 > 0.0)) throw NumericalError("pure state of zero norm");
        Eigen::Map<const Eigen::VectorXcd> v(psi.data().data(), static_cast<Eigen::Index>(psi.size()));
        return DensityMatrix(DenseMatrix(v * v.adjoint() / n2));
    }

    static DensityMatrix fock(int N, int n) { return pure(StateVector::fock(N, n)); }

    const DenseMatrix& matrix() const noexcept { return rho_; }
    DenseMatrix& matrix() noexcept { return rho_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(rho_.rows()); }

    complex trace() const { return rho_.trace(); }
    double purity() const { return (rho_ * rho_).trace().real(); }
    double hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        const DenseMatrix h = 0.5 * (rho_ + rho_.adjoint());
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    double mean_photon_number() const {
        double s = 0.0;
        for (Eigen::Index n = 0; n < rho_.rows(); ++n) s += static_cast<double>(n) * rho_(n, n).real();
        return s;
    }

    complex mean_field_amplitude() const {
        complex s{};
        for (Eigen::Index n = 0; n + 1 < rho_.rows(); ++n)
            s += std::sqrt(static_cast<double>(n + 1)) * rho_(n + 1, n);
        return s;
    }

    bool valid(const DensityTolerance& tol = {}) const {
        return hermiticity_error() <= tol.hermiticity && std::abs(trace() - 1.0) <= tol.trace &&
               min_eigenvalue() >= -tol.positivity;
    }

    /// One "i,j,re,im" row per element, full precision.
    void write_csv(std::ostream& os) const {
        os << "i,j,re,im\n";
        char buf[128];
        for (Eigen::Index i = 0; i < rho_.rows(); ++i)
            for (Eigen::Index j = 0; j < rho_.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%td,%td,%.17e,%.17e\n", i, j, rho_(i, j).real(), rho_(i, j).imag());
                os << buf;
            }
    }

  private:
    DenseMatrix rho_;
};

namespace detail {

// out = H rho - rho H for tridiagonal H.
inline void banded_commutator(const BandedOperator& H, const DenseMatrix& rho, DenseMatrix& out) {
    const Eigen::Index d = rho.rows();
    out.setZero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            complex hr = H.diag[ui] * rho(i, j);
            if (i + 1 < d) hr += H.super[ui] * rho(i + 1, j);
            if (i > 0) hr += H.sub[ui - 1] * rho(i - 1, j);
            complex rh = rho(i, j) * H.diag[uj];
            if (j > 0) rh += rho(i, j - 1) * H.super[uj - 1];
            if (j + 1 < d) rh += rho(i, j + 1) * H.sub[uj];
            out(i, j) = hr - rh;
        }
    }
}

}  // namespace detail

/// RHS with a fixed drive value.
inline DenseMatrix lindblad_rhs_const(const DenseMatrix& rho, double F, const ModelParams& p) {
    const Eigen::Index d = rho.rows();
    require(d == static_cast<Eigen::Index>(p.dim()) && rho.cols() == d, "density matrix dimension mismatch");
    const BandedOperator H = build_hamiltonian(p, F);
    DenseMatrix out;
    detail::banded_commutator(H, rho, out);
    out *= complex{0.0, -1.0};
    if (p.gamma > 0.0) {
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index i = 0; i < d; ++i) {
                complex jump{};
                if (i + 1 < d && j + 1 < d)
                    jump = std::sqrt(static_cast<double>((i + 1) * (j + 1))) * rho(i + 1, j + 1);
                out(i, j) += p.gamma * (jump - 0.5 * static_cast<double>(i + j) * rho(i, j));
            }
    }
    return out;
}

inline DenseMatrix lindblad_rhs(const DensityMatrix& rho, double t, const ModelParams& p) {
    return lindblad_rhs_const(rho.matrix(), drive_value(t, p), p);
}

struct LindbladPath {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    double dt_used = 0.0;
    int halvings = 0;
};

namespace detail {

inline bool rk4_segment(DenseMatrix& rho, const ModelParams& p, std::int64_t g0, std::int64_t g1, double dt,
                        std::int64_t steps_per_half) {
    for (std::int64_t g = g0; g < g1; ++g) {
        const double F = ((g / steps_per_half) % 2) == 0 ? p.A : 0.0;
        const DenseMatrix k1 = lindblad_rhs_const(rho, F, p);
        const DenseMatrix k2 = lindblad_rhs_const(rho + 0.5 * dt * k1, F, p);
        const DenseMatrix k3 = lindblad_rhs_const(rho + 0.5 * dt * k2, F, p);
        const DenseMatrix k4 = lindblad_rhs_const(rho + dt * k3, F, p);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!rho.allFinite()) return false;
    }
    return true;
}

}  // namespace detail

/// RK4 on a grid dividing T/2. The state is checked against the density
/// tolerances at every requested sample time; a violated segment is redone
/// from the last good sample with dt halved (up to `max_halvings` times).
inline LindbladPath integrate_lindblad(const DensityMatrix& rho0, const ModelParams& p, std::span<const double> sample_times,
                                       double dt, const DensityTolerance& tol = {}, int max_halvings = 4) {
    p.validate();
    if (p.N > kOracleMaxN) throw ValidationError("oracle truncation too large: N must be <= 60");
    require(rho0.dim() == p.dim(), "initial density matrix dimension mismatch");
    require(rho0.valid(tol), "initial density matrix violates invariants");
    LindbladPath path;
    path.dt_used = dt;
    DenseMatrix rho = rho0.matrix();
    double t_done = 0.0;
    for (double ts : sample_times) {
        require(ts >= t_done - 1e-12, "sample times must be non-decreasing");
        int halvings = path.halvings;
        for (;;) {
            const double h = dt / std::ldexp(1.0, halvings);
            const double q = 0.5 * p.T;
            const double m = std::round(q / h);
            require(m >= 1.0 && std::abs(m * h - q) <= 1e-9 * q, "dt must divide T/2 exactly");
            const auto sph = static_cast<std::int64_t>(m);
            const std::int64_t g0 = grid_steps(t_done, h);
            const std::int64_t g1 = grid_steps(ts, h);
            DenseMatrix trial = rho;
            if (detail::rk4_segment(trial, p, g0, g1, h, sph)) {
                DensityMatrix cand(trial);
                if (cand.valid(tol)) {
                    rho = std::move(trial);
                    path.halvings = halvings;
                    path.dt_used = h;
                    break;
                }
            }
            if (++halvings > max_halvings)
                throw NumericalError("Lindblad integration violates density-matrix invariants");
        }
        t_done = ts;
        path.times.push_back(ts);
        path.states.emplace_back(rho);
    }
    return path;
}

/// Path on the uniform grid 0, h, 2h, ... up to t_end, sampled every `stride` steps.
inline LindbladPath integrate_lindblad(const DensityMatrix& rho0, const ModelParams& p, double t_end, double dt,
                                       int stride = 1, const DensityTolerance& tol = {}) {
    require(stride >= 1, "stride must be >= 1");
    std::vector<double> ts;
    const std::int64_t steps = grid_steps(t_end, dt);
    for (std::int64_t k = 0; k <= steps; k += stride) ts.push_back(static_cast<double>(k) * dt);
    if (steps % stride != 0) ts.push_back(static_cast<double>(steps) * dt);
    return integrate_lindblad(rho0, p, ts, dt, tol);
}

/// (1/M) sum |psi_j><psi_j| over normalized states, rescaled to unit trace.
inline DensityMatrix ensemble_density(std::span<const StateVector> states) {
    require(!states.empty(), "ensemble_density: empty set");
    const auto d = static_cast<Eigen::Index>(states.front().size());
    DenseMatrix rho = DenseMatrix::Zero(d, d);
    for (const auto& s : states) {
        require(static_cast<Eigen::Index>(s.size()) == d, "ensemble states differ in dimension");
        const double n2 = s.norm2();
        if (!(n2 > 0.0)) throw NumericalError("ensemble state of zero norm");
        Eigen::Map<const Eigen::VectorXcd> v(s.data().data(), d);
        rho.noalias() += (v * v.adjoint()) / n2;
    }
    rho /= rho.trace().real();
    return DensityMatrix(std::move(rho));
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.dim() != b.dim()) throw ValidationError("trace_distance: dimension mismatch");
    const DenseMatrix diff = a.matrix() - b.matrix();
    const DenseMatrix h = 0.5 * (diff + diff.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct OracleCheckOptions {
    ModelParams params{0.008, 0.05, 0.5, 2.0, 30};
    std::vector<std::size_t> ensemble_sizes{100, 1000, 10000};
    std::vector<double> probe_times{4.0, 8.0, 16.0, 32.0, 64.0};
    double oracle_dt = 0.01;
    double mcwf_dt = 0.0;  ///< 0 = engine default
    std::uint64_t seed = 20240601;
    std::uint64_t point_index = 0;
    double bound_factor = 5.0;  ///< D <= bound_factor / sqrt(M)
    double slope_target = -0.5;
    double slope_tolerance = 0.15;
    unsigned threads = 1;
};

struct OracleCheckResult {
    ModelParams params;
    std::vector<std::size_t> ensemble_sizes;
    std::vector<double> probe_times;
    std::vector<std::vector<double>> distance;  ///< [size][probe]
    std::vector<double> mean_distance;          ///< per size, averaged over probes
    double slope = 0.0;
    double slope_stderr = 0.0;
    bool bound_ok = false;
    bool slope_ok = false;
    bool passed() const noexcept { return bound_ok && slope_ok; }
};

/// Trajectory ensembles of nested sizes (the first M of the largest set)
/// against the dense solution at each probe time.
inline OracleCheckResult oracle_check(const OracleCheckOptions& opt) {
    require(!opt.ensemble_sizes.empty() && !opt.probe_times.empty(), "oracle check needs sizes and probe times");
    for (std::size_t i = 1; i < opt.ensemble_sizes.size(); ++i)
        require(opt.ensemble_sizes[i] > opt.ensemble_sizes[i - 1], "ensemble sizes must increase");
    const ModelParams& p = opt.params;
    OracleCheckResult res;
    res.params = p;
    res.ensemble_sizes = opt.ensemble_sizes;
    res.probe_times = opt.probe_times;

    const LindbladPath exact = integrate_lindblad(DensityMatrix::fock(p.N, 0), p, opt.probe_times, opt.oracle_dt);

    const std::size_t m_max = opt.ensemble_sizes.back();
    TrajectoryConfig tc = TrajectoryConfig::defaults(p);
    if (opt.mcwf_dt > 0.0) tc.dt = opt.mcwf_dt;
    tc.jump_time_tol = 0.0;
    tc.seed = opt.seed;
    tc.point_index = opt.point_index;
    std::vector<std::vector<StateVector>> samples(m_max);
    parallel_for(m_max, opt.threads, [&](std::size_t j) {
        TrajectoryConfig c = tc;
        c.trajectory_index = j;
        samples[j] = sample_states(p, c, StateVector::vacuum(p.N), opt.probe_times);
    });

    const std::size_t np = opt.probe_times.size();
    res.distance.assign(opt.ensemble_sizes.size(), std::vector<double>(np, 0.0));
    res.bound_ok = true;
    std::vector<StateVector> at_probe;
    for (std::size_t k = 0; k < np; ++k) {
        at_probe.clear();
        for (std::size_t j = 0; j < m_max; ++j) at_probe.push_back(samples[j][k]);
        for (std::size_t s = 0; s < opt.ensemble_sizes.size(); ++s) {
            const std::size_t M = opt.ensemble_sizes[s];
            const DensityMatrix est = ensemble_density(std::span(at_probe).first(M));
            const double D = trace_distance(est, exact.states[k]);
            res.distance[s][k] = D;
            if (D > opt.bound_factor / std::sqrt(static_cast<double>(M))) res.bound_ok = false;
        }
    }
    std::vector<double> lx, ly;
    for (std::size_t s = 0; s < opt.ensemble_sizes.size(); ++s) {
        double mean = 0.0;
        for (double d : res.distance[s]) mean += d;
        mean /= static_cast<double>(np);
        res.mean_distance.push_back(mean);
        lx.push_back(std::log(static_cast<double>(opt.ensemble_sizes[s])));
        ly.push_back(std::log(mean));
    }
    if (lx.size() >= 2) {
        const LinearFit f = linear_regression(lx, ly);
        res.slope = f.slope;
        res.slope_stderr = f.slope_stderr;
        res.slope_ok = std::abs(f.slope - opt.slope_target) <= opt.slope_tolerance;
    }
    return res;
}

}  // namespace kerr
