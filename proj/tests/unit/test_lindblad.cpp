#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "kerr/lindblad.hpp"
#include "kerr/meanfield.hpp"
#include "kerr/parallel.hpp"
#include "kerr/rng.hpp"

using namespace kerr;

namespace {

DensityMatrix random_density(int N, std::uint64_t seed, int rank = 3) {
    CounterRng rng(seed);
    std::vector<StateVector> states;
    for (int r = 0; r < rank; ++r) {
        StateVector psi(static_cast<std::size_t>(N) + 1);
        for (std::size_t n = 0; n < psi.size(); ++n) psi[n] = rng.complex_gaussian();
        states.push_back(psi.normalized());
    }
    return ensemble_density(states);
}

}  // namespace

TEST(LindbladRhs, UndrivenVacuumIsStationary) {
    const ModelParams p{0.008, 0.05, 0.0, 2.0, 10};
    EXPECT_EQ(lindblad_rhs_const(DensityMatrix::fock(10, 0).matrix(), 0.0, p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LindbladRhs, TracelessAndHermitian) {
    const ModelParams p{0.008, 0.05, 2.0, 2.0, 20};
    for (std::uint64_t s = 0; s < 10; ++s) {
        const DensityMatrix rho = random_density(20, s);
        const DenseMatrix d = lindblad_rhs_const(rho.matrix(), p.A, p);
        EXPECT_LT(std::abs(d.trace()), 1e-12);
        EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(LindbladRhs, MatchesDenseConstruction) {
    // -i[H, rho] + gamma (a rho a^dag - {n, rho}/2) built from dense matrices.
    const ModelParams p{0.01, 0.07, 1.3, 2.0, 12};
    const int d = 13;
    DenseMatrix a = DenseMatrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
    const DenseMatrix ad = a.adjoint();
    const DenseMatrix H = 0.5 * p.chi * ad * ad * a * a + complex{0.0, p.A} * (ad - a);
    const DenseMatrix rho = random_density(12, 77).matrix();
    const DenseMatrix nn = ad * a;
    const DenseMatrix want = complex{0.0, -1.0} * (H * rho - rho * H) + p.gamma * (a * rho * ad - 0.5 * (nn * rho + rho * nn));
    EXPECT_LT((lindblad_rhs_const(rho, p.A, p) - want).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Lindblad, FockDecay) {
    const ModelParams p{0.008, 0.05, 0.0, 2.0, 20};
    const int n0 = 5;
    const LindbladPath path = integrate_lindblad(DensityMatrix::fock(20, n0), p, 40.0, 0.01, 100);
    ASSERT_EQ(path.times.size(), 41u);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        EXPECT_NEAR(path.states[k].mean_photon_number(), n0 * std::exp(-p.gamma * path.times[k]), 1e-6);
        EXPECT_TRUE(path.states[k].valid());
    }
    EXPECT_EQ(path.halvings, 0);
}

TEST(Lindblad, UnitaryLimitConservesPurity) {
    const ModelParams p{0.008, 0.0, 1.0, 2.0, 30};
    const LindbladPath path = integrate_lindblad(DensityMatrix::fock(30, 0), p, 4.0, 0.01, 50);
    for (const auto& rho : path.states) EXPECT_NEAR(rho.purity(), 1.0, 1e-8);
    for (const auto& rho : path.states) EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
}

TEST(Lindblad, EarlyTimeMeanFieldAgreement) {
    const ModelParams p{0.008, 0.05, 1.0, 2.0, 30};
    const LindbladPath path = integrate_lindblad(DensityMatrix::fock(30, 0), p, 0.5, 0.01, 10);
    const MeanFieldPath mf = mf_trajectory({0.0, 0.0}, p, 0.5, 0.01, 10);
    ASSERT_EQ(path.times.size(), mf.times.size());
    for (std::size_t k = 0; k < path.times.size(); ++k)
        EXPECT_LT(std::abs(path.states[k].mean_field_amplitude() - mf.values[k]), 1e-3);
}

TEST(Lindblad, Preconditions) {
    const ModelParams big{0.008, 0.05, 1.0, 2.0, 61};
    EXPECT_THROW(integrate_lindblad(DensityMatrix::fock(61, 0), big, 1.0, 0.01), ValidationError);
    const ModelParams p{0.008, 0.05, 1.0, 1.0, 5};
    EXPECT_THROW(integrate_lindblad(DensityMatrix::fock(5, 0), p, 1.0, 0.03), ValidationError);
    EXPECT_THROW(integrate_lindblad(DensityMatrix::fock(4, 0), p, 1.0, 0.01), ValidationError);
    DenseMatrix bad = DensityMatrix::fock(5, 0).matrix();
    bad(0, 0) = 2.0;
    EXPECT_THROW(integrate_lindblad(DensityMatrix(bad), p, 1.0, 0.01), ValidationError);
}

TEST(Ensemble, Examples) {
    const std::vector<StateVector> same{StateVector::vacuum(3), StateVector::vacuum(3)};
    EXPECT_LT((ensemble_density(same).matrix() - DensityMatrix::fock(3, 0).matrix()).cwiseAbs().maxCoeff(), 1e-15);
    const std::vector<StateVector> mix{StateVector::vacuum(3), StateVector::fock(3, 1)};
    const DensityMatrix rho = ensemble_density(mix);
    EXPECT_NEAR(rho.matrix()(0, 0).real(), 0.5, 1e-15);
    EXPECT_NEAR(rho.matrix()(1, 1).real(), 0.5, 1e-15);
    EXPECT_NEAR(rho.purity(), 0.5, 1e-15);
    StateVector scaled = StateVector::fock(3, 1);
    for (auto& c : scaled.raw()) c *= 3.0;
    const std::vector<StateVector> unnorm{StateVector::vacuum(3), scaled};
    EXPECT_LT((ensemble_density(unnorm).matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(ensemble_density(std::vector<StateVector>{}), ValidationError);
}

TEST(TraceDistance, Examples) {
    const DensityMatrix v = DensityMatrix::fock(3, 0), o = DensityMatrix::fock(3, 1);
    EXPECT_NEAR(trace_distance(v, v), 0.0, 1e-15);
    EXPECT_NEAR(trace_distance(v, o), 1.0, 1e-15);
    const DensityMatrix mix = ensemble_density(std::vector<StateVector>{StateVector::vacuum(3), StateVector::fock(3, 1)});
    EXPECT_NEAR(trace_distance(v, mix), 0.5, 1e-15);
    EXPECT_THROW(trace_distance(v, DensityMatrix::fock(4, 0)), ValidationError);
}

TEST(DensityMatrix, InvariantsAndCsv) {
    const DensityMatrix rho = random_density(6, 3);
    EXPECT_TRUE(rho.valid());
    EXPECT_LT(rho.hermiticity_error(), 1e-15);
    EXPECT_GT(rho.min_eigenvalue(), -1e-12);
    std::ostringstream os;
    rho.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("i,j,re,im\n", 0), 0u);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 49);
}

TEST(OracleCheck, ConvergesAtSeveralDrives) {
    // D <= 5/sqrt(M) at every (size, probe) for three parameter points.
    for (double A : {0.2, 0.5, 1.0}) {
        OracleCheckOptions opt;
        opt.params = ModelParams{0.008, 0.05, A, 2.0, 15};
        opt.ensemble_sizes = {50, 200, 800};
        opt.probe_times = {4.0, 8.0};
        opt.seed = 11;
        opt.threads = hardware_threads();
        const OracleCheckResult r = oracle_check(opt);
        EXPECT_TRUE(r.bound_ok) << "A=" << A;
        for (const auto& row : r.distance)
            for (double d : row) EXPECT_GE(d, 0.0);
    }
}

TEST(OracleCheck, Validation) {
    OracleCheckOptions opt;
    opt.ensemble_sizes = {100, 50};
    EXPECT_THROW(oracle_check(opt), ValidationError);
    opt.ensemble_sizes.clear();
    EXPECT_THROW(oracle_check(opt), ValidationError);
}
