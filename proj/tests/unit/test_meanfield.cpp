#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kerr/meanfield.hpp"

using namespace kerr;

namespace {

// Newton iteration on the stroboscopic map with a finite-difference
// Jacobian in (Re, Im).
complex strobe_fixed_point(const ModelParams& p, complex guess) {
    auto map = [&](complex x) { return mf_stroboscopic(x, p, 1, 1)[0]; };
    complex x = guess;
    for (int it = 0; it < 30; ++it) {
        const complex g = map(x) - x;
        if (std::abs(g) < 1e-13) break;
        const double h = 1e-7;
        const complex gr = (map(x + h) - (x + h)) - g;
        const complex gi = (map(x + complex{0.0, h}) - (x + complex{0.0, h})) - g;
        const double a = gr.real() / h, b = gi.real() / h, c = gr.imag() / h, d = gi.imag() / h;
        const double det = a * d - b * c;
        x -= complex{(d * g.real() - b * g.imag()) / det, (-c * g.real() + a * g.imag()) / det};
    }
    return x;
}

}  // namespace

TEST(MeanField, RhsExamples) {
    const ModelParams p{0.008, 0.05, 2.0, 10.0, 100};
    EXPECT_EQ(mf_rhs_const({0.0, 0.0}, 2.0, p), complex(2.0, 0.0));
    const complex r = mf_rhs_const({1.0, 0.0}, 0.0, p);
    EXPECT_NEAR(r.real(), -0.025, 1e-16);
    EXPECT_NEAR(r.imag(), -0.008, 1e-16);
    EXPECT_EQ(mf_rhs({0.0, 0.0}, 2.5, p), complex(2.0, 0.0));
    EXPECT_EQ(mf_rhs({0.0, 0.0}, 7.5, p), complex(0.0, 0.0));
}

TEST(MeanField, LinearLimitClosedForm) {
    // chi = 0 with constant F: xi(t) = 2F/gamma + (xi0 - 2F/gamma) e^{-gamma t/2}.
    const ModelParams p{0.0, 0.05, 1.5, 8.0, 100};
    const double dt = default_mf_step(p);
    MeanFieldStepper s(p, {0.3, -0.2}, dt);
    complex exact{0.3, -0.2};
    for (int half = 0; half < 20; ++half) {
        const double F = (half % 2 == 0) ? p.A : 0.0;
        const double tau = 0.5 * p.T;
        const complex fix = 2.0 * F / p.gamma;
        exact = fix + (exact - fix) * std::exp(-0.5 * p.gamma * tau);
        s.advance(s.steps_per_period() / 2);
        EXPECT_NEAR(std::abs(s.value() - exact), 0.0, 1e-8);
    }
}

TEST(MeanField, UndrivenEnvelope) {
    const ModelParams p{0.008, 0.05, 0.0, 10.0, 100};
    const MeanFieldPath path = mf_trajectory({3.0, 4.0}, p, 100.0, default_mf_step(p), 100);
    for (std::size_t k = 0; k < path.times.size(); ++k)
        EXPECT_NEAR(std::abs(path.values[k]), 5.0 * std::exp(-0.5 * p.gamma * path.times[k]), 1e-8);
    EXPECT_DOUBLE_EQ(path.times.back(), 100.0);
}

TEST(MeanField, StroboscopicTimeTranslation) {
    const ModelParams p{0.008, 0.05, 2.0, 10.0, 100};
    const auto a = mf_stroboscopic({0.1, 0.0}, p, 10, 20);
    const auto b = mf_stroboscopic({0.1, 0.0}, p, 15, 15);
    for (std::size_t k = 0; k < b.size(); ++k) EXPECT_EQ(a[k + 5], b[k]);
}

TEST(MeanField, SmallDriveConvergesToFixedPoint) {
    const ModelParams p{0.008, 0.05, 0.1, 1.0, 100};
    const complex fix = strobe_fixed_point(p, {0.0, 0.0});
    const auto seq = mf_stroboscopic({1e-6, 0.0}, p, 2000, 10);
    for (auto x : seq) EXPECT_NEAR(std::abs(x - fix), 0.0, 1e-8);
    EXPECT_EQ(detect_period(seq, 4, 1e-8), 1);
}

TEST(MeanField, ChaoticPointIsAperiodic) {
    const ModelParams p{0.008, 0.05, 4.0, 20.0, 300};
    const auto seq = mf_stroboscopic({1e-6, 0.0}, p, 500, 400);
    EXPECT_EQ(detect_period(seq, 16, 1e-6), 0);
}

TEST(MeanField, DetectPeriodExamples) {
    std::vector<complex> two;
    for (int k = 0; k < 20; ++k) two.push_back(k % 2 ? complex{1.0, 0.0} : complex{-1.0, 0.0});
    EXPECT_EQ(detect_period(two, 8, 1e-9), 2);
    EXPECT_EQ(detect_period(std::vector<complex>(10, {0.5, 0.5}), 8, 1e-9), 1);
    std::vector<complex> ramp;
    for (int k = 0; k < 20; ++k) ramp.push_back(double(k));
    EXPECT_EQ(detect_period(ramp, 8, 1e-9), 0);
}

TEST(MeanField, RejectsMisalignedStep) {
    const ModelParams p{0.008, 0.05, 1.0, 1.0, 100};
    EXPECT_THROW(MeanFieldStepper(p, {}, 0.03), ValidationError);
}

TEST(Bifurcation, ZeroDriveCollapsesToOrigin) {
    const ModelParams p{0.008, 0.05, 0.0, 10.0, 100};
    BifurcationOptions opt;
    opt.samples_per_A = 20;
    const auto pts = bifurcation_scan(p, {0.0}, opt);
    EXPECT_EQ(pts.size(), 20u * (opt.random_initial_conditions + 1));
    for (const auto& bp : pts) {
        EXPECT_EQ(bp.A, 0.0);
        EXPECT_LT(std::abs(bp.xi), 1e-8);
    }
}

TEST(Bifurcation, DeterministicAndThreadIndependent) {
    const ModelParams p{0.008, 0.05, 0.0, 10.0, 100};
    BifurcationOptions opt;
    opt.transient_periods = 50;
    opt.samples_per_A = 10;
    opt.seed = 9;
    const std::vector<double> grid{0.5, 1.0, 2.0, 3.0};
    const auto a = bifurcation_scan(p, grid, opt);
    opt.threads = 3;
    const auto b = bifurcation_scan(p, grid, opt);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].xi, b[k].xi);
        EXPECT_EQ(a[k].sample_index, b[k].sample_index);
    }
}
