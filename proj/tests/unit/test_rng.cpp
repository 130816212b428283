#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "kerr/rng.hpp"
#include "kerr/stats.hpp"

using namespace kerr;

TEST(DeriveSeed, Deterministic) {
    EXPECT_EQ(derive_seed(1, 2, 3, StreamTag::jump_threshold), derive_seed(1, 2, 3, StreamTag::jump_threshold));
    static_assert(derive_seed(7, 0, 0, StreamTag::point) == derive_seed(7, 0, 0, StreamTag::point));
}

TEST(DeriveSeed, SingleArgumentChangesNeverCollide) {
    // 10^6 probes: four families of 250000, each varying one argument.
    std::vector<std::uint64_t> all;
    all.reserve(1000001);
    const std::uint64_t base = derive_seed(42, 17, 5, StreamTag::jump_threshold);
    all.push_back(base);
    for (std::uint64_t k = 0; k < 250000; ++k) {
        const std::uint64_t v[] = {
            derive_seed(42 + 1 + k, 17, 5, StreamTag::jump_threshold),
            derive_seed(42, 17 + 1 + k, 5, StreamTag::jump_threshold),
            derive_seed(42, 17, 5 + 1 + k, StreamTag::jump_threshold),
            derive_seed(42 ^ ((k + 1) << 20), 17, 5, StreamTag::jump_threshold),
        };
        for (auto x : v) {
            ASSERT_NE(x, base);
            all.push_back(x);
        }
    }
    for (auto tag : {StreamTag::perturbation, StreamTag::initial_condition, StreamTag::point})
        EXPECT_NE(derive_seed(42, 17, 5, tag), base);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
}

TEST(DeriveSeed, Avalanche) {
    // Flipping one input bit flips about half the output bits.
    double total = 0.0;
    int trials = 0;
    for (std::uint64_t m = 0; m < 200; ++m)
        for (int bit = 0; bit < 64; bit += 7) {
            const auto a = derive_seed(m, 3, 9, StreamTag::perturbation);
            const auto b = derive_seed(m ^ (1ULL << bit), 3, 9, StreamTag::perturbation);
            total += std::popcount(a ^ b);
            ++trials;
        }
    EXPECT_NEAR(total / trials, 32.0, 0.5);
}

TEST(DeriveSeed, UniformityChiSquare) {
    // 10^6 outputs over consecutive trajectory indices, 1024 buckets of the
    // top and of the bottom 10 bits. Critical value for 1023 dof at
    // p = 1e-4 is about 1194.
    const int buckets = 1024;
    std::vector<double> hi(buckets, 0.0), lo(buckets, 0.0);
    const int n = 1000000;
    for (int k = 0; k < n; ++k) {
        const auto v = derive_seed(2024, 11, static_cast<std::uint64_t>(k), StreamTag::jump_threshold);
        hi[v >> 54] += 1.0;
        lo[v & 1023] += 1.0;
    }
    const double expect = double(n) / buckets;
    double c_hi = 0.0, c_lo = 0.0;
    for (int b = 0; b < buckets; ++b) {
        c_hi += (hi[b] - expect) * (hi[b] - expect) / expect;
        c_lo += (lo[b] - expect) * (lo[b] - expect) / expect;
    }
    EXPECT_LT(c_hi, 1194.0);
    EXPECT_LT(c_lo, 1194.0);
    EXPECT_GT(c_hi, 860.0);  // not suspiciously regular either
    EXPECT_GT(c_lo, 860.0);
}

TEST(CounterRng, ReproducibleAndPositional) {
    CounterRng a(99), b(99);
    for (int k = 0; k < 1000; ++k) ASSERT_EQ(a(), b());
    EXPECT_EQ(a.counter(), 1000u);
    CounterRng c(100);
    EXPECT_NE(CounterRng(99)(), c());
}

TEST(CounterRng, UniformOpenInterval) {
    CounterRng r(1);
    double mn = 1.0, mx = 0.0, sum = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = r.uniform_open();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.003);
    const double d = ks_statistic([&] {
        CounterRng q(2);
        std::vector<double> v(20000);
        for (auto& x : v) x = q.uniform_open();
        return v;
    }(), [](double x) { return x; });
    EXPECT_GT(ks_p_value(d, 20000), 0.001);
}

TEST(CounterRng, ComplexGaussianMoments) {
    CounterRng r(3);
    const int n = 200000;
    double m2 = 0.0, re = 0.0, im = 0.0, re2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const auto z = r.complex_gaussian();
        m2 += std::norm(z);
        re += z.real();
        im += z.imag();
        re2 += z.real() * z.real();
    }
    EXPECT_NEAR(m2 / n, 1.0, 0.01);
    EXPECT_NEAR(re / n, 0.0, 0.005);
    EXPECT_NEAR(im / n, 0.0, 0.005);
    EXPECT_NEAR(re2 / n, 0.5, 0.006);
}

TEST(CounterRng, WorksWithStdDistributions) {
    CounterRng r(4);
    std::uniform_int_distribution<int> d(0, 9);
    std::vector<int> counts(10, 0);
    for (int k = 0; k < 100000; ++k) ++counts[d(r)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}
