#include <cmath>

#include <gtest/gtest.h>

#include "sfbm/oracles.hpp"

using namespace sfbm;

namespace {

// int_0^inf ((1+u)^p - u^p)^2 du by a midpoint sum after u = w^4 / (1-w)^2.
double mvn_integral_brute(double H, long N) {
    const double p = H - 0.5;
    double acc = 0.0;
    const double h = 1.0 / static_cast<double>(N);
    for (long k = 0; k < N; ++k) {
        const double w = (k + 0.5) * h;
        const double u = std::pow(w, 4) / ((1 - w) * (1 - w));
        const double du = 4 * std::pow(w, 3) / ((1 - w) * (1 - w)) + 2 * std::pow(w, 4) / std::pow(1 - w, 3);
        const double d = std::pow(1 + u, p) - std::pow(u, p);
        acc += d * d * du * h;
    }
    return acc + 1.0 / (2.0 * H);
}

} // namespace

TEST(Oracles, CalibrationMatchesGammaClosedForm) {
    for (double H : {0.1, 0.3, 0.45, 0.55, 0.7, 0.9}) {
        const double closed = std::tgamma(2 * H + 1) * std::sin(M_PI * H) / std::pow(std::tgamma(H + 0.5), 2);
        const Calibration c = calibrate(H);
        EXPECT_NEAR(c.c_mvn * c.c_mvn, closed, 1e-9) << "H=" << H;
        EXPECT_NEAR(calibrate_C(H), mvn_constant(H), 1e-9);
        EXPECT_NEAR(calibrate_sfbm_C(H), mvn_constant(H) / std::sqrt(2.0), 1e-9);
    }
}

TEST(Oracles, CalibrationMatchesBruteForceRiemann) {
    const double H = 0.7;
    const double brute = mvn_integral_brute(H, 10000000);
    EXPECT_NEAR(std::pow(calibrate_C(H), -2), brute, 1e-6);
}

TEST(Oracles, CalibrationNearBrownianLimit) {
    for (double H : {0.499, 0.501}) EXPECT_NEAR(calibrate_C(H), 1.0, 1e-2);
}

TEST(Oracles, CalibrationStableUnderTolHalving) {
    for (double H : {0.3, 0.7}) {
        const double tol = 1e-8;
        EXPECT_LT(std::abs(calibrate_C(H, tol) - calibrate_C(H, tol / 2)), tol);
    }
}

TEST(Oracles, VarianceCrossCheck) {
    for (double H : {0.3, 0.7}) {
        const Calibration c = calibrate(H);
        EXPECT_NEAR(c.var_S1_target, 2.0 - std::pow(2.0, 2 * H - 1), 1e-15);
        EXPECT_LT(c.rel_discrepancy, 1e-9);
        // The Var W(1) = 1 constant doubles Var S(1).
        EXPECT_NEAR(c.raw_rel_discrepancy, 1.0, 1e-9);
    }
    EXPECT_NEAR(calibrate(0.7).var_S1_target, 0.680492, 5e-7);
}

TEST(Oracles, TelegraphVariance) {
    EXPECT_NEAR(telegraph_variance_oracle(1, 1), 0.567668, 5e-7);
    // Numeric double integral n^2 int int exp(-2 n^2 |u - v|) at n = 1, t = 1.
    const long N = 2000;
    double acc = 0.0;
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j) acc += std::exp(-2.0 * std::abs(i - j) / static_cast<double>(N));
    acc /= static_cast<double>(N) * N;
    EXPECT_NEAR(telegraph_variance_oracle(1, 1), acc, 1e-3);
    for (double n : {10.0, 100.0, 1000.0}) {
        const double v = telegraph_variance_oracle(n, 1.0);
        EXPECT_LT(v, 1.0);
        EXPECT_LE(1.0 - v, 1.0 / (2 * n * n) + 1e-15);
    }
    EXPECT_LT(telegraph_variance_oracle(3, 1e-9), 1e-12);
    EXPECT_THROW(telegraph_variance_oracle(0.5, 1), ParameterError);
}

TEST(Oracles, CholeskySamplerVariance) {
    const CholeskySampler s = make_cholesky_sampler(CovModel::sfbm, 0.7, {1.0});
    const long M = 100000;
    double acc = 0.0, acc4 = 0.0;
    for (long r = 0; r < M; ++r) {
        const double x = s.sample(SeedRecord{1, (std::uint64_t)r, 0}.derive())[0];
        acc += x * x;
        acc4 += x * x * x * x;
    }
    const double v = acc / M;
    const double se = std::sqrt((acc4 / M - v * v) / M);
    EXPECT_LT(std::abs(v - 0.680492), 3 * se);
}

TEST(Oracles, CholeskyZeroGridPoint) {
    const CholeskySampler s = make_cholesky_sampler(CovModel::fbm, 0.3, {0.0, 0.5, 1.0});
    for (std::uint64_t k = 0; k < 20; ++k) EXPECT_EQ(s.sample(k)[0], 0.0);
}

TEST(Oracles, CholeskyBrownianLimitAndCovariance) {
    const std::vector<double> g{0.25, 0.5, 1.0};
    const CholeskySampler s = make_cholesky_sampler(CovModel::fbm, 0.5 + 1e-6, g);
    const long M = 40000;
    double c01 = 0.0, c12 = 0.0;
    for (long r = 0; r < M; ++r) {
        const auto x = s.sample(SeedRecord{2, (std::uint64_t)r, 0}.derive());
        c01 += x[0] * x[1];
        c12 += x[1] * x[2];
    }
    EXPECT_NEAR(c01 / M, 0.25, 0.02);
    EXPECT_NEAR(c12 / M, 0.5, 0.03);
}

TEST(Oracles, CholeskyStandardErrorScaling) {
    // Doubling M shrinks the spread of the variance estimator by ~sqrt(2).
    const CholeskySampler s = make_cholesky_sampler(CovModel::sfbm, 0.3, {1.0});
    auto spread = [&](long M) {
        const int reps = 200;
        double m = 0.0, m2 = 0.0;
        for (int k = 0; k < reps; ++k) {
            double acc = 0.0;
            for (long r = 0; r < M; ++r) {
                const double x = s.sample(SeedRecord{(std::uint64_t)(M * 1000 + k), (std::uint64_t)r, 0}.derive())[0];
                acc += x * x;
            }
            m += acc / M;
            m2 += (acc / M) * (acc / M);
        }
        m /= reps;
        return std::sqrt(m2 / reps - m * m);
    };
    const double ratio = spread(200) / spread(400);
    EXPECT_NEAR(ratio, std::sqrt(2.0), 0.3);
}

TEST(Oracles, CholeskyRejectsBadGrids) {
    EXPECT_THROW(make_cholesky_sampler(CovModel::fbm, 0.7, {0.5, 0.5}), ParameterError);
    EXPECT_THROW(CholeskySampler({1.0, 2.0}, [](double, double) { return -1.0; }), DomainError);
}

TEST(Oracles, LemmaSuiteBothRegimes) {
    for (double H : {0.3, 0.7}) {
        const ModelParams prm = make_params(H, 0.3, 1.0, -4.0, 200);
        const LemmaSuiteReport r = lemma_bound_suite(prm, 1000, 5);
        EXPECT_TRUE(r.ok()) << "H=" << H << " violations " << r.violation_count();
        EXPECT_EQ(r.entries.size(), H > 0.5 ? 4u : 7u);
        for (const auto& e : r.entries) {
            EXPECT_EQ(e.trials, 1000) << e.name;
            EXPECT_LE(e.max_ratio, 1.0 + 1e-10) << e.name;
        }
    }
}
