#include <cmath>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "oracle/riemann.hpp"
#include "sfbm/oracles.hpp"
#include "sfbm/stieltjes.hpp"

using namespace sfbm;

namespace {

oracle::RawPath raw(const PiecewisePath& p) {
    return {{p.times().begin(), p.times().end()}, {p.values().begin(), p.values().end()}};
}

PiecewisePath line(double lo, double hi, double slope, double anchor) {
    return PiecewisePath({lo, hi}, {slope * (lo - anchor), slope * (hi - anchor)}, anchor);
}

} // namespace

TEST(Stieltjes, ConstantKernelTelescopes) {
    const PiecewisePath Z = generate_transport(7, {-3.0, 0.0}, AnchorEnd::right, 2);
    const PowerKernel one{0.0, 1.0, 5.0, std::nullopt};
    EXPECT_NEAR(integrate_dZ(one, -2.5, -0.3, Z), Z(-0.3) - Z(-2.5), 1e-13);
    EXPECT_NEAR(integrate_by_parts(one, -2.5, -0.3, Z), Z(-0.3) - Z(-2.5), 1e-13);
    const PowerKernel three{0.0, 3.0, 5.0, std::nullopt};
    EXPECT_NEAR(integrate_by_parts(three, -2.0, -1.0, Z), 3.0 * (Z(-1.0) - Z(-2.0)), 1e-13);
    EXPECT_EQ(integrate_dZ(one, -1.0, -1.0, Z), 0.0);
}

TEST(Stieltjes, LinearKernelByHand) {
    // K(s) = 1 - s = (1 - s)^1 on Z(s) = s^2 sampled at 0, 0.5, 1 (chords).
    const PiecewisePath Z({0.0, 0.5, 1.0}, {0.0, 0.25, 1.0}, 0.0);
    const PowerKernel K{1.0, 1.0, 1.0, std::nullopt};
    // slopes 0.5 and 1.5: 0.5 * int_0^.5 (1-s) + 1.5 * int_.5^1 (1-s) = 0.5*0.375 + 1.5*0.125
    EXPECT_NEAR(integrate_dZ(K, 0.0, 1.0, Z), 0.375, 1e-15);
    EXPECT_NEAR(integrate_by_parts(K, 0.0, 1.0, Z), 0.375, 1e-15);
}

TEST(Stieltjes, QuarterPowerKernelExample) {
    const PiecewisePath Z = line(0.0, 0.5, 2.0, 0.0);
    const KernelSpec g{KernelKind::g, 1.0, 0.75, 0.0};
    boost::math::quadrature::tanh_sinh<double> ts;
    const double q = 2.0 * ts.integrate([](double s) { return std::pow(1.0 - s, 0.25); }, 0.0, 0.5);
    EXPECT_NEAR(integrate_dZ(g, 0.0, 0.5, Z), q, 1e-12);
    EXPECT_NEAR(integrate_dZ(g, 0.0, 0.5, Z), 0.927283, 5e-7);
}

TEST(Stieltjes, EndpointSingularityIntegrable) {
    // (t - s)^p with p < 0 up to s = t.
    const PiecewisePath Z = generate_transport(20, {0.0, 1.0}, AnchorEnd::left, 8);
    const KernelSpec g{KernelKind::g, 1.0, 0.3, 0.0};
    const double v = integrate_dZ(g, 0.0, 1.0, Z);
    EXPECT_TRUE(std::isfinite(v));
    const double o = oracle::rs_sum([](double s) { return std::pow(1.0 - s, -0.2); }, 0.0, 1.0, raw(Z), 1000000, 8.0);
    EXPECT_NEAR(v, o, 1e-6);
}

TEST(Stieltjes, MatchesRiemannStieltjesOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.05, 1.0);
    for (double H : {0.3, 0.7}) {
        const double p = H - 0.5;
        for (int trial = 0; trial < 4; ++trial) {
            const double t = U(rng);
            const PiecewisePath Z2 = generate_transport(30, {-4.0, 0.0}, AnchorEnd::right, 100 + trial);
            const PowerKernel F{p, 1.0, -t, 0.0};
            const double lib = integrate_dZ(F, -4.0, -t, Z2);
            const double o = oracle::rs_sum([&](double s) { return std::pow(-t - s, p) - std::pow(-s, p); }, -4.0, -t,
                                            raw(Z2));
            EXPECT_NEAR(lib, o, 1e-8) << "H=" << H << " t=" << t;
        }
    }
}

TEST(Stieltjes, ShiftedPowerBounded) {
    // H < 1/2, shifted kernel on [eps v (-t), 0] is bounded by (-eps)^p.
    const double H = 0.3, eps = -0.01, t = 0.5;
    const PiecewisePath Z = generate_transport(40, {-4.0, 0.0}, AnchorEnd::right, 4);
    const KernelSpec k{KernelKind::shifted_power, t, H, eps};
    const double lo = std::max(eps, -t);
    const double v = integrate_dZ(k, lo, 0.0, Z);
    double tv = 0.0;
    for (std::size_t i = 0; i + 1 < Z.size(); ++i)
        if (Z.times()[i + 1] > lo) tv += std::abs(Z.values()[i + 1] - Z.values()[i]);
    EXPECT_LE(std::abs(v), std::pow(-eps, H - 0.5) * tv + 1e-12);
    const double o = oracle::rs_sum([&](double s) { return std::pow(-s - eps, H - 0.5); }, lo, 0.0, raw(Z));
    EXPECT_NEAR(v, o, 1e-9);
}

TEST(Stieltjes, ErrorsOnSingularityAndDomain) {
    const PiecewisePath Z = generate_transport(5, {-2.0, 0.0}, AnchorEnd::right, 1);
    const KernelSpec F{KernelKind::F, 1.0, 0.3, 0.0};
    EXPECT_THROW(integrate_dZ(F, -2.0, -0.5, Z), DomainError);
    const PowerKernel sing{-0.2, 1.0, -1.0, std::nullopt};
    EXPECT_THROW(integrate_dZ(sing, -2.0, -0.5, Z), SingularityError);
    EXPECT_THROW(integrate_by_parts(sing, -2.0, -1.0, Z), SingularityError);
    const PowerKernel non{-1.5, 1.0, -1.0, std::nullopt};
    EXPECT_THROW(integrate_dZ(non, -2.0, -1.0, Z), SingularityError);
    const PowerKernel one{0.0, 1.0, 5.0, std::nullopt};
    EXPECT_THROW(integrate_dZ(one, -3.0, -1.0, Z), DomainError);
}

TEST(Stieltjes, ByPartsAgreesWithDirect) {
    for (double H : {0.3, 0.7})
        for (int trial = 0; trial < 20; ++trial) {
            Engine rng = make_engine(SeedRecord{31, (std::uint64_t)trial, 0});
            const double t = 0.1 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
            const PiecewisePath Z = generate_transport(25, {-4.0, 0.0}, AnchorEnd::right, rng);
            const PowerKernel f{H - 0.5, 1.0, t, 0.0};
            EXPECT_NEAR(integrate_dZ(f, -4.0, -t, Z), integrate_by_parts(f, -4.0, -t, Z), 1e-9);
            EXPECT_NEAR(integrate_by_parts(f, -4.0, -t, Z, IbpMethod::closed_form),
                        integrate_by_parts(f, -4.0, -t, Z, IbpMethod::quadrature), 1e-9);
        }
}

TEST(Stieltjes, Linearity) {
    const PiecewisePath P = generate_transport(9, {-3.0, 0.0}, AnchorEnd::right, 1);
    const PiecewisePath Q = generate_transport(9, {-3.0, 0.0}, AnchorEnd::right, 2);
    const PiecewisePath R = combine(0.7, P, -1.3, Q);
    const PowerKernel F{0.2, 1.0, -0.5, 0.0};
    EXPECT_NEAR(integrate_dZ(F, -3.0, -0.5, R), 0.7 * integrate_dZ(F, -3.0, -0.5, P) - 1.3 * integrate_dZ(F, -3.0, -0.5, Q),
                1e-12);
}

TEST(Stieltjes, TailTrivialCases) {
    const PiecewisePath Z3 = generate_transport(10, {-0.25, 0.0}, AnchorEnd::right, 3);
    const PiecewisePath zero({-0.25, 0.0}, {0.0, 0.0}, 0.0);
    for (double H : {0.3, 0.7}) {
        EXPECT_EQ(z3_tail_term(TailKind::f, 0.0, H, -4.0, -0.01, Z3), 0.0);
        EXPECT_EQ(z3_tail_term(TailKind::F, 0.0, H, -4.0, -0.01, Z3), 0.0);
        EXPECT_EQ(z3_tail_term(TailKind::F, 0.7, H, -4.0, -0.01, zero), 0.0);
    }
    EXPECT_THROW(z3_tail_term(TailKind::f, 0.5, 0.7, -4.0, -0.5, Z3), DomainError);
    EXPECT_THROW(z3_tail_term(TailKind::f, 0.5, 0.7, -4.0, 0.1, Z3), DomainError);
}

TEST(Stieltjes, TailMatchesRiemannOracle) {
    // kind F, H = 0.7, t = 1, a = -4, cutoff eps_n at n = 100.
    const double H = 0.7, a = -4.0, eps = -std::pow(100.0, -1.5);
    const oracle::Model m{H, 0.3, 1.0, a, 100};
    for (std::uint64_t seed : {1, 2, 3}) {
        const PiecewisePath Z3 = generate_transport(100, {1.0 / a, 0.0}, AnchorEnd::right, seed);
        const double lib = z3_tail_term(TailKind::F, 1.0, H, a, eps, Z3);
        const double o = -oracle::rs_integral(m.tail_density(-1.0), 1.0 / a, eps, raw(Z3));
        EXPECT_NEAR(lib, o, 1e-8);
    }
    // Rough regime, full range to 0.
    const oracle::Model r{0.3, 0.3, 1.0, a, 100};
    const PiecewisePath Z3 = generate_transport(100, {1.0 / a, 0.0}, AnchorEnd::right, 9);
    EXPECT_NEAR(z3_tail_term(TailKind::f, 0.6, 0.3, a, 0.0, Z3),
                -oracle::rs_integral(r.tail_density(0.6), 1.0 / a, 0.0, raw(Z3)), 1e-8);
}

TEST(Stieltjes, TailClosedFormVsAdaptive) {
    for (double H : {0.3, 0.7})
        for (TailKind k : {TailKind::f, TailKind::F}) {
            const PiecewisePath Z3 = generate_transport(30, {-0.125, 0.0}, AnchorEnd::right, 12);
            const double cut = H > 0.5 ? -1e-3 : 0.0;
            const double c = z3_tail_term(k, 0.8, H, -8.0, cut, Z3, 1e-11, TailMethod::closed_form);
            const double d = z3_tail_term(k, 0.8, H, -8.0, cut, Z3, 1e-11, TailMethod::adaptive);
            EXPECT_NEAR(c, d, 1e-9) << "H=" << H;
        }
}

TEST(Stieltjes, FubiniIteratedEqualsReduced) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const double H = trial % 2 ? 0.3 : 0.7;
        const double t = 0.05 + 0.95 * U(rng);
        const double a = -2.0 - 14.0 * U(rng);
        Engine e = make_engine(SeedRecord{77, (std::uint64_t)trial, 0});
        const PiecewisePath Z3 = generate_transport(20, {1.0 / a, 0.0}, AnchorEnd::right, e);
        const double cut = H > 0.5 ? std::max(-1e-3, 1.0 / a) : 0.0;
        const TailKind k = trial % 4 < 2 ? TailKind::f : TailKind::F;
        EXPECT_NEAR(z3_tail_term(k, t, H, a, cut, Z3), z3_tail_iterated(k, t, H, a, cut, Z3), 1e-7)
            << "trial " << trial;
    }
}
