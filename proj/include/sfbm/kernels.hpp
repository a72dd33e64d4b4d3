#pragma once

// Closed-form power-law kernels of the sfBm / fBm Wiener-integral
// representations, their s-derivatives and antiderivatives, and the
// truncation/rate schedules that parameterize the transport approximants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfbm/error.hpp"

namespace sfbm {

namespace detail {

inline std::string fmt_num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

inline void require_hurst(double H) {
    if (!(H > 0.0 && H < 1.0))
        throw ParameterError("H must lie in (0,1), got " + fmt_num(H));
    if (H == 0.5)
        throw ParameterError("H = 1/2 is excluded (ordinary Brownian motion)");
}

// x^q - y^q for x, y >= 0, computed without cancellation when x ~ y.
// d = x - y must be supplied exactly (it is a difference of kernel centers).
inline double pow_diff(double y, double d, double q) {
    const double x = y + d;
    if (d == 0.0) return 0.0;
    if (x <= 0.0 || y <= 0.0) return std::pow(x, q) - std::pow(y, q);
    return std::pow(y, q) * std::expm1(q * std::log1p(d / y));
}

} // namespace detail

/// Truncation point eps_n and convergence rate alpha_n for level n.
struct Schedules {
    double eps_n;
    double alpha_n;
};

/// eps_n = -n^(-beta/|H-1/2|), alpha_n = n^(-(1/2-beta)) (ln n)^(5/2).
inline Schedules schedules(double H, double beta, long n) {
    detail::require_hurst(H);
    const double dev = std::abs(H - 0.5);
    // H - 1/2 carries rounding (0.7 - 0.5 < 0.2), so the lower edge gets a few ulps of slack.
    if (!(beta > dev + 4 * std::numeric_limits<double>::epsilon() && beta < 0.5))
        throw ParameterError("beta must satisfy |H-1/2| < beta < 1/2 (H=" + detail::fmt_num(H) +
                             ", beta=" + detail::fmt_num(beta) + ")");
    if (n < 2) throw ParameterError("approximation level n must be >= 2");
    const double nd = static_cast<double>(n);
    const double eps = -std::pow(nd, -beta / dev);
    if (!(eps < 0.0) || !std::isnormal(eps))
        throw ParameterError("eps_n underflows for H=" + detail::fmt_num(H) + ", beta=" +
                             detail::fmt_num(beta) + ", n=" + std::to_string(n));
    const double alpha = std::pow(nd, -(0.5 - beta)) * std::pow(std::log(nd), 2.5);
    return {eps, alpha};
}

/// Model parameters shared by every approximant evaluation.
struct ModelParams {
    double H{};
    double beta{};
    double T{};
    double a{};
    long n{};
    double eps_n{};
    double alpha_n{};
    double C{};

    double p() const { return H - 0.5; }
    bool rough() const { return H < 0.5; }

    static ModelParams make(double H, double beta, double T, double a, long n, double C) {
        const Schedules sch = schedules(H, beta, n);
        if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("horizon T must be > 0");
        if (!(a < -T)) throw ParameterError("tail anchor a must satisfy a < -T");
        if (!(C > 0.0) || !std::isfinite(C)) throw ParameterError("normalization C must be > 0");
        return ModelParams{H, beta, T, a, n, sch.eps_n, sch.alpha_n, C};
    }

    static double default_anchor(double T) { return -4.0 * std::max(T, 1.0); }
};

/// Closed-form integral of (c - s)^p over [s0, s1].
///
/// Requires c - s > 0 on the open interval; c may coincide with the right
/// endpoint when p > -1 (integrable endpoint singularity).
inline double power_primitive(double c, double p, double s0, double s1) {
    if (s0 == s1) return 0.0;
    if (s0 > s1) return -power_primitive(c, p, s1, s0);
    if (s1 > c) {
        if (p < 0.0 && s0 <= c)
            throw SingularityError("power_primitive: center " + detail::fmt_num(c) +
                                   " inside [" + detail::fmt_num(s0) + ", " +
                                   detail::fmt_num(s1) + "]");
        throw DomainError("power_primitive: c - s must be positive on the interval");
    }
    if (s1 == c && p <= -1.0)
        throw SingularityError("power_primitive: non-integrable endpoint singularity");
    if (p == -1.0) return std::log((c - s0) / (c - s1));
    const double q = p + 1.0;
    return (std::pow(c - s0, q) - std::pow(c - s1, q)) / q;
}

/// scale * [(c1 - s)^e - (c2 - s)^e]; the second term is optional.
///
/// Every kernel the approximants integrate is of this form, which gives
/// exact antiderivatives on each linear segment of an integrator path.
struct PowerKernel {
    double exponent{};
    double scale{1.0};
    double c1{};
    std::optional<double> c2{};

    double upper() const { return c2 ? std::min(c1, *c2) : c1; }

    double value(double s) const {
        if (c2) return scale * detail::pow_diff(*c2 - s, c1 - *c2, exponent);
        return scale * std::pow(c1 - s, exponent);
    }

    PowerKernel derivative() const {
        return PowerKernel{exponent - 1.0, -exponent * scale, c1, c2};
    }

    // P(s) with P' = K. Differences of P over [s0, s1] give exact integrals.
    double primitive(double s) const {
        const double q = exponent + 1.0;
        if (q == 0.0) throw SingularityError("PowerKernel: logarithmic primitive not supported");
        const double d = c2 ? detail::pow_diff(*c2 - s, c1 - *c2, q) : std::pow(c1 - s, q);
        return -scale * d / q;
    }

    // Exact integral over [s0, s1] with the same error contract as power_primitive.
    double integral(double s0, double s1) const {
        if (s0 == s1) return 0.0;
        if (s0 > s1) return -integral(s1, s0);
        check_range(s1);
        return primitive(s1) - primitive(s0);
    }

    void check_range(double s1) const {
        const double hi = upper();
        if (s1 > hi) {
            if (exponent < 0.0)
                throw SingularityError("kernel singularity at " + detail::fmt_num(hi) +
                                       " inside integration range");
            throw DomainError("kernel evaluated beyond its domain (s > " + detail::fmt_num(hi) + ")");
        }
        if (s1 == hi && exponent <= -1.0 && scale != 0.0)
            throw SingularityError("non-integrable kernel singularity (exponent <= -1) at range end");
    }
};

enum class KernelKind { g, f, F, power, shifted_power, F_diff, dF, df };

inline const char* to_string(KernelKind k) {
    switch (k) {
    case KernelKind::g: return "g";
    case KernelKind::f: return "f";
    case KernelKind::F: return "F";
    case KernelKind::power: return "power";
    case KernelKind::shifted_power: return "shifted_power";
    case KernelKind::F_diff: return "F_diff";
    case KernelKind::dF: return "dF";
    case KernelKind::df: return "df";
    }
    return "?";
}

/// Symbolic description of one of the power-law integrands.
///
///   g       (t - s)^p                       0 <= s < t
///   f       (t - s)^p - (-s)^p              s < 0 <= t
///   F       (-t - s)^p - (-s)^p             s < -t
///   power   (-s)^p                          s < 0
///   shifted (-s - shift)^p                  s < -shift   (shift <= 0)
///   F_diff  F_t - F_{t+shift}               s < -t
///   dF, df  d/ds of F, f
///
/// with p = H - 1/2.
struct KernelSpec {
    KernelKind kind{};
    double t{};
    double H{};
    double shift{};

    struct Domain {
        double lo;
        double hi;  // open at hi
    };

    void validate() const {
        detail::require_hurst(H);
        if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("kernel time t must be >= 0");
        if (shift > 0.0) throw ParameterError("kernel shift must be <= 0");
    }

    Domain domain() const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (kind) {
        case KernelKind::g: return {0.0, t};
        case KernelKind::f:
        case KernelKind::df:
        case KernelKind::power: return {-inf, 0.0};
        case KernelKind::F:
        case KernelKind::dF:
        case KernelKind::F_diff: return {-inf, -t};
        case KernelKind::shifted_power: return {-inf, -shift};
        }
        return {-inf, 0.0};
    }

    PowerKernel expand() const {
        validate();
        const double p = H - 0.5;
        switch (kind) {
        case KernelKind::g: return {p, 1.0, t, std::nullopt};
        case KernelKind::f: return {p, 1.0, t, 0.0};
        case KernelKind::F: return {p, 1.0, -t, 0.0};
        case KernelKind::power: return {p, 1.0, 0.0, std::nullopt};
        case KernelKind::shifted_power: return {p, 1.0, -shift, std::nullopt};
        case KernelKind::F_diff: return {p, 1.0, -t, -t - shift};
        case KernelKind::dF: return PowerKernel{p, 1.0, -t, 0.0}.derivative();
        case KernelKind::df: return PowerKernel{p, 1.0, t, 0.0}.derivative();
        }
        return {};
    }
};

inline double eval_kernel(const KernelSpec& spec, double s) {
    spec.validate();
    const auto dom = spec.domain();
    if (!(s >= dom.lo && s < dom.hi))
        throw DomainError(std::string("kernel ") + to_string(spec.kind) + " evaluated at s=" +
                          detail::fmt_num(s) + " outside [" + detail::fmt_num(dom.lo) + ", " +
                          detail::fmt_num(dom.hi) + ")");
    return spec.expand().value(s);
}

// ---------------------------------------------------------------------------
// Validators for the pointwise derivative bound on F_t and the
// integrability of its weighted tail.

struct KernelBoundViolation {
    std::string check;
    double t;
    double s;
    double lhs;
    double rhs;
};

struct KernelBoundReport {
    double H{};
    long trials{};
    double gamma{};
    double max_ratio{};        // max lhs/rhs of the derivative bound
    double max_tail_ratio{};   // max lhs/rhs of the tail domination
    double tail_integral_bound{};  // analytic bound on the weighted tail integral at t = T
    std::vector<KernelBoundViolation> violations;

    bool ok() const { return violations.empty(); }
};

/// |dF_t(s)| <= |H-1/2| t (3/2-H) (-t-s)^(H-5/2) at random (t, s), s < -t,
/// and |dF_t(s)| (-s)^(1/2+gamma) <= K (-s)^(H+gamma-2) for s <= a.
inline KernelBoundReport validate_kernel_bounds(double H, double T, double a, long trials,
                                                std::uint64_t seed = 1) {
    detail::require_hurst(H);
    if (trials < 1) throw ParameterError("trials must be >= 1");
    if (!(T > 0.0)) throw ParameterError("T must be > 0");
    if (!(a < -T)) throw ParameterError("a must satisfy a < -T");

    constexpr double slack = 1e-12;
    const double p = H - 0.5;
    const double dev = std::abs(p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    KernelBoundReport rep;
    rep.H = H;
    rep.trials = trials;
    const double gmax = std::min(1.0 - H, 0.5);
    rep.gamma = gmax * (0.05 + 0.9 * unit(rng));
    const double g = rep.gamma;
    rep.tail_integral_bound = dev * T * (1.5 - H) * std::pow(1.0 + T / a, H - 2.5) *
                              std::pow(-a, H + g - 1.0) / (1.0 - H - g);

    for (long i = 0; i < trials; ++i) {
        const double t = T * (1.0 - unit(rng));  // (0, T]
        const double d = std::pow(10.0, -6.0 + 12.0 * unit(rng));
        const double s = -t - d;
        const PowerKernel dF = KernelSpec{KernelKind::dF, t, H, 0.0}.expand();
        const double lhs = std::abs(dF.value(s));
        const double rhs = dev * t * (1.5 - H) * std::pow(d, H - 2.5);
        if (rhs > 0.0) rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
        if (!(lhs <= rhs * (1.0 + slack)))
            rep.violations.push_back({"derivative_bound", t, s, lhs, rhs});

        const double st = a - std::pow(10.0, -6.0 + 12.0 * unit(rng));
        const double lt = std::abs(dF.value(st)) * std::pow(-st, 0.5 + g);
        const double rt = dev * t * (1.5 - H) * std::pow(1.0 + t / a, H - 2.5) *
                          std::pow(-st, H + g - 2.0);
        if (rt > 0.0) rep.max_tail_ratio = std::max(rep.max_tail_ratio, lt / rt);
        if (!(lt <= rt * (1.0 + slack)))
            rep.violations.push_back({"tail_domination", t, st, lt, rt});
    }
    return rep;
}

} // namespace sfbm
