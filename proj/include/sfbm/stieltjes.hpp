#pragma once

// Riemann-Stieltjes integrals of power-law kernels against piecewise-linear
// integrators, the integration-by-parts form, and the Fubini-reduced
// time-inverted tail term.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sfbm/error.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/quadrature.hpp"

namespace sfbm {

namespace detail {

inline void require_inside(const PiecewisePath& Z, double u, double v) {
    if (u < Z.lo() || v > Z.hi())
        throw DomainError("integration range [" + fmt_num(u) + ", " + fmt_num(v) +
                          "] not inside path domain [" + fmt_num(Z.lo()) + ", " + fmt_num(Z.hi()) + "]");
}

} // namespace detail

/// Sum over path segments of slope_k * (exact integral of K over the segment
/// clipped to [u, v]).
inline double integrate_dZ(const PowerKernel& K, double u, double v, const PiecewisePath& Z) {
    if (u == v) return 0.0;
    if (u > v) return -integrate_dZ(K, v, u, Z);
    detail::require_inside(Z, u, v);
    K.check_range(v);
    const auto t = Z.times();
    const auto x = Z.values();
    std::size_t k = Z.segment_of(u);
    double lo = u;
    double P_lo = K.primitive(lo);
    double acc = 0.0;
    while (lo < v) {
        const double hi = std::min(v, t[k + 1]);
        const double P_hi = K.primitive(hi);
        const double slope = (x[k + 1] - x[k]) / (t[k + 1] - t[k]);
        acc += slope * (P_hi - P_lo);
        lo = hi;
        P_lo = P_hi;
        ++k;
    }
    return acc;
}

inline double integrate_dZ(const KernelSpec& spec, double u, double v, const PiecewisePath& Z) {
    const auto dom = spec.domain();
    if (std::min(u, v) < dom.lo || std::max(u, v) > dom.hi)
        throw DomainError(std::string("integration range outside the domain of kernel ") +
                          to_string(spec.kind));
    return integrate_dZ(spec.expand(), u, v, Z);
}

enum class IbpMethod { closed_form, quadrature };

/// K(v)Z(v) - K(u)Z(u) - int_u^v K'(s) Z(s) ds.
///
/// Requires K to be finite on [u, v]; the remaining Lebesgue integral is
/// exact per segment (K' times a linear function) or, on request, adaptive.
inline double integrate_by_parts(const PowerKernel& K, double u, double v, const PiecewisePath& Z,
                                 IbpMethod method = IbpMethod::closed_form, double tol = 1e-11) {
    if (u == v) return 0.0;
    if (u > v) return -integrate_by_parts(K, v, u, Z, method, tol);
    detail::require_inside(Z, u, v);
    const double hi = K.upper();
    if (v > hi || (v == hi && K.exponent < 0.0))
        throw SingularityError("integrate_by_parts: kernel singular within [" + detail::fmt_num(u) +
                               ", " + detail::fmt_num(v) + "]");
    const PowerKernel D = K.derivative();
    const auto t = Z.times();
    const auto x = Z.values();

    double inner = 0.0;
    std::size_t k = Z.segment_of(u);
    double lo = u;
    while (lo < v) {
        const double b = std::min(v, t[k + 1]);
        const double m = (x[k + 1] - x[k]) / (t[k + 1] - t[k]);
        const double z0 = x[k] - m * t[k];  // Z(s) = z0 + m s on this segment
        if (method == IbpMethod::closed_form) {
            // (z0 + m s) = (z0 + m c) - m (c - s) for each kernel center c.
            auto term = [&](double coef, double c) {
                return coef * ((z0 + m * c) * power_primitive(c, D.exponent, lo, b) -
                               m * power_primitive(c, D.exponent + 1.0, lo, b));
            };
            inner += term(D.scale, D.c1);
            if (D.c2) inner += term(-D.scale, *D.c2);
        } else {
            const double cell_tol = tol * (b - lo) / (v - u);
            inner += integrate_adaptive([&](double s) { return D.value(s) * (z0 + m * s); }, lo, b,
                                        cell_tol).value;
        }
        lo = b;
        ++k;
    }
    return K.value(v) * Z(v) - K.value(u) * Z(u) - inner;
}

enum class TailKind { f, F };
enum class TailMethod { closed_form, adaptive };

/// psi(v) = d_s K_t(1/v) / v^3, the integrand of the time-inverted tail.
inline double tail_density(TailKind kind, double t, double H, double v) {
    const PowerKernel dK =
        KernelSpec{kind == TailKind::f ? KernelKind::df : KernelKind::dF, t, H, 0.0}.expand();
    const double s = 1.0 / v;
    return dK.value(s) / (v * v * v);
}

namespace detail {

// int_{v0}^{0} psi(v) (alpha + beta v) dv by the binomial series of
// 1 - (1 + sigma t x)^(p-1) in x = -v; needs t x0 <= 1/2.
inline double tail_series_to_zero(TailKind kind, double t, double H, double v0, double alpha,
                                  double beta) {
    const double p = H - 0.5;
    const double x0 = -v0;
    if (alpha != 0.0 && p >= 0.0)
        throw SingularityError("tail term diverges at v = 0: Z3(0) != 0 with H > 1/2");
    const double y = (kind == TailKind::f ? 1.0 : -1.0) * t;
    double b = p - 1.0;  // binom(p-1, j)
    double yj = y;
    double sum = 0.0;
    for (int j = 1; j < 400; ++j) {
        const double jd = static_cast<double>(j);
        double term = -beta * std::pow(x0, jd - p) / (jd - p);
        if (alpha != 0.0) term += alpha * std::pow(x0, jd - 1.0 - p) / (jd - 1.0 - p);
        term *= b * yj;
        sum += term;
        if (j >= 2 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
        b *= (p - 1.0 - jd) / (jd + 1.0);
        yj *= y;
    }
    return p * sum;
}

// int_{v0}^{v1} psi(v) (alpha + beta v) dv for v0 < v1 < 0 via s = 1/v:
//   int psi = -[s K(s)] + int K ds,  int v psi = -[K(s)].
inline double tail_cell_closed(const PowerKernel& K, double v0, double v1, double alpha, double beta) {
    const double s0 = 1.0 / v0;
    const double s1 = 1.0 / v1;
    const double K0 = K.value(s0);
    const double K1 = K.value(s1);
    const double intK = K.primitive(s1) - K.primitive(s0);
    return -alpha * ((s1 * K1 - s0 * K0) - intK) - beta * (K1 - K0);
}

} // namespace detail

/// -int_{1/a}^{cutoff} d_s K_t(1/v) v^-3 Z3(v) dv, K in {f, F}: the
/// Fubini-reduced value of the iterated dZ3 tail integral, with the sign
/// that matches the exact tail of the Wiener integral.
inline double z3_tail_term(TailKind kind, double t, double H, double a, double cutoff,
                           const PiecewisePath& Z3, double tol = 1e-9,
                           TailMethod method = TailMethod::closed_form) {
    detail::require_hurst(H);
    if (!(a < 0.0)) throw ParameterError("tail anchor a must be negative");
    const double v_lo = 1.0 / a;
    if (!(cutoff >= v_lo && cutoff <= 0.0))
        throw DomainError("tail cutoff " + detail::fmt_num(cutoff) + " outside [1/a, 0]");
    if (!(t >= 0.0)) throw ParameterError("tail term needs t >= 0");
    detail::require_inside(Z3, v_lo, cutoff);
    if (cutoff == v_lo || t == 0.0) return 0.0;

    const PowerKernel K =
        KernelSpec{kind == TailKind::f ? KernelKind::f : KernelKind::F, t, H, 0.0}.expand();
    const auto tv = Z3.times();
    const auto xv = Z3.values();
    // Series region near v = 0 (only reached when cutoff == 0).
    const double series_from = (cutoff == 0.0) ? -std::min(0.5 / t, -v_lo) : 0.0;
    const double span = cutoff - v_lo;

    double acc = 0.0;
    std::size_t k = Z3.segment_of(v_lo);
    double lo = v_lo;
    while (lo < cutoff) {
        const double hi = std::min(cutoff, tv[k + 1]);
        const double m = (xv[k + 1] - xv[k]) / (tv[k + 1] - tv[k]);
        const double z0 = xv[k] - m * tv[k];
        if (method == TailMethod::closed_form) {
            if (hi == 0.0) {
                const double split = std::max(lo, series_from);
                if (split > lo) acc += detail::tail_cell_closed(K, lo, split, z0, m);
                acc += detail::tail_series_to_zero(kind, t, H, split, z0, m);
            } else {
                acc += detail::tail_cell_closed(K, lo, hi, z0, m);
            }
        } else {
            const double cell_tol = tol * (hi - lo) / span;
            const QuadResult r = integrate_adaptive(
                [&](double v) { return tail_density(kind, t, H, v) * (z0 + m * v); }, lo, hi, cell_tol);
            acc += r.value;
        }
        lo = hi;
        ++k;
    }
    return -acc;
}

/// The unreduced iterated form int_{1/a}^0 Phi(r) dZ3(r) with
/// Phi(r) = int_{1/a}^{min(r, cutoff)} psi(v) dv tabulated by adaptive
/// quadrature; equals z3_tail_term by Fubini. Used as a consistency check.
inline double z3_tail_iterated(TailKind kind, double t, double H, double a, double cutoff,
                               const PiecewisePath& Z3, double tol = 1e-11) {
    detail::require_hurst(H);
    const double v_lo = 1.0 / a;
    if (!(cutoff >= v_lo && cutoff <= 0.0))
        throw DomainError("tail cutoff " + detail::fmt_num(cutoff) + " outside [1/a, 0]");
    detail::require_inside(Z3, v_lo, 0.0);
    if (t == 0.0 || cutoff == v_lo) return 0.0;
    auto psi = [&](double v) { return tail_density(kind, t, H, v); };

    // Cells: Z3 segments split at the cutoff, then graded so every cell is
    // short relative to its distance from 0 (Phi varies like |v|^(-p) there);
    // the cell ending at 0 is split geometrically.
    std::vector<double> base(Z3.times().begin(), Z3.times().end());
    if (cutoff < 0.0) base.push_back(cutoff);
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());
    std::vector<double> cuts;
    for (std::size_t k = 0; k + 1 < base.size(); ++k) {
        double lo = base[k];
        const double hi = base[k + 1];
        cuts.push_back(lo);
        if (hi == 0.0) {
            double x = -lo;
            for (int j = 0; j < 60; ++j) {
                x *= 0.5;
                cuts.push_back(-x);
            }
            continue;
        }
        while (hi - lo > 0.05 * (-hi)) {
            lo += 0.05 * (-lo);
            cuts.push_back(lo);
        }
    }
    cuts.push_back(base.back());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    double phi = 0.0;      // Phi at the running point
    double at = v_lo;      // running point
    auto advance = [&](double r) {
        const double upto = std::min(r, cutoff);
        if (upto > at) {
            phi += integrate_adaptive(psi, at, upto, tol * 1e-3).value;
            at = upto;
        }
        return phi;
    };
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k];
        const double hi = cuts[k + 1];
        if (!(hi > lo)) continue;
        const double slope = (Z3(hi) - Z3(lo)) / (hi - lo);
        if (slope == 0.0) {
            advance(hi);
            continue;
        }
        const double c = 0.5 * (lo + hi);
        const double r = 0.5 * (hi - lo);
        double cell = 0.0;
        for (std::size_t i = 0; i < 5; ++i) cell += detail::gl5_w[i] * advance(c + r * detail::gl5_x[i]);
        advance(hi);
        acc += slope * cell * r;
    }
    return acc;
}

} // namespace sfbm
