#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "sfbm/error.hpp"

namespace sfbm {

struct QuadResult {
    double value{};
    double error{};
    std::size_t evals{};
    bool converged{true};
};

namespace detail {

// 5-point Gauss-Legendre on [-1, 1]; exact for degree <= 9, never samples endpoints.
inline constexpr std::array<double, 5> gl5_x{-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> gl5_w{0.2369268850561891, 0.4786286704993665,
                                            0.5688888888888889, 0.4786286704993665,
                                            0.2369268850561891};

template <class F>
double gl5(F& f, double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    double acc = 0.0;
    for (std::size_t i = 0; i < 5; ++i) acc += gl5_w[i] * f(c + r * gl5_x[i]);
    return acc * r;
}

template <class F>
void adapt(F& f, double lo, double hi, double whole, double tol, int depth, QuadResult& out) {
    const double mid = 0.5 * (lo + hi);
    const double left = gl5(f, lo, mid);
    const double right = gl5(f, mid, hi);
    out.evals += 10;
    const double refined = left + right;
    // Richardson: GL5 has order 10, so the halved estimate's error is (refined - whole)/(2^10 - 1).
    const double err = std::abs(refined - whole) / 1023.0;
    if (err <= tol || depth <= 0 || mid == lo || mid == hi) {
        if (err > tol) out.converged = false;
        out.value += refined + (refined - whole) / 1023.0;
        out.error += err;
        return;
    }
    adapt(f, lo, mid, left, 0.5 * tol, depth - 1, out);
    adapt(f, mid, hi, right, 0.5 * tol, depth - 1, out);
}

} // namespace detail

/// Adaptive recursive bisection of a 5-point Gauss-Legendre rule with a local
/// Richardson error estimate; `tol` is absolute.
template <class F>
QuadResult integrate_adaptive(F&& f, double lo, double hi, double tol = 1e-9, int max_depth = 48) {
    QuadResult out;
    if (lo == hi) return out;
    if (lo > hi) {
        QuadResult r = integrate_adaptive(f, hi, lo, tol, max_depth);
        r.value = -r.value;
        return r;
    }
    const double whole = detail::gl5(f, lo, hi);
    out.evals = 5;
    detail::adapt(f, lo, hi, whole, tol, max_depth, out);
    return out;
}

} // namespace sfbm
