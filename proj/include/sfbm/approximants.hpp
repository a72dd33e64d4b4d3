#pragma once

// Assembly of W^(n), Y^(n), S^(n) from a driver triple, and the exact
// fBm / sfBm covariance functions they are validated against.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "sfbm/error.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/stieltjes.hpp"

namespace sfbm {

enum class Regime { H_gt_half, H_lt_half };
enum class Which { W, Y, S };
enum class TailSign { minus, plus };

inline const char* to_string(Which w) {
    switch (w) {
    case Which::W: return "W";
    case Which::Y: return "Y";
    case Which::S: return "S";
    }
    return "?";
}

struct ApproximantOptions {
    TailSign tail_sign{TailSign::minus};  // plus flips every dZ3 term (debug)
    TailMethod tail_method{TailMethod::closed_form};
    double tail_tol{1e-9};
    bool far_field{true};  // series expansion of the Z2 kernels far from the origin
};

/// int_u^cut [(c - s)^p - (-s)^p] dZ(s) for every |c| <= |cut| / 2 from one
/// pass over the path: with x = -s and q = p + 1 the primitive is
/// -(1/q) sum_{j>=1} binom(q, j) c^j x^(q-j), so the integral reduces to the
/// moments D_j = sum_k slope_k [x^(q-j)] over the segments of [u, cut].
class FarField {
public:
    static constexpr int kTerms = 56;  // (1/2)^56 < 1e-16

    FarField(double p, double u, double cut, const PiecewisePath& Z) : q_(p + 1.0), cut_(cut) {
        if (!(u < cut && cut < 0.0)) throw ParameterError("FarField: need u < cut < 0");
        const auto t = Z.times();
        const auto v = Z.values();
        std::array<double, kTerms> lo_pow{}, hi_pow{};
        auto powers = [&](double s, std::array<double, kTerms>& out) {
            const double x = -s;
            const double inv = 1.0 / x;
            double y = std::pow(x, q_ - 1.0);
            for (int j = 0; j < kTerms; ++j, y *= inv) out[j] = y;
        };
        std::size_t k = Z.segment_of(u);
        double lo = u;
        powers(lo, lo_pow);
        while (lo < cut) {
            const double hi = std::min(cut, t[k + 1]);
            powers(hi, hi_pow);
            const double slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
            for (int j = 0; j < kTerms; ++j) D_[j] += slope * (hi_pow[j] - lo_pow[j]);
            lo = hi;
            lo_pow = hi_pow;
            ++k;
        }
    }

    double cut() const { return cut_; }

    double integrate(double c) const {
        if (std::abs(c) > 0.5 * std::abs(cut_)) throw DomainError("FarField: |c| exceeds |cut|/2");
        double acc = 0.0, b = 1.0, cj = 1.0;
        for (int j = 1; j <= kTerms; ++j) {
            b *= (q_ - j + 1) / j;
            cj *= c;
            acc += b * cj * D_[j - 1];
        }
        return -acc / q_;
    }

private:
    double q_;
    double cut_;
    std::array<double, kTerms> D_{};
};


struct WY {
    double W{};
    double Y{};
    double S() const { return W + Y; }
};

class ApproximantEvaluator {
public:
    ApproximantEvaluator(ModelParams params, DriverSet drivers, ApproximantOptions opt = {})
        : prm_(params), drv_(std::move(drivers)), opt_(opt) {
        if (drv_.Z1.lo() != 0.0 || drv_.Z1.hi() != prm_.T)
            throw ParameterError("Z1 must be defined on [0, T]");
        if (drv_.Z2.lo() != prm_.a || drv_.Z2.hi() != 0.0)
            throw ParameterError("Z2 must be defined on [a, 0]");
        if (drv_.Z3.lo() != 1.0 / prm_.a || drv_.Z3.hi() != 0.0)
            throw ParameterError("Z3 must be defined on [1/a, 0]");
        const double cut = -2.0 * (prm_.T + std::abs(prm_.eps_n));
        if (opt_.far_field && prm_.a < cut) far_.emplace(prm_.p(), prm_.a, cut, drv_.Z2);
    }

    const ModelParams& params() const { return prm_; }
    const DriverSet& drivers() const { return drv_; }
    const ApproximantOptions& options() const { return opt_; }
    Regime regime() const { return prm_.H > 0.5 ? Regime::H_gt_half : Regime::H_lt_half; }

    /// Unnormalized pieces of one evaluation: X = C (main + tail) under the
    /// default sign, C (main - tail) when flipped.
    struct Parts {
        double main{};
        double tail{};
    };

    Parts parts_W(double t) const {
        check_t(t);
        return regime() == Regime::H_gt_half ? W_smooth(t) : W_rough(t);
    }

    Parts parts_Y(double t) const {
        check_t(t);
        return regime() == Regime::H_gt_half ? Y_smooth(t) : Y_rough(t);
    }

    double assemble(const Parts& q) const { return prm_.C * (q.main + sign() * q.tail); }

    double eval_W(double t) const { return assemble(parts_W(t)); }

    double eval_Y(double t) const { return assemble(parts_Y(t)); }

    WY eval_WY(double t) const { return {eval_W(t), eval_Y(t)}; }

    double eval_S(double t) const { return eval_WY(t).S(); }

    double eval(Which w, double t) const {
        switch (w) {
        case Which::W: return eval_W(t);
        case Which::Y: return eval_Y(t);
        case Which::S: return eval_S(t);
        }
        return 0.0;
    }

    std::vector<double> eval_grid(Which w, const std::vector<double>& grid) const {
        std::vector<double> out;
        out.reserve(grid.size());
        for (double t : grid) out.push_back(eval(w, t));
        return out;
    }

private:
    void check_t(double t) const {
        if (!(t >= 0.0 && t <= prm_.T))
            throw DomainError("t=" + detail::fmt_num(t) + " outside [0, T=" + detail::fmt_num(prm_.T) + "]");
    }

    double sign() const { return opt_.tail_sign == TailSign::minus ? 1.0 : -1.0; }

    double tail(TailKind kind, double t, double cutoff) const {
        return z3_tail_term(kind, t, prm_.H, prm_.a, cutoff, drv_.Z3, opt_.tail_tol, opt_.tail_method);
    }

    double Z2a() const { return drv_.Z2.values().front(); }

    // int_a^hi [(c - s)^p - (-s)^p] dZ2(s).
    double z2_from_a(double c, double hi) const {
        if (far_ && hi > far_->cut())
            return far_->integrate(c) + integrate_dZ(PowerKernel{prm_.p(), 1.0, c, 0.0}, far_->cut(), hi, drv_.Z2);
        return integrate_dZ(PowerKernel{prm_.p(), 1.0, c, 0.0}, prm_.a, hi, drv_.Z2);
    }

    PowerKernel g(double center) const { return {prm_.p(), 1.0, center, std::nullopt}; }
    PowerKernel f(double t) const { return {prm_.p(), 1.0, t, 0.0}; }
    PowerKernel F(double t) const { return {prm_.p(), 1.0, -t, 0.0}; }

    Parts W_smooth(double t) const {
        if (t == 0.0) return {};
        const double a = prm_.a;
        const PowerKernel ft = f(t);
        double w = integrate_dZ(g(t), 0.0, t, drv_.Z1);
        w += z2_from_a(t, 0.0);
        w += ft.value(a) * Z2a();
        return {w, tail(TailKind::f, t, std::max(prm_.eps_n, 1.0 / a))};
    }

    Parts W_rough(double t) const {
        if (t == 0.0) return {};
        const double a = prm_.a;
        const double eps = prm_.eps_n;
        const double m = std::max(t + eps, 0.0);
        const PowerKernel ft = f(t);
        double w = integrate_dZ(g(t), 0.0, m, drv_.Z1);
        w += integrate_dZ(g(t - eps), m, t, drv_.Z1);
        w += z2_from_a(t, eps);
        w += ft.value(a) * Z2a();
        return {w, tail(TailKind::f, t, 0.0)};
    }

    Parts Y_smooth(double t) const {
        if (t == 0.0) return {};
        const double a = prm_.a;
        const PowerKernel Ft = F(t);
        double y = -integrate_dZ(g(0.0), -t, 0.0, drv_.Z2);
        y += z2_from_a(-t, -t);
        y += Ft.value(a) * Z2a();
        return {y, tail(TailKind::F, t, std::max(prm_.eps_n, 1.0 / a))};
    }

    Parts Y_rough(double t) const {
        if (t == 0.0) return {};
        const double a = prm_.a;
        const double eps = prm_.eps_n;
        const double m = std::max(eps, -t);
        const double b = std::max(a, -t + eps);
        const PowerKernel Ft = F(t);
        double y = -integrate_dZ(g(0.0), -t, m, drv_.Z2);
        y -= integrate_dZ(g(-eps), m, 0.0, drv_.Z2);
        y += Ft.value(a) * Z2a();
        y += z2_from_a(-t, b);
        if (-eps <= t) y += integrate_dZ(F(t + eps), b, -t, drv_.Z2);
        return {y, tail(TailKind::F, t, 0.0)};
    }

    ModelParams prm_;
    DriverSet drv_;
    ApproximantOptions opt_;
    std::optional<FarField> far_;
};

enum class CovModel { fbm, sfbm };

inline const char* to_string(CovModel m) { return m == CovModel::fbm ? "fbm" : "sfbm"; }

/// fbm: (s^2H + t^2H - |s-t|^2H)/2;  sfbm: s^2H + t^2H - ((s+t)^2H + |s-t|^2H)/2.
inline double exact_covariance(CovModel model, double s, double t, double H) {
    if (!(H > 0.0 && H < 1.0)) throw ParameterError("H must lie in (0,1)");
    if (s < 0.0 || t < 0.0) throw DomainError("covariance times must be >= 0");
    const double h2 = 2.0 * H;
    const double ss = std::pow(s, h2);
    const double tt = std::pow(t, h2);
    const double d = std::pow(std::abs(s - t), h2);
    if (model == CovModel::fbm) return 0.5 * (ss + tt - d);
    return ss + tt - 0.5 * (std::pow(s + t, h2) + d);
}

/// Normalization making the Mandelbrot-van Ness integral a standard fBm:
/// C_W^-2 = Gamma(H+1/2)^2 / (Gamma(2H+1) sin(pi H)).
inline double mvn_constant(double H) {
    detail::require_hurst(H);
    const double g = std::tgamma(H + 0.5);
    return std::sqrt(std::tgamma(2.0 * H + 1.0) * std::sin(M_PI * H)) / g;
}

/// Normalization making S = W + Y an sfBm.
inline double sfbm_constant(double H) { return mvn_constant(H) / std::sqrt(2.0); }

/// Covariance targets of the exact W, Y, S under normalization C: W and Y are
/// each r fBm with r = (C/C_W)^2, Cov(W(s), Y(t)) = r (s^2H + t^2H - (s+t)^2H)/2,
/// and S is 2r sfBm.
inline double target_covariance(Which w, double s, double t, double H, double C) {
    const double r = std::pow(C / mvn_constant(H), 2);
    if (w == Which::S) return 2.0 * r * exact_covariance(CovModel::sfbm, s, t, H);
    return r * exact_covariance(CovModel::fbm, s, t, H);
}

inline double target_cross_covariance(double s, double t, double H, double C) {
    const double r = std::pow(C / mvn_constant(H), 2);
    const double h2 = 2.0 * H;
    return 0.5 * r * (std::pow(s, h2) + std::pow(t, h2) - std::pow(s + t, h2));
}

} // namespace sfbm
