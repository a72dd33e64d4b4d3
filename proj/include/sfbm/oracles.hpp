#pragma once

// Independent ground truth: normalization calibration, exact Gaussian
// samplers, the telegraph second moment, and the deterministic bound suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sfbm/approximants.hpp"
#include "sfbm/error.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/rng.hpp"
#include "sfbm/stieltjes.hpp"

namespace sfbm {

// ---------------------------------------------------------------------------
// Normalization

struct Calibration {
    double H{};
    double tol{};
    double mvn_integral{};   // int_{-inf}^0 f_1(s)^2 ds + 1/(2H)
    double c_mvn{};          // makes W(1) standard: Var W(1) = 1
    double c_sfbm{};         // c_mvn / sqrt(2): makes S an sfBm
    double kernel_norm2{};   // || (1-s)_+^p + (-1-s)_+^p - 2 (-s)_+^p ||^2
    double var_S1_target{};  // 2 - 2^(2H-1)
    double var_S1_raw{};     // c_mvn^2 * kernel_norm2
    double var_S1{};         // c_sfbm^2 * kernel_norm2
    double raw_rel_discrepancy{};
    double rel_discrepancy{};
    double truncation{};     // |L| of the improper-integral cut
    double tail_bound{};     // analytic bound on the discarded tail
    double quad_error{};     // summed quadrature error estimates
};

namespace detail {

// int_0^U g(u) du over panels [0,1], [1,2], [2,4], ..., [U/2, U].
template <class G>
double geometric_panels(G&& g, double U, double tol, double& err_acc) {
    boost::math::quadrature::tanh_sinh<double> ts;
    double acc = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    while (lo < U) {
        hi = std::min(hi, U);
        double err = 0.0;
        double l1 = 0.0;
        acc += ts.integrate(g, lo, hi, tol, &err, &l1);
        err_acc += err * std::max(l1, 1e-300);
        lo = hi;
        hi = 2.0 * hi;
    }
    return acc;
}

inline Calibration calibrate_uncached(double H, double tol) {
    detail::require_hurst(H);
    if (!(tol > 0.0)) throw ParameterError("calibration tolerance must be > 0");
    const double p = H - 0.5;
    const double qtol = std::max(1e-15, std::min(1e-12, tol * 1e-3));
    Calibration c;
    c.H = H;
    c.tol = tol;

    // MvN kernel in u = -s: ((1+u)^p - u^p)^2; tail |.| <= |p| u^(p-1).
    double U = 1.0;
    auto mvn_tail = [&](double u) { return p * p * std::pow(u, 2.0 * p - 1.0) / (1.0 - 2.0 * p); };
    while (mvn_tail(U) >= tol / 10.0) U *= 2.0;
    double err = 0.0;
    const double I1 = geometric_panels(
        [&](double u) {
            const double d = u > 0.0 ? pow_diff(u, 1.0, p) : 1.0 - std::pow(u, p);
            return d * d;
        },
        U, qtol, err);
    c.truncation = U;
    c.tail_bound = mvn_tail(U);
    c.mvn_integral = I1 + 1.0 / (2.0 * H);
    c.c_mvn = 1.0 / std::sqrt(c.mvn_integral);
    c.c_sfbm = c.c_mvn / std::sqrt(2.0);

    // sfBm kernel at t = 1 on three ranges: s in (0,1), s in (-1,0) with
    // u = -s, and s < -1 with w = -1 - s (second difference, tail ~ w^(p-2)).
    const double n1 = 1.0 / (2.0 * H);
    boost::math::quadrature::tanh_sinh<double> ts;
    double e2 = 0.0, l2 = 0.0;
    const double n2 = ts.integrate(
        [&](double u) {
            const double k = std::pow(1.0 + u, p) - 2.0 * std::pow(u, p);
            return k * k;
        },
        0.0, 1.0, qtol, &e2, &l2);
    err += e2 * l2;
    const double pp = std::abs(p * (p - 1.0));
    auto sec_tail = [&](double w) { return pp * pp * std::pow(w, 2.0 * p - 3.0) / (3.0 - 2.0 * p); };
    double Wc = 1.0;
    while (sec_tail(Wc) >= tol / 10.0) Wc *= 2.0;
    const double n3 = geometric_panels(
        [&](double w) {
            const double k = w > 0.0 ? pow_diff(1.0 + w, 1.0, p) - pow_diff(w, 1.0, p)
                                     : std::pow(2.0, p) - 2.0;
            return k * k;
        },
        Wc, qtol, err);
    c.tail_bound += sec_tail(Wc);
    c.quad_error = err;
    if (!(err < tol)) throw ConvergenceError("calibrate_C: quadrature error estimate " + fmt_num(err) +
                                             " exceeds tol " + fmt_num(tol));
    c.kernel_norm2 = n1 + n2 + n3;
    c.var_S1_target = 2.0 - std::pow(2.0, 2.0 * H - 1.0);
    c.var_S1_raw = c.c_mvn * c.c_mvn * c.kernel_norm2;
    c.var_S1 = c.c_sfbm * c.c_sfbm * c.kernel_norm2;
    c.raw_rel_discrepancy = std::abs(c.var_S1_raw - c.var_S1_target) / c.var_S1_target;
    c.rel_discrepancy = std::abs(c.var_S1 - c.var_S1_target) / c.var_S1_target;
    return c;
}

} // namespace detail

/// Calibrates the MvN normalization by quadrature and cross-checks Var S(1);
/// results are cached per (H, tol).
inline Calibration calibrate(double H, double tol = 1e-10) {
    static std::mutex mu;
    static std::map<std::pair<double, double>, Calibration> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find({H, tol});
        if (it != cache.end()) return it->second;
    }
    Calibration c = detail::calibrate_uncached(H, tol);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(std::make_pair(H, tol), c);
    return c;
}

/// C with Var W(1) = 1 under the Mandelbrot-van Ness integral.
inline double calibrate_C(double H, double tol = 1e-10) { return calibrate(H, tol).c_mvn; }

/// C_W / sqrt(2): the normalization making S = W + Y an sfBm.
inline double calibrate_sfbm_C(double H, double tol = 1e-10) { return calibrate(H, tol).c_sfbm; }

/// ModelParams with the sfBm normalization.
inline ModelParams make_params(double H, double beta, double T, double a, long n) {
    detail::require_hurst(H);
    return ModelParams::make(H, beta, T, a, n, calibrate_sfbm_C(H));
}

// ---------------------------------------------------------------------------
// Exact Gaussian sampler

class CholeskySampler {
public:
    /// Covariance `cov(s, t)` on `grid`; entries with t == 0 are fixed at 0.
    template <class Cov>
    CholeskySampler(const std::vector<double>& grid, Cov&& cov) : grid_(grid) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(grid[i] >= 0.0)) throw ParameterError("sampler grid must be >= 0");
            if (i > 0 && !(grid[i] > grid[i - 1])) throw ParameterError("sampler grid must be strictly increasing");
            if (grid[i] > 0.0) live_.push_back(i);
        }
        const Eigen::Index m = static_cast<Eigen::Index>(live_.size());
        Eigen::MatrixXd G(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) G(i, j) = cov(grid[live_[i]], grid[live_[j]]);
        if (m == 0) return;
        const double scale = G.diagonal().cwiseAbs().maxCoeff();
        for (double jitter = 0.0; jitter <= 1e-10 * 1.0001;
             jitter = jitter == 0.0 ? 1e-14 : jitter * 10.0) {
            Eigen::MatrixXd A = G;
            A.diagonal().array() += jitter * scale;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() == Eigen::Success) {
                L_ = llt.matrixL();
                jitter_ = jitter;
                return;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
        throw DomainError("Gram matrix not positive definite; smallest eigenvalue " +
                          detail::fmt_num(es.eigenvalues()(0)));
    }

    std::vector<double> sample(Engine& rng) const {
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Eigen::Index m = static_cast<Eigen::Index>(live_.size());
        Eigen::VectorXd z(m);
        for (Eigen::Index i = 0; i < m; ++i) z(i) = gauss(rng);
        const Eigen::VectorXd x = m > 0 ? Eigen::VectorXd(L_.triangularView<Eigen::Lower>() * z) : z;
        std::vector<double> out(grid_.size(), 0.0);
        for (Eigen::Index i = 0; i < m; ++i) out[live_[i]] = x(i);
        return out;
    }

    std::vector<double> sample(std::uint64_t seed) const {
        Engine rng = make_engine(seed);
        return sample(rng);
    }

    const std::vector<double>& grid() const { return grid_; }
    double jitter() const { return jitter_; }

private:
    std::vector<double> grid_;
    std::vector<std::size_t> live_;
    Eigen::MatrixXd L_;
    double jitter_{0.0};
};

inline CholeskySampler make_cholesky_sampler(CovModel model, double H, const std::vector<double>& grid) {
    if (!(H > 0.0 && H < 1.0)) throw ParameterError("H must lie in (0,1)");
    return CholeskySampler(grid, [&](double s, double t) { return exact_covariance(model, s, t, H); });
}

inline std::vector<double> cholesky_sample(CovModel model, double H, const std::vector<double>& grid,
                                           std::uint64_t seed) {
    return make_cholesky_sampler(model, H, grid).sample(seed);
}

// ---------------------------------------------------------------------------
// Telegraph second moment

/// n^2 int int_{[0,t]^2} exp(-2 n^2 |u-v|) du dv = t - (1 - exp(-2 n^2 t)) / (2 n^2).
inline double telegraph_variance_oracle(double n, double t) {
    if (!(n >= 1.0)) throw ParameterError("telegraph oracle needs n >= 1");
    if (!(t > 0.0)) throw ParameterError("telegraph oracle needs t > 0");
    const double lam = 2.0 * n * n;
    return t + std::expm1(-lam * t) / lam;
}

// ---------------------------------------------------------------------------
// Deterministic bound suite

struct BoundViolation {
    std::uint64_t trial{};
    double t{};
    double lhs{};
    double rhs{};
};

struct BoundEntry {
    std::string name;
    long trials{};
    double max_ratio{};
    std::vector<BoundViolation> violations;
};

struct LemmaSuiteReport {
    double H{};
    long trials{};
    std::uint64_t seed{};
    std::vector<BoundEntry> entries;

    bool ok() const {
        return std::all_of(entries.begin(), entries.end(), [](const BoundEntry& e) { return e.violations.empty(); });
    }
    std::size_t violation_count() const {
        std::size_t k = 0;
        for (const auto& e : entries) k += e.violations.size();
        return k;
    }
};

namespace detail {

// Random continuous piecewise-linear path on [lo, hi] with value 0 at hi:
// Brownian-like increments on random breakpoints.
inline PiecewisePath random_path(double lo, double hi, Engine& rng, double scale = 1.0) {
    std::uniform_int_distribution<int> count(1, 120);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int k = count(rng);
    std::vector<double> t{lo, hi};
    for (int i = 0; i < k; ++i) t.push_back(lo + (hi - lo) * unit(rng));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    std::vector<double> v(t.size(), 0.0);
    for (std::size_t j = t.size() - 1; j-- > 0;)
        v[j] = v[j + 1] + scale * std::sqrt(t[j + 1] - t[j]) * gauss(rng);
    return PiecewisePath(std::move(t), std::move(v), hi);
}

// (P, Q) with P random and Q = P (occasionally), P plus a small random
// perturbation, or independent.
inline std::pair<PiecewisePath, PiecewisePath> random_pair(double lo, double hi, Engine& rng) {
    std::uniform_int_distribution<int> kind(0, 9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PiecewisePath P = random_path(lo, hi, rng);
    const int k = kind(rng);
    if (k == 0) return {P, P};
    if (k <= 5) {
        const double eps = std::pow(10.0, -4.0 * unit(rng));
        return {P, combine(1.0, P, 1.0, random_path(lo, hi, rng, eps))};
    }
    return {P, random_path(lo, hi, rng)};
}

class BoundRecorder {
public:
    explicit BoundRecorder(std::string name) { e_.name = std::move(name); }
    void add(std::uint64_t trial, double t, double lhs, double rhs) {
        ++e_.trials;
        if (rhs > 0.0) e_.max_ratio = std::max(e_.max_ratio, lhs / rhs);
        else if (lhs > 0.0) e_.max_ratio = std::numeric_limits<double>::infinity();
        if (!(lhs <= rhs * (1.0 + 1e-10))) e_.violations.push_back({trial, t, lhs, rhs});
    }
    BoundEntry take() { return std::move(e_); }

private:
    BoundEntry e_;
};

} // namespace detail

/// Sup-norm-factored inequalities (path pairs through the Stieltjes engine)
/// and the A1/A2/A3 case bounds, for the regime of prm.H.
inline LemmaSuiteReport lemma_bound_suite(const ModelParams& prm, long trials, std::uint64_t seed) {
    if (trials < 1) throw ParameterError("trials must be >= 1");
    const double H = prm.H;
    const double p = prm.p();
    const double T = prm.T;
    const double a = prm.a;
    const double eps = prm.eps_n;
    LemmaSuiteReport rep;
    rep.H = H;
    rep.trials = trials;
    rep.seed = seed;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_t = [&](Engine& r) { return T * (1.0 - unit(r)); };  // (0, T]

    auto diff_dZ = [](const PowerKernel& K, double u, double v, const PiecewisePath& P, const PiecewisePath& Q) {
        return std::abs(integrate_dZ(K, u, v, P) - integrate_dZ(K, u, v, Q));
    };
    const PowerKernel pw{p, 1.0, 0.0, std::nullopt};
    auto Fk = [&](double t) { return PowerKernel{p, 1.0, -t, 0.0}; };

    if (!prm.rough()) {
        detail::BoundRecorder b2("F_t(a) anchor term"), b3("power kernel on [-t,0]"),
            b4("F_t on [a,-t]"), b5("truncated tail");
        for (long i = 0; i < trials; ++i) {
            Engine rng = make_engine(SeedRecord{seed, static_cast<std::uint64_t>(i), 0});
            const double t = draw_t(rng);
            auto [P, Q] = detail::random_pair(a, 0.0, rng);
            const double D = sup_distance(P, Q);
            const double Fa = std::abs(Fk(t).value(a));
            b2.add(i, t, Fa * std::abs(P(a) - Q(a)), D * std::pow(-a, p));
            b3.add(i, t, diff_dZ(pw, -t, 0.0, P, Q), 2.0 * std::pow(T, p) * D);
            b4.add(i, t, diff_dZ(Fk(t), a, -t, P, Q), 2.0 * std::pow(T, p) * D);
            auto [R, S] = detail::random_pair(1.0 / a, 0.0, rng);
            const double cut = std::max(eps, 1.0 / a);
            const double lhs = std::abs(z3_tail_term(TailKind::F, t, H, a, cut, R) -
                                        z3_tail_term(TailKind::F, t, H, a, cut, S));
            const double rhs = sup_distance(R, S) * T * (1.5 - H) * std::pow(1.0 + T / a, H - 2.5) *
                               std::pow(-eps, 0.5 - H);
            b5.add(i, t, lhs, rhs);
        }
        rep.entries = {b2.take(), b3.take(), b4.take(), b5.take()};
        return rep;
    }

    detail::BoundRecorder b8("power kernel on [-t, eps v -t]"), b10("shifted power on [eps v -t, 0]"),
        b12("F_t on [a, a v (-t+eps)]"), b13("F_{t+eps} on [a v (-t+eps), -t]"), A1("A1 <= 2x"),
        A2("A2 <= x"), A3("A3 <= x");
    const double neps = std::pow(-eps, p);
    for (long i = 0; i < trials; ++i) {
        Engine rng = make_engine(SeedRecord{seed, static_cast<std::uint64_t>(i), 1});
        const double t = draw_t(rng);
        auto [P, Q] = detail::random_pair(a, 0.0, rng);
        const double D = sup_distance(P, Q);
        const double m = std::max(eps, -t);
        const double b = std::max(a, -t + eps);
        b8.add(i, t, diff_dZ(pw, -t, m, P, Q), 2.0 * D * neps);
        b10.add(i, t, diff_dZ(PowerKernel{p, 1.0, -eps, std::nullopt}, m, 0.0, P, Q), D * neps);
        b12.add(i, t, diff_dZ(Fk(t), a, b, P, Q), D * 2.0 * (neps + std::pow(-T - a, p)));
        // Only defined when t + eps >= 0 (indicator in the approximant).
        const double t13 = std::max(t, -eps);
        const double b13lo = std::max(a, -t13 + eps);
        b13.add(i, t13, diff_dZ(Fk(t13 + eps), b13lo, -t13, P, Q), 2.0 * D * neps);

        // A-function case bounds at random points of their ranges.
        {
            const double x = (-eps - m) * (1.0 - unit(rng));
            const double A = std::abs(std::min(-x - eps, 0.0) - std::max({-t, eps, -x}));
            A1.add(i, t, A, 2.0 * x);
        }
        {
            const double t2 = std::min(t, -eps) * (1.0 - 1e-12 - unit(rng) * (1.0 - 1e-12));
            const double top = -std::max(a, -t2 + eps);
            const double x = top * (1.0 - unit(rng));
            const double A = std::abs(std::min(-x, -t2) - std::max({-t2 - x, a, -t2 + eps}));
            A2.add(i, t2, A, x);
        }
        {
            const double t3 = std::max(t, -eps);
            const double top = -t3 - eps + std::min(-a, t3 - eps);
            const double x = top * (1.0 - unit(rng));
            const double A = std::abs(std::min(-t3 - x - eps, -t3) - std::max({-t3 - x, -t3 + eps, a}));
            A3.add(i, t3, A, x);
        }
    }
    rep.entries = {b8.take(), b10.take(), b12.take(), b13.take(), A1.take(), A2.take(), A3.take()};
    return rep;
}

} // namespace sfbm
