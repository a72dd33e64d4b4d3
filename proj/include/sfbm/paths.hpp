#pragma once

// Continuous piecewise-linear paths: transport (telegraph) processes,
// grid Brownian motions and the time-inverted tail driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "sfbm/error.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/rng.hpp"

namespace sfbm {

struct Interval {
    double lo;
    double hi;
};

/// Continuous piecewise-linear function on [lo, hi] that vanishes at a
/// distinguished breakpoint (its anchor).
class PiecewisePath {
public:
    PiecewisePath() = default;

    PiecewisePath(std::vector<double> times, std::vector<double> values, double anchor)
        : t_(std::move(times)), v_(std::move(values)), anchor_(anchor) {
        if (t_.size() < 2 || t_.size() != v_.size())
            throw ParameterError("path needs >= 2 breakpoints with matching values");
        for (std::size_t k = 0; k < t_.size(); ++k) {
            if (!std::isfinite(t_[k]) || !std::isfinite(v_[k]))
                throw ParameterError("path breakpoints and values must be finite");
            if (k > 0 && !(t_[k] > t_[k - 1]))
                throw ParameterError("path breakpoints must be strictly increasing");
        }
        const auto it = std::lower_bound(t_.begin(), t_.end(), anchor_);
        if (it == t_.end() || *it != anchor_)
            throw ParameterError("path anchor must be a breakpoint");
        if (v_[static_cast<std::size_t>(it - t_.begin())] != 0.0)
            throw ParameterError("path value at anchor must be 0");
    }

    double lo() const { return t_.front(); }
    double hi() const { return t_.back(); }
    double anchor() const { return anchor_; }
    std::size_t size() const { return t_.size(); }
    std::size_t segments() const { return t_.size() - 1; }
    std::span<const double> times() const { return t_; }
    std::span<const double> values() const { return v_; }

    double slope(std::size_t k) const { return (v_[k + 1] - v_[k]) / (t_[k + 1] - t_[k]); }

    double max_abs_slope() const {
        double m = 0.0;
        for (std::size_t k = 0; k + 1 < t_.size(); ++k) m = std::max(m, std::abs(slope(k)));
        return m;
    }

    // Index of the segment [t_k, t_{k+1}] containing s (right-closed at hi).
    std::size_t segment_of(double s) const {
        auto it = std::upper_bound(t_.begin(), t_.end(), s);
        std::size_t k = static_cast<std::size_t>(it - t_.begin());
        if (k == 0) return 0;
        return std::min(k - 1, segments() - 1);
    }

    double operator()(double s) const {
        if (!(s >= lo() && s <= hi()))
            throw DomainError("path evaluated at " + detail::fmt_num(s) + " outside [" +
                              detail::fmt_num(lo()) + ", " + detail::fmt_num(hi()) + "]");
        const std::size_t k = segment_of(s);
        if (s == t_[k]) return v_[k];
        if (s == t_[k + 1]) return v_[k + 1];
        const double w = (s - t_[k]) / (t_[k + 1] - t_[k]);
        return v_[k] + w * (v_[k + 1] - v_[k]);
    }

    PiecewisePath scaled(double lambda) const {
        std::vector<double> v(v_);
        for (double& x : v) x *= lambda;
        return PiecewisePath(t_, std::move(v), anchor_);
    }

private:
    std::vector<double> t_;
    std::vector<double> v_;
    double anchor_{};
};

inline double evaluate(const PiecewisePath& path, double t) { return path(t); }

/// alpha P + beta Q on the union of both breakpoint sets.
inline PiecewisePath combine(double alpha, const PiecewisePath& P, double beta, const PiecewisePath& Q) {
    if (P.lo() != Q.lo() || P.hi() != Q.hi())
        throw ParameterError("combine: paths must share their domain");
    std::vector<double> t;
    t.reserve(P.size() + Q.size());
    std::merge(P.times().begin(), P.times().end(), Q.times().begin(), Q.times().end(),
               std::back_inserter(t));
    t.erase(std::unique(t.begin(), t.end()), t.end());
    std::vector<double> v(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) v[k] = alpha * P(t[k]) + beta * Q(t[k]);
    const double anchor = P.anchor();
    if (alpha * P(anchor) + beta * Q(anchor) != 0.0)
        throw ParameterError("combine: paths must vanish at a common anchor");
    return PiecewisePath(std::move(t), std::move(v), anchor);
}

/// Max |P - Q| over the probe grid united with both breakpoint sets; exact
/// for piecewise-linear pairs since |P - Q| peaks at a breakpoint.
inline double sup_distance(const PiecewisePath& P, const PiecewisePath& Q,
                           std::span<const double> probe_grid = {}) {
    if (P.lo() != Q.lo() || P.hi() != Q.hi())
        throw ParameterError("sup_distance: paths must share their domain");
    double m = 0.0;
    auto probe = [&](double s) { m = std::max(m, std::abs(P(s) - Q(s))); };
    for (double s : P.times()) probe(s);
    for (double s : Q.times()) probe(s);
    for (double s : probe_grid)
        if (s >= P.lo() && s <= P.hi()) probe(s);
    return m;
}

enum class AnchorEnd { left, right };

namespace detail {

// Shifting switch times onto [lo, hi] can round an interior breakpoint onto
// an endpoint; such breakpoints are dropped.
inline void drop_collapsed(std::vector<double>& t, std::vector<double>& v) {
    std::size_t w = 1;
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (k + 1 < t.size() && !(t[k] > t[w - 1] && t[k] < t.back())) continue;
        t[w] = t[k];
        v[w] = v[k];
        ++w;
    }
    t.resize(w);
    v.resize(w);
}

} // namespace detail

/// Uniform transport process of level n on `iv`, vanishing at the chosen end.
///
/// Starts with velocity +n or -n (probability 1/2 each) and flips velocity
/// after i.i.d. Exp(n^2) holding times. A right-anchored path is the forward
/// path on [0, hi - lo] run backwards in time from hi.
inline PiecewisePath generate_transport(long n, Interval iv, AnchorEnd end, Engine& rng) {
    if (n < 1) throw ParameterError("transport level n must be >= 1");
    if (!(iv.hi > iv.lo)) throw ParameterError("transport interval must be nonempty");
    const double speed = static_cast<double>(n);
    const double rate = speed * speed;
    const double L = iv.hi - iv.lo;

    std::exponential_distribution<double> hold(rate);
    std::bernoulli_distribution coin(0.5);
    double vel = coin(rng) ? speed : -speed;

    std::vector<double> u{0.0};
    std::vector<double> x{0.0};
    const std::size_t expect = static_cast<std::size_t>(rate * L * 1.05 + 16.0);
    u.reserve(expect);
    x.reserve(expect);
    double clock = 0.0;
    double pos = 0.0;
    for (;;) {
        const double tau = hold(rng);
        const double next = clock + tau;
        if (next == clock) continue;  // hold shorter than one ulp of the clock
        if (!(next < L)) {
            x.push_back(pos + vel * (L - clock));
            u.push_back(L);
            break;
        }
        pos += vel * tau;
        clock = next;
        u.push_back(clock);
        x.push_back(pos);
        vel = -vel;
    }

    if (end == AnchorEnd::left) {
        for (double& s : u) s += iv.lo;
        u.front() = iv.lo;
        u.back() = iv.hi;
        detail::drop_collapsed(u, x);
        return PiecewisePath(std::move(u), std::move(x), iv.lo);
    }
    std::vector<double> t(u.size());
    std::vector<double> v(u.size());
    const std::size_t m = u.size();
    for (std::size_t k = 0; k < m; ++k) {
        t[k] = iv.hi - u[m - 1 - k];
        v[k] = x[m - 1 - k];
    }
    t.front() = iv.lo;
    t.back() = iv.hi;
    detail::drop_collapsed(t, v);
    return PiecewisePath(std::move(t), std::move(v), iv.hi);
}

inline PiecewisePath generate_transport(long n, Interval iv, AnchorEnd end, std::uint64_t seed) {
    Engine rng = make_engine(seed);
    return generate_transport(n, iv, end, rng);
}

/// Grid versions of the three Brownian drivers built from one two-sided
/// Brownian motion B with B(0) = 0.
struct GridBrownian {
    PiecewisePath B1;  // B on [0, T]
    PiecewisePath B2;  // B on [a, 0]
    PiecewisePath B3;  // s B(1/s) on [1/a, 0], 0 at s = 0
};

inline std::size_t cells_for(double length, double step) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / step - 1e-9)));
}

/// Samples B on uniform grids of [0,T] and [a,0], and B3 on a uniform grid
/// of [1/a, 0] whose image points 1/s carry exact values of B on (-inf, a].
inline GridBrownian sample_grid_bm(double step, double T, double a, const SeedRecord& seed) {
    if (!(step > 0.0)) throw ParameterError("grid step must be > 0");
    if (!(T > 0.0) || !(a < -T)) throw ParameterError("grid BM needs T > 0 and a < -T");
    if (step > T || step > -a) throw ParameterError("grid step must not exceed T or |a|");
    std::normal_distribution<double> gauss(0.0, 1.0);

    GridBrownian out;
    {
        Engine rng = make_engine(seed.with_stream(0));
        const std::size_t K = cells_for(T, step);
        const double h = T / static_cast<double>(K);
        const double sd = std::sqrt(h);
        std::vector<double> t(K + 1), v(K + 1);
        t[0] = 0.0;
        v[0] = 0.0;
        for (std::size_t k = 1; k <= K; ++k) {
            t[k] = static_cast<double>(k) * h;
            v[k] = v[k - 1] + sd * gauss(rng);
        }
        t[K] = T;
        out.B1 = PiecewisePath(std::move(t), std::move(v), 0.0);
    }
    {
        Engine rng = make_engine(seed.with_stream(1));
        const std::size_t K = cells_for(-a, step);
        const double h = -a / static_cast<double>(K);
        const double sd = std::sqrt(h);
        std::vector<double> t(K + 1), v(K + 1);
        t[K] = 0.0;
        v[K] = 0.0;
        for (std::size_t j = 1; j <= K; ++j) {
            t[K - j] = -static_cast<double>(j) * h;
            v[K - j] = v[K - j + 1] + sd * gauss(rng);
        }
        t[0] = a;
        out.B2 = PiecewisePath(std::move(t), std::move(v), 0.0);
    }
    {
        Engine rng = make_engine(seed.with_stream(2));
        const double L = -1.0 / a;
        const std::size_t K = cells_for(L, step);
        const double h = L / static_cast<double>(K);
        // Grid points v_j = -j h, j = 0..K; v_K = 1/a maps to B(a).
        std::vector<double> t(K + 1), v(K + 1);
        t[0] = 1.0 / a;
        t[K] = 0.0;
        v[K] = 0.0;
        double b = out.B2.values().front();  // B(a)
        v[0] = b / a;
        for (std::size_t j = K - 1; j >= 1; --j) {
            const double vj = -static_cast<double>(j) * h;
            const double u_prev = -1.0 / (static_cast<double>(j + 1) * h);  // closer to 0
            const double u_this = 1.0 / vj;
            b += std::sqrt(u_prev - u_this) * gauss(rng);
            t[K - j] = vj;
            v[K - j] = vj * b;
        }
        out.B3 = PiecewisePath(std::move(t), std::move(v), 0.0);
    }
    return out;
}

enum class DriverMode { transport, grid_bm };

inline const char* to_string(DriverMode m) { return m == DriverMode::transport ? "transport" : "grid_bm"; }

/// The driver triple (Z1, Z2, Z3) substituted for (B1, B2, B3).
struct DriverSet {
    PiecewisePath Z1;  // on [0, T], anchored at 0
    PiecewisePath Z2;  // on [a, 0], anchored at 0
    PiecewisePath Z3;  // on [1/a, 0], anchored at 0
    DriverMode mode{DriverMode::transport};
    SeedRecord seed{};
};

struct DriverOptions {
    DriverMode mode{DriverMode::transport};
    double grid_step{0.0};  // 0 -> T / 2048
};

/// Drivers for replica `seed.replica`; transport paths use streams 0, 1, 2
/// and are mutually independent.
inline DriverSet make_drivers(const ModelParams& prm, const DriverOptions& opt, const SeedRecord& seed) {
    DriverSet d;
    d.mode = opt.mode;
    d.seed = seed;
    if (opt.mode == DriverMode::transport) {
        Engine r1 = make_engine(seed.with_stream(0));
        Engine r2 = make_engine(seed.with_stream(1));
        Engine r3 = make_engine(seed.with_stream(2));
        d.Z1 = generate_transport(prm.n, {0.0, prm.T}, AnchorEnd::left, r1);
        d.Z2 = generate_transport(prm.n, {prm.a, 0.0}, AnchorEnd::right, r2);
        d.Z3 = generate_transport(prm.n, {1.0 / prm.a, 0.0}, AnchorEnd::right, r3);
    } else {
        const double step = opt.grid_step > 0.0 ? opt.grid_step : prm.T / 2048.0;
        GridBrownian g = sample_grid_bm(step, prm.T, prm.a, seed);
        d.Z1 = std::move(g.B1);
        d.Z2 = std::move(g.B2);
        d.Z3 = std::move(g.B3);
    }
    return d;
}

/// CSV with header `t,value`, one row per breakpoint, 17 significant digits.
inline void write_path_csv(std::ostream& os, const PiecewisePath& path) {
    os << "t,value\n";
    char buf[64];
    for (std::size_t k = 0; k < path.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.times()[k] + 0.0, path.values()[k] + 0.0);
        os << buf;
    }
}

} // namespace sfbm
