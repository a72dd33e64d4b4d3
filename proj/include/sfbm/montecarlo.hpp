#pragma once

// Replica engine: deterministic block-parallel accumulation of first and
// second moments, jackknife standard errors, discrepancy scoring against
// exact covariances, and the anchor / level studies.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sfbm/approximants.hpp"
#include "sfbm/error.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/rng.hpp"

namespace sfbm {

/// Single-pass mean / co-moment accumulator with exact pairwise merge
/// (Chan et al.) and its inverse, used for leave-one-block-out jackknife.
class MomentAccumulator {
public:
    MomentAccumulator() = default;
    explicit MomentAccumulator(std::size_t dim) : d_(dim), mean_(dim, 0.0), m2_(dim * dim, 0.0) {}

    std::size_t dim() const { return d_; }
    double count() const { return n_; }
    double mean(std::size_t i) const { return mean_[i]; }
    double comoment(std::size_t i, std::size_t j) const { return m2_[i * d_ + j]; }
    double cov(std::size_t i, std::size_t j) const {
        return n_ > 1.0 ? m2_[i * d_ + j] / (n_ - 1.0) : std::numeric_limits<double>::quiet_NaN();
    }

    void add(const std::vector<double>& x) {
        n_ += 1.0;
        std::vector<double> delta(d_);
        for (std::size_t i = 0; i < d_; ++i) {
            delta[i] = x[i] - mean_[i];
            mean_[i] += delta[i] / n_;
        }
        for (std::size_t i = 0; i < d_; ++i) {
            const double di = x[i] - mean_[i];
            for (std::size_t j = 0; j < d_; ++j) m2_[i * d_ + j] += delta[j] * di;
        }
    }

    void merge(const MomentAccumulator& b) {
        if (b.n_ == 0.0) return;
        if (n_ == 0.0) {
            *this = b;
            return;
        }
        const double n = n_ + b.n_;
        const double f = n_ * b.n_ / n;
        std::vector<double> delta(d_);
        for (std::size_t i = 0; i < d_; ++i) delta[i] = b.mean_[i] - mean_[i];
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j) m2_[i * d_ + j] += b.m2_[i * d_ + j] + f * delta[i] * delta[j];
        for (std::size_t i = 0; i < d_; ++i) mean_[i] += delta[i] * b.n_ / n;
        n_ = n;
    }

    /// The accumulator A with merge(A, b) == *this.
    MomentAccumulator without(const MomentAccumulator& b) const {
        MomentAccumulator a(d_);
        a.n_ = n_ - b.n_;
        if (a.n_ <= 0.0) return MomentAccumulator(d_);
        for (std::size_t i = 0; i < d_; ++i) a.mean_[i] = (n_ * mean_[i] - b.n_ * b.mean_[i]) / a.n_;
        const double f = a.n_ * b.n_ / n_;
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j) {
                const double di = b.mean_[i] - a.mean_[i];
                const double dj = b.mean_[j] - a.mean_[j];
                a.m2_[i * d_ + j] = m2_[i * d_ + j] - b.m2_[i * d_ + j] - f * di * dj;
            }
        return a;
    }

private:
    std::size_t d_{};
    double n_{};
    std::vector<double> mean_;
    std::vector<double> m2_;
};

struct RunOptions {
    unsigned threads{0};       // 0 -> hardware concurrency
    std::size_t max_blocks{256};
    double max_abort_fraction{1e-3};
};

/// Moments of a replica-indexed vector statistic, with jackknife errors.
struct MomentSummary {
    std::size_t dim{};
    long M_requested{};
    long M{};       // successful replicas
    long aborts{};
    std::size_t blocks{};
    std::vector<double> mean;
    std::vector<double> se_mean;
    std::vector<double> cov;     // dim x dim, row-major
    std::vector<double> se_cov;  // dim x dim
    double runtime_s{};
    std::string first_error;
};

namespace detail {

inline MomentSummary summarize(const std::vector<MomentAccumulator>& blocks, std::size_t dim) {
    MomentSummary s;
    s.dim = dim;
    s.blocks = blocks.size();
    MomentAccumulator total(dim);
    for (const auto& b : blocks) total.merge(b);
    s.M = static_cast<long>(total.count());
    s.mean.assign(dim, 0.0);
    s.cov.assign(dim * dim, std::numeric_limits<double>::quiet_NaN());
    s.se_mean.assign(dim, std::numeric_limits<double>::quiet_NaN());
    s.se_cov.assign(dim * dim, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] = total.mean(i);
    if (total.count() > 1.0)
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) s.cov[i * dim + j] = total.cov(i, j);

    std::vector<const MomentAccumulator*> used;
    for (const auto& b : blocks)
        if (b.count() > 0.0 && total.count() - b.count() >= 2.0) used.push_back(&b);
    const std::size_t B = used.size();
    if (B < 2) return s;
    std::vector<double> jm(B * dim), jc(B * dim * dim);
    for (std::size_t k = 0; k < B; ++k) {
        const MomentAccumulator loo = total.without(*used[k]);
        for (std::size_t i = 0; i < dim; ++i) {
            jm[k * dim + i] = loo.mean(i);
            for (std::size_t j = 0; j < dim; ++j) jc[(k * dim + i) * dim + j] = loo.cov(i, j);
        }
    }
    const double fac = static_cast<double>(B - 1) / static_cast<double>(B);
    auto jack = [&](const std::vector<double>& v, std::size_t stride, std::size_t idx) {
        double avg = 0.0;
        for (std::size_t k = 0; k < B; ++k) avg += v[k * stride + idx];
        avg /= static_cast<double>(B);
        double ss = 0.0;
        for (std::size_t k = 0; k < B; ++k) {
            const double d = v[k * stride + idx] - avg;
            ss += d * d;
        }
        return std::sqrt(fac * ss);
    };
    for (std::size_t i = 0; i < dim; ++i) {
        s.se_mean[i] = jack(jm, dim, i);
        for (std::size_t j = 0; j < dim; ++j) s.se_cov[i * dim + j] = jack(jc, dim * dim, i * dim + j);
    }
    return s;
}

} // namespace detail

/// Runs `sample(replica)` for replica = 0..M-1 and summarizes. Replicas are
/// grouped into contiguous blocks; blocks run on worker threads and merge in
/// block order, so results do not depend on the thread count. A throwing
/// replica is counted as aborted; too many aborts raise RunFailed.
inline MomentSummary run_moments(long M, std::size_t dim,
                                 const std::function<std::vector<double>(std::uint64_t)>& sample,
                                 const RunOptions& opt = {}) {
    if (M < 2) throw ParameterError("replica count M must be >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(M), std::max<std::size_t>(opt.max_blocks, 2));
    std::vector<MomentAccumulator> blocks(B, MomentAccumulator(dim));
    std::vector<long> aborts(B, 0);
    std::vector<std::string> errors(B);
    std::atomic<std::size_t> next{0};

    auto work = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= B) return;
            const long lo = static_cast<long>(b * static_cast<std::size_t>(M) / B);
            const long hi = static_cast<long>((b + 1) * static_cast<std::size_t>(M) / B);
            for (long r = lo; r < hi; ++r) {
                try {
                    const std::vector<double> x = sample(static_cast<std::uint64_t>(r));
                    if (x.size() != dim) throw std::logic_error("sampler returned wrong dimension");
                    blocks[b].add(x);
                } catch (const std::exception& e) {
                    if (aborts[b]++ == 0) errors[b] = e.what();
                }
            }
        }
    };
    unsigned nt = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, B));
    if (nt <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < nt; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    MomentSummary s = detail::summarize(blocks, dim);
    s.M_requested = M;
    s.aborts = std::accumulate(aborts.begin(), aborts.end(), 0L);
    for (const auto& e : errors)
        if (!e.empty()) {
            s.first_error = e;
            break;
        }
    s.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (static_cast<double>(s.aborts) > opt.max_abort_fraction * static_cast<double>(M))
        throw RunFailed(std::to_string(s.aborts) + " of " + std::to_string(M) +
                        " replicas aborted (first error: " + s.first_error + ")");
    return s;
}

// ---------------------------------------------------------------------------
// Covariance reports

struct CovarianceReport {
    ModelParams params{};
    DriverMode mode{DriverMode::transport};
    Which which{Which::S};
    TailSign tail_sign{TailSign::minus};
    std::uint64_t master_seed{};
    std::vector<double> grid;
    long M{};
    long M_requested{};
    long aborts{};
    std::vector<double> mean;
    std::vector<double> se_mean;
    std::vector<std::vector<double>> cov;
    std::vector<std::vector<double>> se_cov;
    double runtime_s{};
};

/// Cross-covariance block Cov(W(s_i), Y(t_j)) from a joint run.
struct CrossReport {
    std::vector<double> grid;
    std::vector<std::vector<double>> cov;
    std::vector<std::vector<double>> se_cov;
};

/// Everything one joint replica pass yields for one tail-sign convention.
struct JointReport {
    TailSign tail_sign{TailSign::minus};
    CovarianceReport W, Y, S;
    CrossReport WY;
};

struct JointConfig {
    DriverOptions drivers{};
    ApproximantOptions approx{};
    RunOptions run{};
    std::vector<TailSign> signs{TailSign::minus};
};

namespace detail {

inline void check_grid(const std::vector<double>& grid, double T) {
    if (grid.empty()) throw ParameterError("grid must be nonempty");
    for (double t : grid)
        if (!(t >= 0.0 && t <= T)) throw ParameterError("grid point " + fmt_num(t) + " outside [0, T]");
}

inline CovarianceReport slice(const MomentSummary& m, std::size_t off, std::size_t g) {
    CovarianceReport r;
    r.M = m.M;
    r.M_requested = m.M_requested;
    r.aborts = m.aborts;
    r.runtime_s = m.runtime_s;
    r.mean.assign(m.mean.begin() + off, m.mean.begin() + off + g);
    r.se_mean.assign(m.se_mean.begin() + off, m.se_mean.begin() + off + g);
    r.cov.assign(g, std::vector<double>(g));
    r.se_cov.assign(g, std::vector<double>(g));
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            r.cov[i][j] = m.cov[(off + i) * m.dim + off + j];
            r.se_cov[i][j] = m.se_cov[(off + i) * m.dim + off + j];
        }
    return r;
}

} // namespace detail

/// One replica pass evaluating W and Y on `grid` for each requested tail
/// sign; the vector statistic per sign is (W(grid), Y(grid), S(grid)).
inline std::vector<JointReport> run_joint(const ModelParams& prm, const std::vector<double>& grid, long M,
                                          std::uint64_t master_seed, const JointConfig& cfg = {}) {
    detail::check_grid(grid, prm.T);
    if (cfg.signs.empty()) throw ParameterError("at least one tail sign required");
    const std::size_t g = grid.size();
    const std::size_t per = 3 * g;
    const std::size_t dim = per * cfg.signs.size();
    auto sample = [&](std::uint64_t r) {
        DriverSet d = make_drivers(prm, cfg.drivers, SeedRecord{master_seed, r, 0});
        const ApproximantEvaluator ev(prm, std::move(d), cfg.approx);
        std::vector<ApproximantEvaluator::Parts> pw(g), py(g);
        for (std::size_t i = 0; i < g; ++i) {
            pw[i] = ev.parts_W(grid[i]);
            py[i] = ev.parts_Y(grid[i]);
        }
        std::vector<double> x(dim);
        for (std::size_t k = 0; k < cfg.signs.size(); ++k) {
            const double sg = cfg.signs[k] == TailSign::minus ? 1.0 : -1.0;
            for (std::size_t i = 0; i < g; ++i) {
                const double w = prm.C * (pw[i].main + sg * pw[i].tail);
                const double y = prm.C * (py[i].main + sg * py[i].tail);
                x[k * per + i] = w;
                x[k * per + g + i] = y;
                x[k * per + 2 * g + i] = w + y;
            }
        }
        return x;
    };
    const MomentSummary m = run_moments(M, dim, sample, cfg.run);

    std::vector<JointReport> out;
    for (std::size_t k = 0; k < cfg.signs.size(); ++k) {
        JointReport jr;
        jr.tail_sign = cfg.signs[k];
        const Which ws[3] = {Which::W, Which::Y, Which::S};
        CovarianceReport* dst[3] = {&jr.W, &jr.Y, &jr.S};
        for (int c = 0; c < 3; ++c) {
            *dst[c] = detail::slice(m, k * per + static_cast<std::size_t>(c) * g, g);
            dst[c]->params = prm;
            dst[c]->mode = cfg.drivers.mode;
            dst[c]->which = ws[c];
            dst[c]->tail_sign = cfg.signs[k];
            dst[c]->master_seed = master_seed;
            dst[c]->grid = grid;
        }
        jr.WY.grid = grid;
        jr.WY.cov.assign(g, std::vector<double>(g));
        jr.WY.se_cov.assign(g, std::vector<double>(g));
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = 0; j < g; ++j) {
                const std::size_t idx = (k * per + i) * dim + k * per + g + j;
                jr.WY.cov[i][j] = m.cov[idx];
                jr.WY.se_cov[i][j] = m.se_cov[idx];
            }
        out.push_back(std::move(jr));
    }
    return out;
}

/// Empirical mean / covariance of `which` on `grid` over M replicas.
inline CovarianceReport run_replicas(const ModelParams& prm, const std::vector<double>& grid, long M,
                                     std::uint64_t master_seed, Which which, DriverMode mode,
                                     const ApproximantOptions& approx = {}, const RunOptions& run = {}) {
    JointConfig cfg;
    cfg.drivers.mode = mode;
    cfg.approx = approx;
    cfg.run = run;
    cfg.signs = {approx.tail_sign};
    JointReport jr = run_joint(prm, grid, M, master_seed, cfg).front();
    switch (which) {
    case Which::W: return jr.W;
    case Which::Y: return jr.Y;
    case Which::S: return jr.S;
    }
    return jr.S;
}

// ---------------------------------------------------------------------------
// Discrepancy scoring

struct DiscrepancyRow {
    double s{};
    double t{};
    double emp{};
    double exact{};
    double se{};
    double z{};    // NaN when se is zero or unavailable
    double rel{};  // NaN when exact == 0
    bool flagged{};
};

struct Discrepancy {
    double max_z{};
    double max_rel{};
    std::size_t flagged{};
    std::vector<DiscrepancyRow> table;
};

/// Scores emp[i][j] against target(s_i, t_j); upper triangle only when
/// `symmetric`. Entries with zero or undefined SE are excluded from max_z
/// and flagged (unless both emp and exact are exactly 0).
template <class Target>
Discrepancy score_matrix(const std::vector<double>& grid, const std::vector<std::vector<double>>& emp,
                         const std::vector<std::vector<double>>& se, Target&& target, bool symmetric = true) {
    Discrepancy d;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = symmetric ? i : 0; j < grid.size(); ++j) {
            DiscrepancyRow r;
            r.s = grid[i];
            r.t = grid[j];
            r.emp = emp[i][j];
            r.exact = target(grid[i], grid[j]);
            r.se = se[i][j];
            r.z = (std::isfinite(r.se) && r.se > 0.0) ? (r.emp - r.exact) / r.se : nan;
            r.rel = r.exact != 0.0 ? std::abs(r.emp - r.exact) / std::abs(r.exact) : nan;
            if (std::isnan(r.z)) {
                r.flagged = !(r.emp == 0.0 && r.exact == 0.0);
                if (r.flagged) ++d.flagged;
            } else {
                d.max_z = std::max(d.max_z, std::abs(r.z));
            }
            if (!std::isnan(r.rel)) d.max_rel = std::max(d.max_rel, r.rel);
            d.table.push_back(r);
        }
    return d;
}

/// Against the plain fbm / sfbm covariance (unit scale).
inline Discrepancy covariance_discrepancy(const CovarianceReport& rep, CovModel model) {
    const double H = rep.params.H;
    return score_matrix(rep.grid, rep.cov, rep.se_cov,
                        [&](double s, double t) { return exact_covariance(model, s, t, H); });
}

/// Against the law implied by the report's own normalization C:
/// r fbm for W and Y, 2 r sfbm for S, with r = (C/C_W)^2.
inline Discrepancy covariance_discrepancy(const CovarianceReport& rep) {
    const double H = rep.params.H;
    const double C = rep.params.C;
    const Which w = rep.which;
    return score_matrix(rep.grid, rep.cov, rep.se_cov,
                        [&](double s, double t) { return target_covariance(w, s, t, H, C); });
}

inline Discrepancy cross_discrepancy(const CrossReport& rep, const ModelParams& prm) {
    return score_matrix(rep.grid, rep.cov, rep.se_cov,
                        [&](double s, double t) { return target_cross_covariance(s, t, prm.H, prm.C); },
                        false);
}

/// W, Y, S and the W-Y cross block scored together.
struct SuiteScore {
    Discrepancy W, Y, S, WY;
    double max_z() const { return std::max({W.max_z, Y.max_z, S.max_z, WY.max_z}); }
    double max_rel() const { return std::max({W.max_rel, Y.max_rel, S.max_rel, WY.max_rel}); }
};

inline SuiteScore score_suite(const JointReport& jr) {
    return {covariance_discrepancy(jr.W), covariance_discrepancy(jr.Y), covariance_discrepancy(jr.S),
            cross_discrepancy(jr.WY, jr.S.params)};
}

// ---------------------------------------------------------------------------
// Studies

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ParameterError("spearman needs two equal-length samples");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct TailStudyRow {
    double a{};
    double max_rel{};
    double max_z{};
    double runtime_s{};
};

struct TailStudy {
    DriverMode mode{DriverMode::transport};
    std::vector<TailStudyRow> rows;
    double spearman_rho{};  // rank correlation of max_rel with |a|
};

/// S-covariance discrepancy as a function of the tail anchor.
inline TailStudy tail_sensitivity_study(const ModelParams& base, const std::vector<double>& a_list,
                                        const std::vector<double>& grid, long M, std::uint64_t seed,
                                        DriverMode mode = DriverMode::transport,
                                        const ApproximantOptions& approx = {}, const RunOptions& run = {}) {
    if (a_list.empty()) throw ParameterError("a_list must be nonempty");
    TailStudy st;
    st.mode = mode;
    for (double a : a_list) {
        if (!(a < -base.T)) throw ParameterError("every anchor must satisfy a < -T");
        const ModelParams prm = ModelParams::make(base.H, base.beta, base.T, a, base.n, base.C);
        const CovarianceReport rep = run_replicas(prm, grid, M, seed, Which::S, mode, approx, run);
        const Discrepancy d = covariance_discrepancy(rep);
        st.rows.push_back({a, d.max_rel, d.max_z, rep.runtime_s});
    }
    if (st.rows.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& r : st.rows) {
            x.push_back(-r.a);
            y.push_back(r.max_rel);
        }
        st.spearman_rho = spearman(x, y);
    }
    return st;
}

struct RateStudyRow {
    long n{};
    double eps_n{};
    double alpha_n{};
    double max_rel{};
    double max_z{};
    double gap_mean{};  // E sup_t |S^(n_{k-1})(t) - S^(n_k)(t)|; 0 for the first row
    double gap_se{};
};

struct RateStudy {
    DriverMode mode{DriverMode::grid_bm};
    std::vector<RateStudyRow> rows;
    double gap_slope{std::numeric_limits<double>::quiet_NaN()};      // log-log slope of gap_mean vs n
    double max_rel_slope{std::numeric_limits<double>::quiet_NaN()};  // log-log slope of max_rel vs n
    double runtime_s{};
};

namespace detail {

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

/// Per-level S-covariance discrepancy and the sup-gap between consecutive
/// levels evaluated on the same replica's drivers (drivers are shared across
/// levels in grid_bm mode; in transport mode each level draws its own).
inline RateStudy rate_study(const ModelParams& base, const std::vector<long>& n_list,
                            const std::vector<double>& grid, long M, std::uint64_t seed,
                            DriverMode mode = DriverMode::grid_bm, const ApproximantOptions& approx = {},
                            const RunOptions& run = {}) {
    if (n_list.size() < 2) throw ParameterError("n_list needs at least two levels");
    for (std::size_t k = 1; k < n_list.size(); ++k)
        if (n_list[k] < n_list[k - 1]) throw ParameterError("n_list must be nondecreasing");
    detail::check_grid(grid, base.T);
    const std::size_t K = n_list.size();
    const std::size_t g = grid.size();
    std::vector<ModelParams> levels;
    for (long n : n_list) levels.push_back(ModelParams::make(base.H, base.beta, base.T, base.a, n, base.C));
    const std::size_t dim = K * g + (K - 1);
    DriverOptions dopt;
    dopt.mode = mode;

    auto sample = [&](std::uint64_t r) {
        std::vector<double> x(dim, 0.0);
        std::vector<double> prev;
        DriverSet shared;
        if (mode == DriverMode::grid_bm) shared = make_drivers(levels[0], dopt, SeedRecord{seed, r, 0});
        for (std::size_t k = 0; k < K; ++k) {
            DriverSet d = mode == DriverMode::grid_bm ? shared : make_drivers(levels[k], dopt, SeedRecord{seed, r, 0});
            const ApproximantEvaluator ev(levels[k], std::move(d), approx);
            std::vector<double> cur(g);
            for (std::size_t i = 0; i < g; ++i) cur[i] = ev.eval_S(grid[i]);
            std::copy(cur.begin(), cur.end(), x.begin() + static_cast<std::ptrdiff_t>(k * g));
            if (k > 0) {
                double gap = 0.0;
                for (std::size_t i = 0; i < g; ++i) gap = std::max(gap, std::abs(cur[i] - prev[i]));
                x[K * g + k - 1] = gap;
            }
            prev = std::move(cur);
        }
        return x;
    };
    const MomentSummary m = run_moments(M, dim, sample, run);

    RateStudy st;
    st.mode = mode;
    st.runtime_s = m.runtime_s;
    std::vector<double> ns, gaps, rels;
    for (std::size_t k = 0; k < K; ++k) {
        CovarianceReport rep = detail::slice(m, k * g, g);
        rep.params = levels[k];
        rep.mode = mode;
        rep.which = Which::S;
        rep.tail_sign = approx.tail_sign;
        rep.master_seed = seed;
        rep.grid = grid;
        const Discrepancy d = covariance_discrepancy(rep);
        RateStudyRow row;
        row.n = n_list[k];
        row.eps_n = levels[k].eps_n;
        row.alpha_n = levels[k].alpha_n;
        row.max_rel = d.max_rel;
        row.max_z = d.max_z;
        if (k > 0) {
            row.gap_mean = m.mean[K * g + k - 1];
            row.gap_se = m.se_mean[K * g + k - 1];
            ns.push_back(static_cast<double>(n_list[k]));
            gaps.push_back(row.gap_mean);
        }
        rels.push_back(d.max_rel);
        st.rows.push_back(row);
    }
    st.gap_slope = detail::loglog_slope(ns, gaps);
    std::vector<double> all_n;
    for (long n : n_list) all_n.push_back(static_cast<double>(n));
    st.max_rel_slope = detail::loglog_slope(all_n, rels);
    return st;
}

} // namespace sfbm
