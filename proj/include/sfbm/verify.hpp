#pragma once

// Deterministic self-checks bundled for the command line: kernel bounds,
// direct vs by-parts Stieltjes integrals, the lemma-bound suite, and the
// reduced vs iterated tail term.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sfbm/kernels.hpp"
#include "sfbm/oracles.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/rng.hpp"
#include "sfbm/stieltjes.hpp"

namespace sfbm {

struct IdentityCheck {
    std::string name;
    long trials{};
    double tol{};
    double max_abs_diff{};
    long violations{};
};

struct VerifyReport {
    ModelParams params{};
    std::uint64_t seed{};
    KernelBoundReport kernel_bounds;
    IdentityCheck by_parts{"direct vs by-parts", 0, 1e-9, 0.0, 0};
    LemmaSuiteReport lemma_suite;
    IdentityCheck fubini{"reduced vs iterated tail", 0, 1e-7, 0.0, 0};

    bool ok() const {
        return kernel_bounds.ok() && by_parts.violations == 0 && lemma_suite.ok() && fubini.violations == 0;
    }
};

namespace detail {

inline void record(IdentityCheck& c, double a, double b) {
    ++c.trials;
    const double d = std::abs(a - b);
    c.max_abs_diff = std::max(c.max_abs_diff, d);
    if (!(d <= c.tol)) ++c.violations;
}

} // namespace detail

inline VerifyReport verify_suite(const ModelParams& prm, long trials, std::uint64_t seed) {
    if (trials < 1) throw ParameterError("trials must be >= 1");
    VerifyReport rep;
    rep.params = prm;
    rep.seed = seed;
    rep.kernel_bounds = validate_kernel_bounds(prm.H, prm.T, prm.a, 10 * trials, seed);
    rep.lemma_suite = lemma_bound_suite(prm, trials, seed);

    const double p = prm.p();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<long> level(2, 40);
    for (long i = 0; i < trials; ++i) {
        Engine rng = make_engine(SeedRecord{seed, static_cast<std::uint64_t>(i), 7});
        const double t = prm.T * (1.0 - unit(rng));
        const PiecewisePath Z2 = generate_transport(level(rng), {prm.a, 0.0}, AnchorEnd::right, rng);
        const PiecewisePath Z1 = generate_transport(level(rng), {0.0, prm.T}, AnchorEnd::left, rng);
        const PowerKernel f{p, 1.0, t, 0.0};
        const PowerKernel F{p, 1.0, -t, 0.0};
        const PowerKernel g{p, 1.0, t, std::nullopt};
        const double Fhi = -t - 0.01 * t;
        detail::record(rep.by_parts, integrate_dZ(f, prm.a, -t, Z2), integrate_by_parts(f, prm.a, -t, Z2));
        detail::record(rep.by_parts, integrate_dZ(F, prm.a, Fhi, Z2), integrate_by_parts(F, prm.a, Fhi, Z2));
        detail::record(rep.by_parts, integrate_dZ(g, 0.0, 0.5 * t, Z1), integrate_by_parts(g, 0.0, 0.5 * t, Z1));
    }

    const long nf = std::max<long>(1, trials / 10);
    for (long i = 0; i < nf; ++i) {
        Engine rng = make_engine(SeedRecord{seed, static_cast<std::uint64_t>(i), 8});
        const double t = prm.T * (1.0 - unit(rng));
        const PiecewisePath Z3 = detail::random_path(1.0 / prm.a, 0.0, rng);
        const TailKind kind = (i % 2 == 0) ? TailKind::f : TailKind::F;
        const double cut = prm.rough() ? 0.0 : std::max(prm.eps_n, 1.0 / prm.a);
        detail::record(rep.fubini, z3_tail_term(kind, t, prm.H, prm.a, cut, Z3),
                       z3_tail_iterated(kind, t, prm.H, prm.a, cut, Z3));
    }
    return rep;
}

} // namespace sfbm
