#pragma once

// JSON and CSV serialization of parameters and reports.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfbm/approximants.hpp"
#include "sfbm/kernels.hpp"
#include "sfbm/montecarlo.hpp"
#include "sfbm/oracles.hpp"
#include "sfbm/verify.hpp"

namespace sfbm {

using json = nlohmann::ordered_json;

namespace detail {

// NaN / inf are not representable in JSON; they become null.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json vec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

inline json mat(const std::vector<std::vector<double>>& m) {
    json a = json::array();
    for (const auto& r : m) a.push_back(vec(r));
    return a;
}

} // namespace detail

inline json to_json(const ModelParams& p) {
    return json{{"H", p.H}, {"beta", p.beta}, {"T", p.T},   {"a", p.a},
                {"n", p.n}, {"eps_n", p.eps_n}, {"alpha_n", p.alpha_n}, {"C", p.C}};
}

inline json to_json(const Discrepancy& d) {
    json rows = json::array();
    for (const auto& r : d.table)
        rows.push_back({{"s", r.s}, {"t", r.t}, {"emp", detail::num(r.emp)}, {"exact", r.exact},
                        {"se", detail::num(r.se)}, {"z", detail::num(r.z)}, {"rel", detail::num(r.rel)},
                        {"flagged", r.flagged}});
    return json{{"max_z", d.max_z}, {"max_rel", d.max_rel}, {"flagged", d.flagged}, {"table", rows}};
}

/// CovarianceReport with its discrepancy summary; runtime only on request.
inline json to_json(const CovarianceReport& r, const Discrepancy& d, bool timing) {
    json j{{"params", to_json(r.params)},
           {"mode", to_string(r.mode)},
           {"which", to_string(r.which)},
           {"tail_sign", r.tail_sign == TailSign::minus ? "minus" : "plus"},
           {"seed", r.master_seed},
           {"grid", detail::vec(r.grid)},
           {"M", r.M},
           {"M_requested", r.M_requested},
           {"aborts", r.aborts},
           {"mean", detail::vec(r.mean)},
           {"se_mean", detail::vec(r.se_mean)},
           {"cov", detail::mat(r.cov)},
           {"se_cov", detail::mat(r.se_cov)},
           {"max_z", d.max_z},
           {"max_rel", d.max_rel}};
    if (timing) j["runtime_s"] = r.runtime_s;
    return j;
}

/// `s,t,emp,exact,se,z` rows, 17 significant digits.
inline void write_discrepancy_csv(std::ostream& os, const Discrepancy& d) {
    os << "s,t,emp,exact,se,z\n";
    char buf[192];
    for (const auto& r : d.table) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.s + 0.0, r.t + 0.0,
                      r.emp + 0.0, r.exact + 0.0, r.se + 0.0, r.z + 0.0);
        os << buf;
    }
}

inline json to_json(const Calibration& c) {
    return json{{"H", c.H},
                {"tol", c.tol},
                {"C", c.c_sfbm},
                {"C_mvn", c.c_mvn},
                {"mvn_integral", c.mvn_integral},
                {"kernel_norm2", c.kernel_norm2},
                {"var_S1", c.var_S1},
                {"var_S1_target", c.var_S1_target},
                {"rel_discrepancy", c.rel_discrepancy},
                {"var_S1_with_C_mvn", c.var_S1_raw},
                {"raw_rel_discrepancy", c.raw_rel_discrepancy},
                {"truncation", c.truncation},
                {"tail_bound", c.tail_bound},
                {"quad_error", c.quad_error}};
}

inline json to_json(const BoundEntry& e) {
    json v = json::array();
    for (const auto& x : e.violations) v.push_back({{"trial", x.trial}, {"t", x.t}, {"lhs", x.lhs}, {"rhs", x.rhs}});
    return json{{"name", e.name}, {"trials", e.trials}, {"max_ratio", detail::num(e.max_ratio)},
                {"violations", e.violations.size()}, {"details", v}};
}

inline json to_json(const LemmaSuiteReport& r) {
    json e = json::array();
    for (const auto& x : r.entries) e.push_back(to_json(x));
    return json{{"H", r.H}, {"trials", r.trials}, {"seed", r.seed}, {"bounds", e}, {"violations", r.violation_count()}};
}

inline json to_json(const KernelBoundReport& r) {
    json v = json::array();
    for (const auto& x : r.violations)
        v.push_back({{"check", x.check}, {"t", x.t}, {"s", x.s}, {"lhs", x.lhs}, {"rhs", x.rhs}});
    return json{{"H", r.H},
                {"trials", r.trials},
                {"gamma", r.gamma},
                {"max_ratio", r.max_ratio},
                {"max_tail_ratio", r.max_tail_ratio},
                {"tail_integral_bound", r.tail_integral_bound},
                {"violations", r.violations.size()},
                {"details", v}};
}

inline json to_json(const IdentityCheck& c) {
    return json{{"name", c.name}, {"trials", c.trials}, {"tol", c.tol}, {"max_abs_diff", c.max_abs_diff},
                {"violations", c.violations}};
}

inline json to_json(const VerifyReport& r) {
    return json{{"params", to_json(r.params)},
                {"seed", r.seed},
                {"ok", r.ok()},
                {"kernel_bounds", to_json(r.kernel_bounds)},
                {"by_parts", to_json(r.by_parts)},
                {"lemma_suite", to_json(r.lemma_suite)},
                {"fubini", to_json(r.fubini)},
                {"violations", r.kernel_bounds.violations.size() + static_cast<std::size_t>(r.by_parts.violations) +
                                   r.lemma_suite.violation_count() + static_cast<std::size_t>(r.fubini.violations)}};
}

inline json to_json(const TailStudy& s, bool timing) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        json j{{"a", r.a}, {"max_rel", r.max_rel}, {"max_z", r.max_z}};
        if (timing) j["runtime_s"] = r.runtime_s;
        rows.push_back(j);
    }
    return json{{"mode", to_string(s.mode)}, {"rows", rows}, {"spearman_rho", s.spearman_rho}};
}

inline json to_json(const RateStudy& s, bool timing) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"n", r.n},
                        {"eps_n", r.eps_n},
                        {"alpha_n", r.alpha_n},
                        {"max_rel", r.max_rel},
                        {"max_z", r.max_z},
                        {"gap_mean", r.gap_mean},
                        {"gap_se", detail::num(r.gap_se)}});
    json j{{"mode", to_string(s.mode)}, {"rows", rows}, {"gap_slope", detail::num(s.gap_slope)},
           {"max_rel_slope", detail::num(s.max_rel_slope)}};
    if (timing) j["runtime_s"] = s.runtime_s;
    return j;
}

} // namespace sfbm
