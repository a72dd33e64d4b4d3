// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance <name> [...]    run the named criteria
//   acceptance --full <name>   transport covariance at full size (weeks on one core)
//   acceptance transport_reduced  reduced-size transport diagnostic
//
// Exit status is 0 when every requested criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracle/riemann.hpp"
#include "sfbm/approximants.hpp"
#include "sfbm/montecarlo.hpp"
#include "sfbm/oracles.hpp"
#include "sfbm/verify.hpp"

using namespace sfbm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass{};
    std::string detail;
};

bool g_full = false;
std::string g_self;

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

oracle::RawPath raw(const PiecewisePath& p) {
    return {{p.times().begin(), p.times().end()}, {p.values().begin(), p.values().end()}};
}

const std::vector<double> kGrid{0.25, 0.5, 0.75, 1.0};
constexpr double kBeta = 0.3;
constexpr long kM = 20000;
constexpr long kN = 2000;

// ---------------------------------------------------------------------------

Outcome exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    long nonzero = 0, draws = 0;
    for (int regime = 0; regime < 2; ++regime)
        for (int k = 0; k < 500; ++k) {
            const double dev = 0.05 + 0.4 * U(rng);
            const double H = regime == 0 ? 0.5 + dev : 0.5 - dev;
            const double beta = dev + (0.5 - dev) * (0.05 + 0.9 * U(rng));
            const long n = 2 + static_cast<long>(58 * U(rng));
            const double T = 0.5 + 1.5 * U(rng);
            const double a = -T - 0.1 - 7.0 * U(rng);
            const ModelParams prm = ModelParams::make(H, beta, T, a, n, sfbm_constant(H));
            DriverOptions o;
            o.mode = k % 2 ? DriverMode::grid_bm : DriverMode::transport;
            o.grid_step = T / 512;
            const ApproximantEvaluator ev(prm, make_drivers(prm, o, SeedRecord{99, static_cast<std::uint64_t>(k), 0}));
            if (ev.eval_W(0.0) != 0.0 || ev.eval_Y(0.0) != 0.0 || ev.eval_S(0.0) != 0.0) ++nonzero;
            for (int j = 0; j < 4; ++j) {
                const double t = j == 0 ? std::min(T, -prm.eps_n) : T * U(rng);
                worst = std::max(worst, std::abs(ev.eval_S(t) - ev.eval_W(t) - ev.eval_Y(t)));
            }
            ++draws;
        }
    const double rt = seconds_since(t0);
    const bool pass = nonzero == 0 && worst <= 1e-12 && rt < 60.0;
    return {pass, std::to_string(draws) + " draws, nonzero at t=0: " + std::to_string(nonzero) +
                      ", max |S-W-Y| = " + fmt("%.2e", worst) + " (tol 1e-12), " + fmt("%.1f", rt) + " s (< 60 s)"};
}

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string per;
    for (double H : {0.7, 0.3}) {
        const ModelParams prm = make_params(H, kBeta, 1.0, -4.0, 100);
        const oracle::Model m{H, kBeta, 1.0, -4.0, 100};
        std::mt19937_64 rng(static_cast<std::uint64_t>(H * 1000));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double w = 0.0;
        for (int k = 0; k < 16; ++k) {
            const double t = k == 0 ? -prm.eps_n : (k == 1 ? 1.0 : 1.0 - U(rng));
            const DriverSet d = make_drivers(prm, {}, SeedRecord{4242, static_cast<std::uint64_t>(k), 0});
            const ApproximantEvaluator ev(prm, d);
            const oracle::Drivers od{raw(d.Z1), raw(d.Z2), raw(d.Z3)};
            w = std::max(w, std::abs(ev.eval_W(t) - oracle::W(m, t, od)));
            w = std::max(w, std::abs(ev.eval_Y(t) - oracle::Y(m, t, od)));
        }
        per += " H=" + fmt("%.1f", H) + ": " + fmt("%.2e", w) + ";";
        worst = std::max(worst, w);
    }
    const double rt = seconds_since(t0);
    return {worst <= 1e-7 && rt < 600.0, "32 (t, seed) pairs vs 1e6-panel Riemann-Stieltjes sums, max diff" + per +
                                             " tol 1e-7, " + fmt("%.1f", rt) + " s (< 600 s)"};
}

Outcome kernel_inequality() {
    const auto t0 = Clock::now();
    std::size_t viol = 0;
    std::string per;
    for (double H : {0.3, 0.7}) {
        const KernelBoundReport r = validate_kernel_bounds(H, 1.0, -4.0, 10000, 17);
        viol += r.violations.size();
        per += " H=" + fmt("%.1f", H) + ": " + std::to_string(r.violations.size()) + " violations, max ratio " +
               fmt("%.4f", r.max_ratio) + ";";
    }
    const double rt = seconds_since(t0);
    return {viol == 0 && rt < 60.0, "10^4 points per H," + per + " " + fmt("%.1f", rt) + " s (< 60 s)"};
}

Outcome lemma_bounds() {
    const auto t0 = Clock::now();
    std::size_t viol = 0, bounds = 0;
    std::string per;
    for (double H : {0.7, 0.3}) {
        const LemmaSuiteReport r = lemma_bound_suite(make_params(H, kBeta, 1.0, -4.0, 1000), 1000, 23);
        viol += r.violation_count();
        bounds += r.entries.size();
        for (const auto& e : r.entries)
            per += " " + e.name + "=" + std::to_string(e.violations.size()) + "/" + std::to_string(e.trials);
    }
    const double rt = seconds_since(t0);
    return {viol == 0 && rt < 300.0, std::to_string(bounds) + " bounds, " + std::to_string(viol) +
                                         " violations:" + per + "; " + fmt("%.1f", rt) + " s (< 300 s)"};
}

Outcome identities() {
    const auto t0 = Clock::now();
    double ibp = 0.0, fub = 0.0;
    long ibp_n = 0, fub_n = 0, viol = 0;
    for (double H : {0.7, 0.3}) {
        const VerifyReport r = verify_suite(make_params(H, kBeta, 1.0, -4.0, 1000), 500, 29);
        ibp = std::max(ibp, r.by_parts.max_abs_diff);
        fub = std::max(fub, r.fubini.max_abs_diff);
        ibp_n += r.by_parts.trials;
        fub_n += r.fubini.trials;
        viol += r.by_parts.violations + r.fubini.violations;
    }
    const double rt = seconds_since(t0);
    return {viol == 0 && ibp <= 1e-9 && fub <= 1e-7 && fub_n >= 100 && rt < 120.0,
            "by-parts " + std::to_string(ibp_n) + " checks max " + fmt("%.2e", ibp) + " (tol 1e-9); Fubini " +
                std::to_string(fub_n) + " configurations max " + fmt("%.2e", fub) + " (tol 1e-7); " +
                fmt("%.1f", rt) + " s (< 120 s)"};
}

Outcome transport_law() {
    const auto t0 = Clock::now();
    const long M = 100000;
    bool pass = true;
    std::string per;
    for (long n : {1L, 50L}) {
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0, c1 = 0, c2 = 0;
        for (long r = 0; r < M; ++r) {
            Engine e = make_engine(SeedRecord{31337, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(n)});
            const PiecewisePath Z = generate_transport(n, {0.0, 1.0}, AnchorEnd::left, e);
            const double x = Z(1.0);
            const double c = static_cast<double>(Z.size() - 2);
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
            s4 += x * x * x * x;
            c1 += c;
            c2 += c * c;
        }
        const double Md = static_cast<double>(M);
        const double mean = s1 / Md;
        const double var = s2 / Md - mean * mean;
        // Delta-method SE of the sample variance: sqrt((mu4 - var^2) / M).
        const double mu4 = s4 / Md - 4 * mean * s3 / Md + 6 * mean * mean * s2 / Md - 3 * std::pow(mean, 4);
        const double se_var = std::sqrt((mu4 - var * var) / Md);
        const double target = telegraph_variance_oracle(static_cast<double>(n), 1.0);
        const double cm = c1 / Md;
        const double se_c = std::sqrt((c2 / Md - cm * cm) / Md);
        const double zv = (var - target) / se_var;
        const double zc = (cm - static_cast<double>(n * n)) / se_c;
        pass = pass && std::abs(zv) <= 3.0 && std::abs(zc) <= 3.0;
        per += " n=" + std::to_string(n) + ": Var " + fmt("%.6f", var) + " vs " + fmt("%.6f", target) + " (z " +
               fmt("%.2f", zv) + "), switches " + fmt("%.2f", cm) + " vs " + std::to_string(n * n) + " (z " +
               fmt("%.2f", zc) + ");";
    }
    const double rt = seconds_since(t0);
    return {pass && rt < 120.0, "M=10^5," + per + " " + fmt("%.1f", rt) + " s (< 120 s)"};
}

// ---------------------------------------------------------------------------
// grid_bm covariance suite shared by the covariance and sign criteria. The
// joint run evaluates both tail signs from one replica pass; the summary is
// cached next to the binary's working directory and reused only when newer
// than the binary.

struct SignScore {
    double W_z, Y_z, S_z, WY_z;
    double S_rel, S_flagged;
    double S11_emp, S11_exact;
    double suite_z() const { return std::max({W_z, Y_z, S_z, WY_z}); }
};

struct JointSummary {
    double H{};
    double runtime_s{};
    SignScore minus{}, plus{};
};

nlohmann::json to_j(const SignScore& s) {
    return {{"W_z", s.W_z}, {"Y_z", s.Y_z}, {"S_z", s.S_z}, {"WY_z", s.WY_z}, {"S_rel", s.S_rel},
            {"S_flagged", s.S_flagged}, {"S11_emp", s.S11_emp}, {"S11_exact", s.S11_exact}};
}

SignScore from_j(const nlohmann::json& j) {
    return {j["W_z"], j["Y_z"], j["S_z"], j["WY_z"], j["S_rel"], j["S_flagged"], j["S11_emp"], j["S11_exact"]};
}

SignScore score(const JointReport& jr) {
    const SuiteScore s = score_suite(jr);
    const DiscrepancyRow& last = s.S.table.back();
    return {s.W.max_z, s.Y.max_z, s.S.max_z, s.WY.max_z, s.S.max_rel, static_cast<double>(s.S.flagged),
            last.emp, last.exact};
}

std::string cache_key(double H) {
    return "H=" + fmt("%.3f", H) + ";beta=0.3;T=1;a=-8;n=2000;M=20000;grid=.25,.5,.75,1;seed=8080;step=T/2048";
}

std::filesystem::path cache_path(double H) { return "acceptance_joint_H" + fmt("%.1f", H) + ".json"; }

JointSummary joint_suite(double H, bool use_cache) {
    namespace fs = std::filesystem;
    const fs::path cp = cache_path(H);
    if (use_cache && fs::exists(cp) && !g_self.empty() && fs::exists(g_self) &&
        fs::last_write_time(cp) > fs::last_write_time(g_self)) {
        std::ifstream f(cp);
        const auto j = nlohmann::json::parse(f, nullptr, false);
        if (!j.is_discarded() && j.value("key", "") == cache_key(H))
            return {H, j["runtime_s"], from_j(j["minus"]), from_j(j["plus"])};
    }
    const ModelParams prm = make_params(H, kBeta, 1.0, -8.0, kN);
    JointConfig cfg;
    cfg.drivers.mode = DriverMode::grid_bm;
    cfg.signs = {TailSign::minus, TailSign::plus};
    const auto t0 = Clock::now();
    const std::vector<JointReport> jr = run_joint(prm, kGrid, kM, 8080, cfg);
    JointSummary s{H, seconds_since(t0), score(jr[0]), score(jr[1])};
    std::ofstream f(cp);
    f << nlohmann::json{{"key", cache_key(H)}, {"runtime_s", s.runtime_s}, {"minus", to_j(s.minus)},
                        {"plus", to_j(s.plus)}}
             .dump(2);
    return s;
}

Outcome covariance_grid_bm() {
    bool pass = true;
    std::string per;
    double total = 0.0;
    for (double H : {0.3, 0.7}) {
        const JointSummary s = joint_suite(H, false);
        total += s.runtime_s;
        const SignScore& d = s.minus;
        pass = pass && d.S_z <= 4.0 && d.S_rel <= 0.05 && d.S_flagged == 0;
        per += " H=" + fmt("%.1f", H) + ": max_z " + fmt("%.2f", d.S_z) + ", max_rel " + fmt("%.4f", d.S_rel) +
               ", Cov(1,1) " + fmt("%.6f", d.S11_emp) + " vs " + fmt("%.6f", d.S11_exact) + ";";
    }
    // The budget applies per criterion; the joint pass also produces the
    // flipped-sign suite used by sign_discrimination.
    pass = pass && total < 900.0;
    return {pass, "n=2000, a=-8, M=2*10^4 (tol 4 SE, 5%):" + per + " " + fmt("%.0f", total) + " s (< 900 s)"};
}

Outcome sign_discrimination() {
    double def = 0.0, flip = 0.0, total = 0.0;
    std::string per;
    for (double H : {0.3, 0.7}) {
        const JointSummary s = joint_suite(H, true);
        total += s.runtime_s;
        def = std::max(def, s.minus.suite_z());
        flip = std::max(flip, s.plus.suite_z());
        per += " H=" + fmt("%.1f", H) + ": default " + fmt("%.2f", s.minus.suite_z()) + " flipped " +
               fmt("%.2f", s.plus.suite_z()) + " (W " + fmt("%.1f", s.plus.W_z) + ", Y " + fmt("%.1f", s.plus.Y_z) +
               ", S " + fmt("%.1f", s.plus.S_z) + ", WY " + fmt("%.1f", s.plus.WY_z) + ");";
    }
    return {def <= 4.0 && flip > 4.0 && total < 900.0,
            "suite max_z default " + fmt("%.2f", def) + " (<= 4), flipped " + fmt("%.2f", flip) + " (> 4);" + per +
                " joint run " + fmt("%.0f", total) + " s (< 900 s)"};
}

// ---------------------------------------------------------------------------

Outcome covariance_transport() {
    const double budget = 1200.0;
    if (g_full) {
        const auto t0 = Clock::now();
        bool pass = true;
        std::string per;
        for (double H : {0.3, 0.7}) {
            const ModelParams prm = make_params(H, kBeta, 1.0, -16.0, kN);
            const CovarianceReport rep = run_replicas(prm, kGrid, kM, 9090, Which::S, DriverMode::transport);
            const Discrepancy d = covariance_discrepancy(rep);
            const TailStudy ts = tail_sensitivity_study(prm, {-2, -4, -8, -16}, kGrid, kM, 9090);
            bool mono = true;
            for (std::size_t k = 1; k < ts.rows.size(); ++k) mono = mono && ts.rows[k].max_rel <= ts.rows[k - 1].max_rel;
            pass = pass && d.max_z <= 4.0 && d.max_rel <= 0.07 && mono;
            per += " H=" + fmt("%.1f", H) + ": max_z " + fmt("%.2f", d.max_z) + " max_rel " + fmt("%.4f", d.max_rel) +
                   (mono ? " monotone;" : " not monotone;");
        }
        const double rt = seconds_since(t0);
        return {pass && rt < budget, "full run:" + per + " " + fmt("%.0f", rt) + " s"};
    }
    // Timed pilot: replica cost at reduced n on the same anchor, scaled by
    // the switch count n^2 |a| to the required configuration.
    std::string per;
    double projected = 0.0;
    for (double H : {0.3, 0.7}) {
        double per_replica = 0.0;
        long n_pilot = 0;
        for (long n : {125L, 250L}) {
            const ModelParams prm = make_params(H, kBeta, 1.0, -16.0, n);
            const int reps = 3;
            const auto t0 = Clock::now();
            for (int r = 0; r < reps; ++r) {
                const ApproximantEvaluator ev(prm, make_drivers(prm, {}, SeedRecord{1, static_cast<std::uint64_t>(r), 0}));
                for (double t : kGrid) (void)ev.eval_WY(t);
            }
            per_replica = seconds_since(t0) / reps;
            n_pilot = n;
        }
        const double scale = std::pow(static_cast<double>(kN) / static_cast<double>(n_pilot), 2);
        const double main_run = per_replica * scale * kM;
        // tail study at a in {-2,-4,-8,-16}: cost proportional to (2+4+8+16)/16.
        const double study = main_run * (30.0 / 16.0);
        projected += main_run + study;
        per += " H=" + fmt("%.1f", H) + ": " + fmt("%.3f", per_replica) + " s/replica at n=" +
               std::to_string(n_pilot) + " -> " + fmt("%.2f", per_replica * scale) + " s/replica at n=2000;";
    }
    // Lower bound independent of the evaluator: drawing the Z2 path alone.
    const auto g0 = Clock::now();
    for (int r = 0; r < 3; ++r) (void)generate_transport(250, {-16.0, 0.0}, AnchorEnd::right, 77 + r);
    const double gen = seconds_since(g0) / 3 * 64.0 * kM;
    per += " drawing Z2 alone projects to " + fmt("%.1e", gen) + " s for M=2*10^4;";
    const double switches = 2000.0 * 2000.0 * 16.0;
    return {projected < budget,
            "transport drivers need ~" + fmt("%.1e", switches) + " switches per replica on [a,0];" + per +
                " projected " + fmt("%.1e", projected) + " s for M=2*10^4 plus the tail study vs budget " +
                fmt("%.0f", budget) + " s (run with --full to execute)"};
}

Outcome transport_reduced() {
    // Informational, not a criterion: the transport checks at n=60, M=4000.
    // At this n the eps_n truncation bias for H<1/2 (~9%, also present in
    // grid_bm mode) dominates; monotonicity allows 2 SE of max_rel.
    const auto t0 = Clock::now();
    bool pass = true;
    std::string per;
    const long M = 4000;
    for (double H : {0.3, 0.7}) {
        const ModelParams prm = make_params(H, kBeta, 1.0, -16.0, 60);
        const TailStudy ts = tail_sensitivity_study(prm, {-2, -4, -8, -16}, kGrid, M, 9090);
        const TailStudyRow& last = ts.rows.back();
        const double rel_se = std::sqrt(2.0 / M) * 2.0;
        bool mono = true;
        for (std::size_t k = 1; k < ts.rows.size(); ++k)
            mono = mono && ts.rows[k].max_rel <= ts.rows[k - 1].max_rel + rel_se;
        pass = pass && last.max_z <= 4.0 && last.max_rel <= 0.07 && mono;
        per += " H=" + fmt("%.1f", H) + ": max_rel by a";
        for (const auto& r : ts.rows) per += " " + fmt("%.3f", r.max_rel);
        per += ", at a=-16 max_z " + fmt("%.2f", last.max_z) + ", rho " + fmt("%.2f", ts.spearman_rho) + ";";
    }
    const double rt = seconds_since(t0);
    return {pass, "diagnostic n=60, M=4000:" + per + " " + fmt("%.0f", rt) + " s"};
}

Outcome calibration() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string per;
    const double tol = 1e-10;
    for (double H : {0.3, 0.7}) {
        const Calibration a = detail::calibrate_uncached(H, tol);
        const Calibration b = detail::calibrate_uncached(H, tol / 2);
        const double shift = std::abs(a.c_mvn - b.c_mvn);
        pass = pass && shift < tol && a.rel_discrepancy <= 1e-3;
        per += " H=" + fmt("%.1f", H) + ": C_W " + fmt("%.12f", a.c_mvn) + ", |dC| under tol/2 " +
               fmt("%.1e", shift) + ", Var S(1) " + fmt("%.10f", a.var_S1) + " vs " + fmt("%.10f", a.var_S1_target) +
               " rel " + fmt("%.1e", a.rel_discrepancy) + " (with C_W: rel " + fmt("%.3f", a.raw_rel_discrepancy) +
               ");";
    }
    const double rt = seconds_since(t0);
    return {pass && rt < 60.0, "tol 1e-10," + per + " " + fmt("%.1f", rt) + " s (< 60 s)"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> all{
        {"exactness", exactness},
        {"oracle_equivalence", oracle_equivalence},
        {"kernel_inequality", kernel_inequality},
        {"lemma_bounds", lemma_bounds},
        {"identities", identities},
        {"transport_law", transport_law},
        {"covariance_grid_bm", covariance_grid_bm},
        {"covariance_transport", covariance_transport},
        {"sign_discrimination", sign_discrimination},
        {"calibration", calibration},
        {"transport_reduced", transport_reduced},
    };
    std::error_code ec;
    g_self = std::filesystem::canonical("/proc/self/exe", ec).string();

    std::vector<std::string> wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--full")
            g_full = true;
        else
            wanted.push_back(a);
    }
    if (wanted.empty())
        for (const auto& [name, fn] : all)
            if (name != "transport_reduced") wanted.push_back(name);

    int failures = 0;
    for (const auto& w : wanted) {
        auto it = std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.first == w; });
        if (it == all.end()) {
            std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
            return 2;
        }
        Outcome o;
        try {
            o = it->second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", w.c_str(), o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
