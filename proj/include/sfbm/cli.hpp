#pragma once

// Command-line front end: simulate, covariance, verify, calibrate,
// tail-study, rate-study.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfbm/approximants.hpp"
#include "sfbm/error.hpp"
#include "sfbm/io.hpp"
#include "sfbm/montecarlo.hpp"
#include "sfbm/oracles.hpp"
#include "sfbm/paths.hpp"
#include "sfbm/verify.hpp"

namespace sfbm {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

enum class Exit : int { ok = 0, failure = 1, usage = 2, verify_failed = 3 };

struct Common {
    double hurst{0.7};
    double beta{0.3};
    long n{1000};
    double horizon{1.0};
    std::optional<double> anchor;
    long grid_points{4};
    long replicas{1};
    std::uint64_t seed{1};
    DriverMode mode{DriverMode::transport};
    Which which{Which::S};
    std::string out;
    std::string format;
    TailSign tail_sign{TailSign::minus};
    unsigned threads{0};
    bool timing{false};
    long trials{1000};
    double tol{1e-10};
    std::vector<double> hurst_list;
    std::vector<double> anchors{-2.0, -4.0, -8.0, -16.0};
    std::vector<long> levels;
    std::vector<std::string> argv;
};

inline void add_common(CLI::App* sc, Common& c, long default_grid) {
    c.grid_points = default_grid;
    sc->add_option("--hurst", c.hurst, "Hurst parameter H in (0,1), H != 1/2")->capture_default_str();
    sc->add_option("--beta", c.beta, "rate exponent, |H-1/2| < beta < 1/2")->capture_default_str();
    sc->add_option("--n", c.n, "transport level n >= 2")->capture_default_str();
    sc->add_option("--horizon", c.horizon, "horizon T > 0")->capture_default_str();
    sc->add_option("--anchor-a", c.anchor, "tail anchor a < -T (default -4 max(T,1))");
    sc->add_option("--grid-points", c.grid_points, "number of evaluation times")->capture_default_str();
    sc->add_option("--replicas", c.replicas, "number of replicas")->capture_default_str();
    sc->add_option("--seed", c.seed, "master seed")->capture_default_str();
    const std::map<std::string, DriverMode> modes{{"transport", DriverMode::transport},
                                                  {"grid-bm", DriverMode::grid_bm}};
    sc->add_option("--mode", c.mode, "driver mode: transport | grid-bm")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    const std::map<std::string, Which> whiches{{"W", Which::W}, {"Y", Which::Y}, {"S", Which::S}};
    sc->add_option("--which", c.which, "process: W | Y | S")->transform(CLI::CheckedTransformer(whiches));
    sc->add_option("--out", c.out, "output path (stdout when omitted)");
    sc->add_option("--format", c.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    const std::map<std::string, TailSign> signs{{"minus", TailSign::minus}, {"plus", TailSign::plus}};
    sc->add_option("--tail-sign", c.tail_sign, "sign of the dZ3 tail term: minus (default) | plus")
        ->transform(CLI::CheckedTransformer(signs));
    sc->add_option("--threads", c.threads, "worker threads (0 = hardware)")->capture_default_str();
    sc->add_flag("--timing", c.timing, "record runtime_s in reports");
}

inline ModelParams params_of(const Common& c) {
    const double a = c.anchor ? *c.anchor : ModelParams::default_anchor(c.horizon);
    // Validate the cheap constraints before the normalization quadrature.
    (void)ModelParams::make(c.hurst, c.beta, c.horizon, a, c.n, 1.0);
    return make_params(c.hurst, c.beta, c.horizon, a, c.n);
}

/// k T / K for k = 1..K.
inline std::vector<double> study_grid(const Common& c) {
    if (c.grid_points < 1) throw ParameterError("grid-points must be >= 1");
    std::vector<double> g;
    for (long k = 1; k <= c.grid_points; ++k)
        g.push_back(c.horizon * static_cast<double>(k) / static_cast<double>(c.grid_points));
    return g;
}

/// K points spanning [0, T], endpoints included.
inline std::vector<double> path_grid(const Common& c) {
    if (c.grid_points < 2) throw ParameterError("grid-points must be >= 2 for simulate");
    std::vector<double> g;
    const long K = c.grid_points;
    for (long k = 0; k < K; ++k) g.push_back(c.horizon * static_cast<double>(k) / static_cast<double>(K - 1));
    g.back() = c.horizon;
    return g;
}

inline std::string resolve_format(const Common& c, const char* fallback) {
    if (!c.format.empty()) return c.format;
    if (!c.out.empty()) {
        const std::string ext = std::filesystem::path(c.out).extension().string();
        if (ext == ".csv") return "csv";
        if (ext == ".json") return "json";
    }
    return fallback;
}

inline RunOptions run_options(const Common& c) {
    RunOptions r;
    r.threads = c.threads;
    return r;
}

class Sink {
public:
    Sink(const Common& c, std::ostream& out) : c_(c), out_(out) {}

    void write(const std::string& path, const std::string& text) {
        if (path.empty()) {
            out_ << text;
            return;
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path + " for writing");
        f << text;
        files_.push_back(path);
    }

    void write_main(const std::string& text) { write(c_.out, text); }

    /// `<stem>.manifest.json` next to --out; nothing when writing to stdout.
    void manifest(const std::string& command, const json& params, const json& extra = json::object()) {
        if (c_.out.empty()) return;
        std::filesystem::path p(c_.out);
        p.replace_extension(".manifest.json");
        json m{{"tool", "sfbm"},
               {"version", kVersion},
               {"command", command},
               {"argv", c_.argv},
               {"seed", c_.seed},
               {"mode", to_string(c_.mode)},
               {"params", params},
               {"alpha_n_log", "natural"},
               {"libraries", {{"CLI11", CLI11_VERSION},
                              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
               {"outputs", files_}};
        for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
        f << m.dump(2) << '\n';
    }

private:
    const Common& c_;
    std::ostream& out_;
    std::vector<std::string> files_;
};

inline std::string path_csv(const std::vector<double>& grid, const std::vector<double>& v) {
    std::ostringstream os;
    write_path_csv(os, PiecewisePath(grid, v, 0.0));
    return os.str();
}

inline std::string replica_path(const std::string& out, long k) {
    std::filesystem::path p(out);
    const std::string ext = p.extension().string();
    p.replace_filename(p.stem().string() + "_" + std::to_string(k) + ext);
    return p.string();
}

inline int cmd_simulate(const Common& c, std::ostream& out) {
    const ModelParams prm = params_of(c);
    if (c.replicas < 1) throw ParameterError("replicas must be >= 1");
    const std::vector<double> grid = path_grid(c);
    const std::string fmt = resolve_format(c, "csv");
    DriverOptions dopt;
    dopt.mode = c.mode;
    ApproximantOptions aopt;
    aopt.tail_sign = c.tail_sign;
    std::vector<std::vector<double>> paths;
    for (long r = 0; r < c.replicas; ++r) {
        const ApproximantEvaluator ev(prm, make_drivers(prm, dopt, SeedRecord{c.seed, static_cast<std::uint64_t>(r), 0}),
                                      aopt);
        paths.push_back(ev.eval_grid(c.which, grid));
    }
    Sink sink(c, out);
    if (fmt == "json") {
        json j{{"params", to_json(prm)}, {"which", to_string(c.which)}, {"mode", to_string(c.mode)},
               {"seed", c.seed}, {"grid", detail::vec(grid)}, {"paths", json::array()}};
        for (const auto& p : paths) j["paths"].push_back(detail::vec(p));
        sink.write_main(j.dump(2) + "\n");
    } else if (c.replicas == 1 || c.out.empty()) {
        std::string text;
        for (const auto& p : paths) text += path_csv(grid, p);
        sink.write_main(text);
    } else {
        for (long r = 0; r < c.replicas; ++r) sink.write(replica_path(c.out, r), path_csv(grid, paths[r]));
    }
    sink.manifest("simulate", to_json(prm), json{{"which", to_string(c.which)}, {"replicas", c.replicas}});
    return 0;
}

inline int cmd_covariance(const Common& c, std::ostream& out) {
    const ModelParams prm = params_of(c);
    const std::vector<double> grid = study_grid(c);
    ApproximantOptions aopt;
    aopt.tail_sign = c.tail_sign;
    const CovarianceReport rep = run_replicas(prm, grid, c.replicas, c.seed, c.which, c.mode, aopt, run_options(c));
    const Discrepancy d = covariance_discrepancy(rep);
    Sink sink(c, out);
    if (resolve_format(c, "json") == "csv") {
        std::ostringstream os;
        write_discrepancy_csv(os, d);
        sink.write_main(os.str());
    } else {
        json j = to_json(rep, d, c.timing);
        j["target"] = c.which == Which::S ? "sfbm" : "fbm";
        j["discrepancy"] = to_json(d);
        sink.write_main(j.dump(2) + "\n");
    }
    sink.manifest("covariance", to_json(prm), json{{"which", to_string(c.which)}, {"replicas", c.replicas}});
    return 0;
}

inline int cmd_verify(const Common& c, std::ostream& out) {
    const ModelParams prm = params_of(c);
    const VerifyReport rep = verify_suite(prm, c.trials, c.seed);
    Sink sink(c, out);
    sink.write_main(to_json(rep).dump(2) + "\n");
    sink.manifest("verify", to_json(prm), json{{"trials", c.trials}});
    return rep.ok() ? 0 : static_cast<int>(Exit::verify_failed);
}

inline int cmd_calibrate(const Common& c, std::ostream& out) {
    const std::vector<double> hs = c.hurst_list.empty() ? std::vector<double>{0.3, 0.7} : c.hurst_list;
    Sink sink(c, out);
    std::vector<Calibration> cal;
    for (double H : hs) cal.push_back(calibrate(H, c.tol));
    if (resolve_format(c, "json") == "csv") {
        std::string text = "H,C,C_mvn,var_S1,var_S1_target,rel_discrepancy\n";
        char buf[256];
        for (const auto& k : cal) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k.H, k.c_sfbm, k.c_mvn, k.var_S1,
                          k.var_S1_target, k.rel_discrepancy);
            text += buf;
        }
        sink.write_main(text);
    } else {
        json j = json::array();
        for (const auto& k : cal) j.push_back(to_json(k));
        sink.write_main(j.dump(2) + "\n");
    }
    sink.manifest("calibrate", json{{"H", hs}, {"tol", c.tol}});
    return 0;
}

inline int cmd_tail_study(const Common& c, std::ostream& out) {
    std::vector<double> anchors = c.anchors;
    const ModelParams base = params_of(c);
    ApproximantOptions aopt;
    aopt.tail_sign = c.tail_sign;
    const TailStudy st =
        tail_sensitivity_study(base, anchors, study_grid(c), c.replicas, c.seed, c.mode, aopt, run_options(c));
    Sink sink(c, out);
    if (resolve_format(c, "json") == "csv") {
        std::string text = "a,max_rel,max_z\n";
        char buf[160];
        for (const auto& r : st.rows) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.a, r.max_rel, r.max_z);
            text += buf;
        }
        sink.write_main(text);
    } else {
        json j = to_json(st, c.timing);
        j["params"] = to_json(base);
        j["seed"] = c.seed;
        j["M"] = c.replicas;
        sink.write_main(j.dump(2) + "\n");
    }
    sink.manifest("tail-study", to_json(base), json{{"anchors", anchors}, {"replicas", c.replicas}});
    return 0;
}

inline int cmd_rate_study(const Common& c, std::ostream& out) {
    const ModelParams base = params_of(c);
    std::vector<long> levels = c.levels;
    if (levels.empty()) levels = {std::max(2L, c.n / 4), std::max(2L, c.n / 2), c.n};
    ApproximantOptions aopt;
    aopt.tail_sign = c.tail_sign;
    const RateStudy st = rate_study(base, levels, study_grid(c), c.replicas, c.seed, c.mode, aopt, run_options(c));
    Sink sink(c, out);
    if (resolve_format(c, "json") == "csv") {
        std::string text = "n,eps_n,alpha_n,max_rel,max_z,gap_mean,gap_se\n";
        char buf[256];
        for (const auto& r : st.rows) {
            std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.eps_n, r.alpha_n,
                          r.max_rel, r.max_z, r.gap_mean, r.gap_se);
            text += buf;
        }
        sink.write_main(text);
    } else {
        json j = to_json(st, c.timing);
        j["params"] = to_json(base);
        j["seed"] = c.seed;
        j["M"] = c.replicas;
        sink.write_main(j.dump(2) + "\n");
    }
    sink.manifest("rate-study", to_json(base), json{{"levels", levels}, {"replicas", c.replicas}});
    return 0;
}

} // namespace cli

/// Parses argv (argv[0] is the program name) and runs one subcommand.
/// Exit codes: 0 success, 1 runtime failure, 2 usage or parameter error,
/// 3 failed verification suite.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli;
    CLI::App app{"Sub-fractional Brownian motion from transport processes", "sfbm"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::map<std::string, Common> cfg;
    auto sub = [&](const char* name, const char* help, long grid, long replicas) {
        CLI::App* sc = app.add_subcommand(name, help);
        Common& c = cfg[name];
        add_common(sc, c, grid);
        c.replicas = replicas;
        return sc;
    };

    CLI::App* sim = sub("simulate", "emit approximant paths on [0, T]", 257, 1);
    CLI::App* cov = sub("covariance", "Monte Carlo covariance vs the exact formula", 4, 2000);
    CLI::App* ver = sub("verify", "kernel bounds, identities and lemma-bound suite", 4, 1);
    ver->add_option("--trials", cfg["verify"].trials, "random trials per check")->capture_default_str();
    CLI::App* cal = sub("calibrate", "normalizing constant C per H", 4, 1);
    cal->remove_option(cal->get_option("--hurst"));
    cal->add_option("--hurst", cfg["calibrate"].hurst_list, "Hurst parameters (default 0.3 0.7)");
    cal->add_option("--tol", cfg["calibrate"].tol, "quadrature tolerance")->capture_default_str();
    CLI::App* tail = sub("tail-study", "covariance discrepancy as a function of the anchor a", 4, 2000);
    tail->add_option("--anchors", cfg["tail-study"].anchors, "anchors a (each < -T)")->capture_default_str();
    CLI::App* rate = sub("rate-study", "discrepancy and cross-level gap as n grows", 4, 500);
    cfg["rate-study"].mode = DriverMode::grid_bm;
    rate->add_option("--levels", cfg["rate-study"].levels, "levels n (nondecreasing; default n/4 n/2 n)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return 0;
        if (!dynamic_cast<const CLI::CallForHelp*>(&e)) err << app.help();
        return static_cast<int>(Exit::usage);
    }

    try {
        for (auto& [name, c] : cfg) c.argv.assign(argv + 1, argv + argc);
        if (sim->parsed()) return cmd_simulate(cfg["simulate"], out);
        if (cov->parsed()) return cmd_covariance(cfg["covariance"], out);
        if (ver->parsed()) return cmd_verify(cfg["verify"], out);
        if (cal->parsed()) return cmd_calibrate(cfg["calibrate"], out);
        if (tail->parsed()) return cmd_tail_study(cfg["tail-study"], out);
        if (rate->parsed()) return cmd_rate_study(cfg["rate-study"], out);
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(Exit::usage);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(Exit::usage);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(Exit::failure);
    }
    return static_cast<int>(Exit::usage);
}

} // namespace sfbm
