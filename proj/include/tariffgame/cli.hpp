#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tariffgame/model_io.hpp"
#include "tariffgame/montecarlo.hpp"
#include "tariffgame/nash.hpp"
#include "tariffgame/version.hpp"

namespace tariffgame::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitMismatch = 4;

namespace detail_cli {

inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Context {
    std::string command;
    std::optional<std::string> model_path;
    std::optional<std::string> out_path;
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed_override;
    std::string format;  // "", "json" or "csv"
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    json model_json;  // set when a model was loaded
    SolverConfig cfg;

    SolverConfig load_config() {
        cfg = config_path ? io::config_from_json(io::load_file(*config_path)) : SolverConfig{};
        if (seed_override) cfg.rng_seed = *seed_override;
        return cfg;
    }
    MarketModel load_model() {
        if (!model_path) throw ConfigError("--model is required for this command");
        model_json = io::load_file(*model_path);
        return io::model_from_json(model_json);
    }
    void require_format(const char* expected) const {
        if (!format.empty() && format != expected)
            throw ConfigError(std::string("this command emits ") + expected + " output only");
    }

    json manifest() const {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json m;
        m["command"] = command;
        m["model_digest"] = model_json.is_null() ? "" : io::digest(model_json);
        m["config"] = io::config_to_json(cfg);
        m["tool_version"] = std::string(kToolName) + " " + kVersion;
        m["rng_seed"] = cfg.rng_seed;
        m["rng_algorithm"] = rng::kAlgorithm;
        m["wall_time_s"] = secs;
        return m;
    }

    // JSON results embed the manifest; file outputs get a sidecar as well.
    void emit_json(json result, std::ostream& out) const {
        result["manifest"] = manifest();
        const std::string text = result.dump(2) + "\n";
        if (out_path) {
            std::ofstream f(*out_path);
            if (!f) throw ConfigError("cannot write '" + *out_path + "'");
            f << text;
        } else {
            out << text;
        }
    }
    // CSV stays clean; the manifest accompanies it as <out>.manifest.json.
    void emit_csv(const std::string& text, std::ostream& out) const {
        if (out_path) {
            std::ofstream f(*out_path);
            if (!f) throw ConfigError("cannot write '" + *out_path + "'");
            f << text;
            std::ofstream mf(*out_path + ".manifest.json");
            mf << manifest().dump(2) << "\n";
        } else {
            out << text;
        }
    }
};

inline json triple_json(const EquilibriumTriple& tr, const SolverConfig& cfg,
                        const std::string& method) {
    json j;
    j["e"] = tr.e_hat;
    j["theta"] = tr.theta_hat;
    j["theta_star"] = tr.theta_star_hat;
    j["foc_residuals"] = {tr.foc_residuals[0], tr.foc_residuals[1], tr.foc_residuals[2]};
    j["soc_pass"] = {tr.soc_pass.first, tr.soc_pass.second};
    j["sensitivities"] = {{"de_dtheta", tr.sensitivities.de_dtheta},
                          {"de_dtheta_star", tr.sensitivities.de_dtheta_star},
                          {"denominator", tr.sensitivities.denominator}};
    j["boundary"] = tr.boundary_flag;
    j["accepted"] = nash_accepted(tr, cfg);
    j["method"] = method;
    return j;
}

inline int cmd_solve_rate(Context& ctx, double theta, double theta_star, std::ostream& out) {
    ctx.require_format("json");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    const TariffPair t{theta, theta_star};
    const RateSolution sol = solve_rate(model, t, cfg);
    json j;
    j["e"] = sol.rate_e;
    j["residual"] = sol.residual;
    try {
        const auto s = rate_sensitivities(model, sol.rate_e, t, cfg);
        j["de_dtheta"] = s.de_dtheta;
        j["de_dtheta_star"] = s.de_dtheta_star;
    } catch (const std::exception&) {
        j["de_dtheta"] = nullptr;  // step models: no differentiable balance at the root
        j["de_dtheta_star"] = nullptr;
    }
    j["unique"] = sol.multiplicity == RootMultiplicity::Unique;
    j["boundary"] = sol.on_boundary;
    ctx.emit_json(std::move(j), out);
    return kExitOk;
}

inline int cmd_gains(Context& ctx, double theta, double theta_star, std::optional<double> rate,
                     std::ostream& out) {
    ctx.require_format("json");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    const TariffPair t{theta, theta_star};
    const double e = rate ? *rate : solve_rate(model, t, cfg).rate_e;
    const GainReport rep = gains(model, e, t);
    json j;
    j["rate"] = e;
    j["gain_domestic"] = rep.gain_domestic;
    j["gain_foreign"] = rep.gain_foreign;
    j["method"] = rep.method == GainMethod::Quadrature ? "quadrature" : "expectation_sum";
    j["truncation_error_bound"] = rep.truncation_error_bound;
    ctx.emit_json(std::move(j), out);
    return kExitOk;
}

inline int cmd_sweep(Context& ctx, int grid_k, std::ostream& out) {
    ctx.require_format("csv");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    if (grid_k < 2) throw ConfigError("--grid must be >= 2");
    const double lo = 1.0 / model.box_bound();
    std::ostringstream csv;
    csv << "theta,theta_star,e,G,Gstar\n";
    for (int i = 0; i < grid_k; ++i) {
        for (int j = 0; j < grid_k; ++j) {
            const double th = lo + (1.0 - lo) * i / (grid_k - 1);
            const double ts = lo + (1.0 - lo) * j / (grid_k - 1);
            csv << fmt12(th) << "," << fmt12(ts) << ",";
            try {
                const double e = solve_rate(model, {th, ts}, cfg).rate_e;
                const auto rep = gains(model, e, {th, ts});
                csv << fmt12(e) << "," << fmt12(rep.gain_domestic) << ","
                    << fmt12(rep.gain_foreign);
            } catch (const std::exception&) {
                csv << ",,";
            }
            csv << "\n";
        }
    }
    ctx.emit_csv(csv.str(), out);
    return kExitOk;
}

inline int cmd_nash(Context& ctx, const std::string& method, std::ostream& out) {
    ctx.require_format("json");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    json j;
    EquilibriumTriple best;
    if (method == "newton") {
        const NashResult res = solve_nash(model, cfg);
        best = res.best;
        j = triple_json(best, cfg, method);
        json cands = json::array();
        for (const auto& c : res.candidates) cands.push_back(triple_json(c, cfg, method));
        j["candidates"] = std::move(cands);
    } else if (method == "best-response") {
        const auto it = best_response_iteration(model, {0.9, 0.9}, cfg);
        // polish the fixed point to the standard residual tolerance
        best = refine_candidate(model, it.triple.e_hat,
                                {it.triple.theta_hat, it.triple.theta_star_hat}, cfg);
        j = triple_json(best, cfg, method);
        j["rounds"] = it.rounds;
    } else if (method == "symmetric") {
        if (!model.symmetric()) throw ConfigError("--method symmetric needs a symmetric model");
        best = solve_symmetric(model, cfg);
        j = triple_json(best, cfg, method);
    } else if (method == "exp-family") {
        const auto& dom = model.domestic();
        const auto& fgn = model.foreign();
        if (dom.family() != DemandFunction::Family::Exponential ||
            fgn.family() != DemandFunction::Family::ClippedExpGrowth || fgn.reciprocal_composed())
            throw ConfigError("--method exp-family needs an exponential/clipped_exp_growth model");
        best = solve_exponential_family(fgn.param1(), fgn.param2(), dom.param1(), cfg);
        j = triple_json(best, cfg, method);
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }
    ctx.emit_json(std::move(j), out);
    return nash_accepted(best, cfg) ? kExitOk : kExitSolver;
}

inline int cmd_verify(Context& ctx, const std::string& triple_arg, std::ostream& out) {
    ctx.require_format("json");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    double e, th, ts;
    if (std::sscanf(triple_arg.c_str(), "%lf,%lf,%lf", &e, &th, &ts) != 3)
        throw ConfigError("--triple expects 'e,theta,theta_star'");
    const auto r = foc_residuals(model, e, {th, ts});
    json j;
    j["e"] = e;
    j["theta"] = th;
    j["theta_star"] = ts;
    j["foc_residuals"] = {r[0], r[1], r[2]};
    bool accepted = std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])}) <= cfg.tol_nash;
    try {
        const auto sens = detail::sensitivities_unchecked(model.solver_view(), e, {th, ts});
        const auto soc = second_order_report(model, e, {th, ts}, sens);
        j["soc_pass"] = {soc.pass1, soc.pass2};
        j["soc_values"] = {soc.ine1, soc.ine2};
        accepted = accepted && soc.pass1 && soc.pass2;
    } catch (const std::exception& ex) {
        j["soc_pass"] = nullptr;
        j["soc_error"] = ex.what();
        accepted = false;
    }
    j["accepted"] = accepted;
    ctx.emit_json(std::move(j), out);
    return accepted ? kExitOk : kExitMismatch;
}

inline int cmd_simulate(Context& ctx, const std::string& spec_path, std::ostream& out) {
    ctx.require_format("json");
    ctx.load_config();
    ScenarioSpec spec = io::scenario_from_json(io::load_file(spec_path));
    if (ctx.seed_override) spec.rng_seed = *ctx.seed_override;
    ctx.cfg.rng_seed = spec.rng_seed;
    const CommoditySample sample = sample_commodities(spec);
    const MarketModel model = empirical_demands(sample);
    json j = io::model_to_json(model);
    ctx.model_json = j;  // digest covers the produced model
    ctx.emit_json(std::move(j), out);
    return kExitOk;
}

inline int cmd_curves(Context& ctx, int points, double x_min, double x_max, std::ostream& out) {
    ctx.require_format("csv");
    ctx.load_config();
    const auto model = ctx.load_model();
    if (points < 2) throw ConfigError("--points must be >= 2");
    if (x_min <= 0) x_min = 1.0 / model.box_bound();
    if (x_max <= 0) x_max = model.box_bound();
    if (!(x_max > x_min)) throw ConfigError("need x_max > x_min");
    const auto& D = model.domestic();
    const auto& Ds = model.foreign();
    std::ostringstream csv;
    csv << "x,D,Dstar,Dstar_recip\n";
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
        // first row is the origin; the rest are log-spaced over [x_min, x_max]
        const double x =
            (i == 0) ? 0.0 : x_min * std::pow(x_max / x_min, double(i - 1) / (points - 2));
        const double recip = (x == 0.0) ? inf : 1.0 / x;
        csv << fmt12(x) << "," << fmt12(D(x)) << "," << fmt12(Ds(x)) << "," << fmt12(Ds(recip))
            << "\n";
    }
    ctx.emit_csv(csv.str(), out);
    return kExitOk;
}

inline int cmd_rate_surface(Context& ctx, int grid_k, std::ostream& out) {
    ctx.require_format("csv");
    const auto cfg = ctx.load_config();
    const auto model = ctx.load_model();
    if (grid_k < 2) throw ConfigError("--grid must be >= 2");
    const double lo = 1.0 / model.box_bound();
    std::ostringstream csv;
    csv << "theta,theta_star,e,error\n";
    for (int i = 0; i < grid_k; ++i) {
        for (int j = 0; j < grid_k; ++j) {
            const double th = lo + (1.0 - lo) * i / (grid_k - 1);
            const double ts = lo + (1.0 - lo) * j / (grid_k - 1);
            csv << fmt12(th) << "," << fmt12(ts) << ",";
            try {
                csv << fmt12(solve_rate(model, {th, ts}, cfg).rate_e) << ",";
            } catch (const NoEquilibriumInBox&) {
                csv << ",no_equilibrium";
            } catch (const std::exception&) {
                csv << ",solver_error";
            }
            csv << "\n";
        }
    }
    ctx.emit_csv(csv.str(), out);
    return kExitOk;
}

inline int cmd_reproduce_paper(Context& ctx, std::ostream& out) {
    const auto cfg = ctx.load_config();
    int failures = 0;
    auto line = [&](bool ok, const std::string& what, const std::string& detail) {
        out << (ok ? "[PASS] " : "[FAIL] ") << what;
        if (!detail.empty()) out << "  (" << detail << ")";
        out << "\n";
        if (!ok) ++failures;
    };

    out << "== rational-square symmetric nations ==\n";
    try {
        const auto model = MarketModel::rational_square_symmetric();
        const auto res = solve_nash(model, cfg);
        const auto& b = res.best;
        std::ostringstream d;
        d << "e=" << fmt12(b.e_hat) << " theta=" << fmt12(b.theta_hat)
          << " theta*=" << fmt12(b.theta_star_hat);
        line(std::abs(b.e_hat - 1.0) <= 1e-8 && std::abs(b.theta_hat - 1.0 / 3.0) <= 1e-8 &&
                 std::abs(b.theta_star_hat - 1.0 / 3.0) <= 1e-8,
             "equilibrium (1, 1/3, 1/3) within 1e-8", d.str());
        line(b.soc_pass.first && b.soc_pass.second, "second-order conditions hold", "");
    } catch (const std::exception& e) {
        line(false, "rational-square solve", e.what());
    }

    out << "== clipped-linear symmetric nations ==\n";
    for (double alpha : {0.25, 0.5, 0.8}) {
        try {
            const auto model = MarketModel::clipped_linear_symmetric(alpha);
            const auto tr = solve_symmetric(model, cfg);
            const double want = 2.0 * alpha / (1.0 + alpha);
            std::ostringstream d;
            d << "alpha=" << alpha << " theta=" << fmt12(tr.theta_hat) << " expected "
              << fmt12(want);
            line(std::abs(tr.theta_hat - want) <= 1e-8 && std::abs(tr.e_hat - 1.0) <= 1e-12,
                 "theta = 2a/(1+a) within 1e-8", d.str());
        } catch (const std::exception& e) {
            line(false, "clipped-linear solve", e.what());
        }
    }

    out << "== exponential asymmetric nations (alpha=0.01, beta=2, delta=2.5) ==\n";
    try {
        const auto model = MarketModel::exponential_asymmetric(0.01, 2.0, 2.5);
        const auto fast = solve_exponential_family(0.01, 2.0, 2.5, cfg);
        const auto generic = solve_nash(model, cfg).best;
        std::ostringstream d;
        d << "e=" << fmt12(fast.e_hat) << " theta=" << fmt12(fast.theta_hat)
          << " theta*=" << fmt12(fast.theta_star_hat);
        line(std::abs(fast.e_hat - 0.81) <= 5e-3 && std::abs(fast.theta_hat - 0.54) <= 5e-3 &&
                 std::abs(fast.theta_star_hat - 0.73) <= 5e-3,
             "equilibrium (0.81, 0.54, 0.73) within 5e-3", d.str());
        const double dev = std::max({std::abs(fast.e_hat - generic.e_hat),
                                     std::abs(fast.theta_hat - generic.theta_hat),
                                     std::abs(fast.theta_star_hat - generic.theta_star_hat)});
        line(dev <= 1e-6, "closed form agrees with Newton within 1e-6", "dev=" + fmt12(dev));
        std::ostringstream ds;
        ds << "e_theta=" << fmt12(fast.sensitivities.de_dtheta)
           << " e_theta*=" << fmt12(fast.sensitivities.de_dtheta_star);
        line(std::abs(fast.sensitivities.de_dtheta - 1.13) <= 1e-2 &&
                 std::abs(fast.sensitivities.de_dtheta_star + 0.49) <= 1e-2,
             "rate sensitivities 1.13 / -0.49 within 1e-2", ds.str());
        line(fast.soc_pass.first && fast.soc_pass.second, "second-order conditions hold", "");
    } catch (const std::exception& e) {
        line(false, "exponential asymmetric solve", e.what());
    }

    out << (failures == 0 ? "all example blocks reproduced\n"
                          : std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? kExitOk : kExitMismatch;
}

}  // namespace detail_cli

/// Entry point used by the binary and by the in-process CLI tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Nash-equilibrium tariffs and exchange rates for a two-nation trade game"};
    app.require_subcommand(1);
    app.fallthrough(false);

    detail_cli::Context ctx;
    std::string model_path, out_path, config_path, format;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub, bool needs_model) {
        if (needs_model) sub->add_option("--model", model_path, "model JSON file")->required();
        sub->add_option("--config", config_path, "solver config JSON file");
        sub->add_option("--out", out_path, "write output to this file");
        sub->add_option("--format", format, "output format (json|csv)")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "RNG seed override");
    };

    double theta = 0, theta_star = 0;
    std::optional<double> rate;
    double rate_val = 0;
    bool rate_set = false;
    int grid_k = 33, points = 201;
    double x_min = -1, x_max = -1;
    std::string method = "newton", triple_arg, spec_path;

    auto* sr = app.add_subcommand("solve-rate", "equilibrium exchange rate for a tariff pair");
    add_common(sr, true);
    sr->add_option("--theta", theta, "domestic retained fraction")->required();
    sr->add_option("--theta-star", theta_star, "foreign retained fraction")->required();

    auto* gn = app.add_subcommand("gains", "trade gains of both nations at a tariff pair");
    add_common(gn, true);
    gn->add_option("--theta", theta)->required();
    gn->add_option("--theta-star", theta_star)->required();
    gn->add_option_function<double>(
        "--rate", [&](double r) { rate_val = r; rate_set = true; },
        "exchange rate (defaults to the solved rate)");

    auto* sw = app.add_subcommand("sweep", "CSV of e, G, G* over a tariff grid");
    add_common(sw, true);
    sw->add_option("--grid", grid_k, "grid points per tariff axis");

    auto* na = app.add_subcommand("nash", "Nash-equilibrium tariffs and rate");
    add_common(na, true);
    na->add_option("--method", method, "newton|best-response|symmetric|exp-family")
        ->check(CLI::IsMember({"newton", "best-response", "symmetric", "exp-family"}));

    auto* ve = app.add_subcommand("verify", "check a candidate triple against the conditions");
    add_common(ve, true);
    ve->add_option("--triple", triple_arg, "candidate as 'e,theta,theta_star'")->required();

    auto* si = app.add_subcommand("simulate", "sample commodities and emit an empirical model");
    add_common(si, false);
    si->add_option("--spec", spec_path, "scenario JSON file")->required();

    auto* cu = app.add_subcommand("curves", "CSV of D, D*, D*(1/x) for plotting");
    add_common(cu, true);
    cu->add_option("--points", points, "row count (first row is x=0)");
    cu->add_option("--x-min", x_min, "log grid lower end (default 1/M)");
    cu->add_option("--x-max", x_max, "log grid upper end (default M)");

    auto* rs = app.add_subcommand("rate-surface", "CSV of the equilibrium rate over a tariff grid");
    add_common(rs, true);
    rs->add_option("--grid", grid_k, "grid points per tariff axis");

    auto* rp = app.add_subcommand("reproduce-paper", "re-run the reference examples and check");
    add_common(rp, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    ctx.command = app.get_subcommands().front()->get_name();
    if (!model_path.empty()) ctx.model_path = model_path;
    if (!out_path.empty()) ctx.out_path = out_path;
    if (!config_path.empty()) ctx.config_path = config_path;
    if (seed_set) ctx.seed_override = seed;
    ctx.format = format;
    if (rate_set) rate = rate_val;

    try {
        if (sr->parsed()) return detail_cli::cmd_solve_rate(ctx, theta, theta_star, out);
        if (gn->parsed()) return detail_cli::cmd_gains(ctx, theta, theta_star, rate, out);
        if (sw->parsed()) return detail_cli::cmd_sweep(ctx, grid_k, out);
        if (na->parsed()) return detail_cli::cmd_nash(ctx, method, out);
        if (ve->parsed()) return detail_cli::cmd_verify(ctx, triple_arg, out);
        if (si->parsed()) return detail_cli::cmd_simulate(ctx, spec_path, out);
        if (cu->parsed()) return detail_cli::cmd_curves(ctx, points, x_min, x_max, out);
        if (rs->parsed()) return detail_cli::cmd_rate_surface(ctx, grid_k, out);
        if (rp->parsed()) return detail_cli::cmd_reproduce_paper(ctx, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitConfig;
}

}  // namespace tariffgame::cli
