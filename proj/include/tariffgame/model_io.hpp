#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tariffgame/config.hpp"
#include "tariffgame/demand.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/montecarlo.hpp"

namespace tariffgame::io {

using nlohmann::json;

/// FNV-1a over the canonical JSON dump; stable across platforms.
inline std::string digest(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

inline double require_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError("missing numeric field '" + key + "'");
    return j[key].get<double>();
}

inline DemandFunction demand_from_json(const json& j, DemandRole role) {
    if (!j.contains("family") || !j["family"].is_string())
        throw ConfigError("demand spec needs a 'family' string");
    const std::string fam = j["family"].get<std::string>();
    const json params = j.value("params", json::object());
    if (fam == "rational_square") return DemandFunction::rational_square(role);
    if (fam == "clipped_linear")
        return DemandFunction::clipped_linear(require_number(params, "alpha"), role);
    if (fam == "exponential")
        return DemandFunction::exponential(require_number(params, "delta"), role);
    if (fam == "clipped_exp_growth")
        return DemandFunction::clipped_exp_growth(require_number(params, "alpha"),
                                                  require_number(params, "beta"), role);
    if (fam == "empirical") {
        if (!params.contains("breakpoints") || !params.contains("weights"))
            throw ConfigError("empirical demand needs 'breakpoints' and 'weights' arrays");
        return DemandFunction::empirical_step(params["breakpoints"].get<std::vector<double>>(),
                                              params["weights"].get<std::vector<double>>(), role);
    }
    throw ConfigError("unknown demand family '" + fam + "'");
}

inline json demand_to_json(const DemandFunction& d) {
    json j;
    switch (d.family()) {
        case DemandFunction::Family::RationalSquare:
            j["family"] = "rational_square";
            j["params"] = json::object();
            break;
        case DemandFunction::Family::ClippedLinear:
            j["family"] = "clipped_linear";
            j["params"] = {{"alpha", d.param1()}};
            break;
        case DemandFunction::Family::Exponential:
            j["family"] = "exponential";
            j["params"] = {{"delta", d.param1()}};
            break;
        case DemandFunction::Family::ClippedExpGrowth:
            j["family"] = "clipped_exp_growth";
            j["params"] = {{"alpha", d.param1()}, {"beta", d.param2()}};
            break;
        case DemandFunction::Family::EmpiricalStep:
            j["family"] = "empirical";
            j["params"] = {{"breakpoints", d.steps().ratios}, {"weights", d.steps().weights}};
            break;
    }
    return j;
}

inline MarketModel model_from_json(const json& j) {
    if (!j.contains("domestic") || !j.contains("foreign"))
        throw ConfigError("model needs 'domestic' and 'foreign' demand specs");
    auto dom = demand_from_json(j["domestic"], DemandRole::Domestic);
    auto fgn = demand_from_json(j["foreign"], DemandRole::Foreign);
    const double M = j.value("M", 100.0);
    std::optional<bool> symmetric;
    if (j.contains("symmetric")) symmetric = j["symmetric"].get<bool>();

    detail::PairedEmpiricalPtr pair;
    if (dom.empirical() && fgn.empirical() &&
        dom.steps().ratios == fgn.steps().ratios) {
        pair = detail::PairedEmpirical::build(dom.steps().ratios, dom.steps().weights,
                                              fgn.steps().weights);
    }
    try {
        return MarketModel(std::move(dom), std::move(fgn), M, symmetric, std::move(pair));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid model: ") + e.what());
    }
}

inline json model_to_json(const MarketModel& m) {
    json j;
    j["domestic"] = demand_to_json(m.domestic());
    j["foreign"] = demand_to_json(m.foreign());
    j["M"] = m.box_bound();
    j["symmetric"] = m.symmetric();
    return j;
}

inline DistributionSpec distribution_from_json(const json& j) {
    if (!j.contains("law") || !j["law"].is_string())
        throw ConfigError("distribution spec needs a 'law' string");
    const std::string law = j["law"].get<std::string>();
    DistributionSpec d;
    if (law == "lognormal") {
        d.kind = DistributionSpec::Kind::Lognormal;
        d.a = require_number(j, "mu");
        d.b = require_number(j, "sigma");
    } else if (law == "uniform") {
        d.kind = DistributionSpec::Kind::Uniform;
        d.a = require_number(j, "a");
        d.b = require_number(j, "b");
    } else if (law == "constant") {
        d.kind = DistributionSpec::Kind::Constant;
        d.a = require_number(j, "value");
    } else {
        throw ConfigError("unknown law '" + law + "' (lognormal|uniform|constant)");
    }
    d.validate();
    return d;
}

inline ScenarioSpec scenario_from_json(const json& j) {
    ScenarioSpec s;
    if (!j.contains("n")) throw ConfigError("scenario needs a commodity count 'n'");
    s.n = j["n"].get<std::int64_t>();
    for (const char* key : {"p", "p_star", "d", "d_star"})
        if (!j.contains(key)) throw ConfigError(std::string("scenario needs a '") + key + "' law");
    s.p = distribution_from_json(j["p"]);
    s.p_star = distribution_from_json(j["p_star"]);
    s.d = distribution_from_json(j["d"]);
    s.d_star = distribution_from_json(j["d_star"]);
    s.rng_seed = j.value("seed", std::uint64_t{1});
    s.validate();
    return s;
}

inline SolverConfig config_from_json(const json& j) {
    SolverConfig c;
    c.tol_root = j.value("tol_root", c.tol_root);
    c.tol_nash = j.value("tol_nash", c.tol_nash);
    c.max_newton_iters = j.value("max_newton_iters", c.max_newton_iters);
    c.newton_damping = j.value("newton_damping", c.newton_damping);
    c.scan_points = j.value("scan_points", c.scan_points);
    c.seed_grid = j.value("seed_grid", c.seed_grid);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    }
    return c;
}

inline json config_to_json(const SolverConfig& c) {
    return json{{"tol_root", c.tol_root},
                {"tol_nash", c.tol_nash},
                {"max_newton_iters", c.max_newton_iters},
                {"newton_damping", c.newton_damping},
                {"scan_points", c.scan_points},
                {"seed_grid", c.seed_grid},
                {"rng_seed", c.rng_seed}};
}

inline json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("bad JSON in '" + path + "': " + e.what());
    }
}

}  // namespace tariffgame::io
