#pragma once

#include <cstdint>

#include "tariffgame/errors.hpp"

namespace tariffgame {

/// Knobs shared by the rate and Nash solvers. Defaults reproduce the
/// reference results; see README for the JSON schema.
struct SolverConfig {
    double tol_root = 1e-10;        ///< absolute x-tolerance of rate bisection
    double tol_nash = 1e-8;         ///< residual bound for an accepted equilibrium
    int max_newton_iters = 100;
    double newton_damping = 0.5;    ///< step-halving factor of the line search
    int scan_points = 2048;         ///< log-spaced bracketing scan density
    int seed_grid = 12;             ///< Newton seeding grid is seed_grid x seed_grid
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (!(tol_root > 0) || !(tol_nash > 0))
            throw ConfigError("tolerances must be positive");
        if (max_newton_iters < 1) throw ConfigError("max_newton_iters must be >= 1");
        if (!(newton_damping > 0) || !(newton_damping < 1))
            throw ConfigError("newton_damping must be in (0, 1)");
        if (scan_points < 2) throw ConfigError("scan_points must be >= 2");
        if (seed_grid < 8) throw ConfigError("seed_grid must be >= 8");
    }
};

}  // namespace tariffgame
