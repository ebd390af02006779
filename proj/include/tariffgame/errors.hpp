#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tariffgame {

/// Bad argument or precondition violation (out-of-box point, negative x, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed model/scenario/config input.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Derivative requested exactly at a clip kink; carries the one-sided values.
struct KinkError : std::runtime_error {
    double location;
    double left_value;
    double right_value;
    KinkError(double loc, double left, double right)
        : std::runtime_error("derivative evaluated exactly at kink x=" + std::to_string(loc)),
          location(loc), left_value(left), right_value(right) {}
};

/// Base for solver failures.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The currency-balance has no sign change on [1/M, M]; only the degenerate
/// rates e = 0 or 1/e = 0 remain, which carry no economic sense.
struct NoEquilibriumInBox : SolverError {
    using SolverError::SolverError;
};

/// Implicit-function denominator vanished; sensitivities undefined.
struct SingularDenominator : SolverError {
    using SolverError::SolverError;
};

struct IntegrationError : SolverError {
    using SolverError::SolverError;
};

struct NoNashFound : SolverError {
    using SolverError::SolverError;
};

/// A closed-form solution landed outside the admissible box.
struct BoundaryError : SolverError {
    using SolverError::SolverError;
};

/// A point converged on the first-order system but fails a second-order check.
struct SaddleRejected : SolverError {
    double e, theta, theta_star;
    SaddleRejected(std::string msg, double e_, double th, double ths)
        : SolverError(std::move(msg)), e(e_), theta(th), theta_star(ths) {}
};

/// Best-response iteration did not settle; carries the visited tariff pairs.
struct NonConvergent : SolverError {
    std::vector<std::pair<double, double>> trajectory;
    NonConvergent(std::string msg, std::vector<std::pair<double, double>> traj)
        : SolverError(std::move(msg)), trajectory(std::move(traj)) {}
};

}  // namespace tariffgame
