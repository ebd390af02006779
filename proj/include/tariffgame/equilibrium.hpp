#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tariffgame/config.hpp"
#include "tariffgame/demand.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/rootfind.hpp"

namespace tariffgame {

/// Retained fractions of import value: a tariff of 1-theta keeps theta.
struct TariffPair {
    double theta;
    double theta_star;
};

inline void require_tariffs_in_box(const MarketModel& m, TariffPair t) {
    const double lo = 1.0 / m.box_bound();
    if (!(t.theta >= lo && t.theta <= 1.0) || !(t.theta_star >= lo && t.theta_star <= 1.0))
        throw DomainError("tariff parameters must lie in [1/M, 1]");
}

enum class RootMultiplicity { Unique, MultipleDetected };

struct RateSolution {
    double rate_e = 0.0;
    double residual = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    RootMultiplicity multiplicity = RootMultiplicity::Unique;
    bool on_boundary = false;  // equilibrium pinned at 1/M or M; economic validity not claimed
};

struct RateSensitivities {
    double de_dtheta = 0.0;       // e_theta
    double de_dtheta_star = 0.0;  // e_theta*
    double denominator = 0.0;     // D(e/th) + (e/th) D'(e/th) - th* D*'(th* e)
};

/// x D(x/theta) - D*(theta* x); zero exactly at an equilibrium rate.
inline double currency_balance(const MarketModel& m, double x, TariffPair t) {
    require_tariffs_in_box(m, t);
    const double M = m.box_bound();
    if (!(x >= 1.0 / M && x <= M)) throw DomainError("rate outside [1/M, M]");
    return x * m.domestic()(x / t.theta) - m.foreign()(t.theta_star * x);
}

/// Scans a log-spaced grid over [1/M, M] for sign changes of the balance and
/// refines each bracket by bisection. Returns the smallest root; more than
/// one sign change is reported, not hidden. Bisection is used deliberately:
/// empirical demands make the balance a step function.
inline RateSolution solve_rate(const MarketModel& m, TariffPair t, const SolverConfig& cfg = {}) {
    cfg.validate();
    require_tariffs_in_box(m, t);
    const double M = m.box_bound();
    const double lo_box = 1.0 / M;
    const int n = cfg.scan_points;

    auto f = [&](double x) {
        return x * m.domestic()(x / t.theta) - m.foreign()(t.theta_star * x);
    };

    std::vector<double> roots;
    double root_residual = 0.0, root_lo = 0.0, root_hi = 0.0;
    const double log_lo = std::log(lo_box), log_hi = std::log(M);
    double x_prev = lo_box, f_prev = f(lo_box);
    bool boundary = false;

    auto record = [&](double r, double fr, double blo, double bhi) {
        if (!roots.empty() && std::abs(r - roots.back()) < 4.0 * cfg.tol_root) return;
        roots.push_back(r);
        if (roots.size() == 1) {
            root_residual = fr;
            root_lo = blo;
            root_hi = bhi;
        }
    };

    if (f_prev == 0.0) {
        record(x_prev, 0.0, x_prev, x_prev);
        boundary = true;
    }
    for (int i = 1; i < n; ++i) {
        const double x = (i == n - 1) ? M : std::exp(log_lo + (log_hi - log_lo) * i / (n - 1));
        const double fx = f(x);
        if (fx == 0.0) {
            record(x, 0.0, x, x);
            if (i == n - 1) boundary = boundary || roots.size() == 1;
        } else if (f_prev != 0.0 && (f_prev > 0) != (fx > 0)) {
            double lo = x_prev, hi = x, flo = f_prev;
            // narrow until the x-bracket is below tol_root
            const double r = detail::bisect(f, lo, hi, flo, cfg.tol_root);
            record(r, f(r), lo, hi);
        }
        x_prev = x;
        f_prev = fx;
    }

    if (roots.empty())
        throw NoEquilibriumInBox("currency balance has no root in [1/M, M]; only the degenerate "
                                 "rates e = 0 or 1/e = 0 remain");

    RateSolution sol;
    sol.rate_e = roots.front();
    sol.residual = root_residual;
    sol.bracket_lo = root_lo;
    sol.bracket_hi = root_hi;
    sol.multiplicity = roots.size() > 1 ? RootMultiplicity::MultipleDetected : RootMultiplicity::Unique;
    sol.on_boundary = boundary || sol.rate_e <= lo_box * (1 + 1e-12) || sol.rate_e >= M * (1 - 1e-12);
    return sol;
}

/// Implicit-function sensitivities of the solved rate,
///   e_theta  = (e^2/theta^2) D'(e/theta) / denom,
///   e_theta* = e D*'(theta* e) / denom,
/// with denom = D(e/theta) + (e/theta) D'(e/theta) - theta* D*'(theta* e).
/// Requires e to actually solve the balance for t.
inline RateSensitivities rate_sensitivities(const MarketModel& m, double e, TariffPair t,
                                            const SolverConfig& cfg = {}) {
    const MarketModel mv = m.solver_view();
    const double bal = currency_balance(mv, e, t);
    if (std::abs(bal) > 10.0 * cfg.tol_root)
        throw DomainError("rate_sensitivities: e does not solve the balance (|residual| = " +
                          std::to_string(std::abs(bal)) + ")");
    const double a = e / t.theta;
    const double D = mv.domestic()(a);
    const double Dp = mv.domestic().derivative(a, 1);
    const double Dsp = mv.foreign().derivative(t.theta_star * e, 1);
    RateSensitivities s;
    s.denominator = D + a * Dp - t.theta_star * Dsp;
    if (std::abs(s.denominator) < 1e-12)
        throw SingularDenominator("implicit-function denominator ~ 0; sensitivities undefined");
    s.de_dtheta = (e * e / (t.theta * t.theta)) * Dp / s.denominator;
    s.de_dtheta_star = e * Dsp / s.denominator;
    return s;
}

struct ReciprocalRateReport {
    double e_forward = 0.0;   // e(theta, theta*)
    double e_swapped = 0.0;   // e(theta*, theta)
    double product_error = 0.0;  // |e_forward * e_swapped - 1|
};

/// For symmetric nations e(theta*, theta) = 1/e(theta, theta*).
inline ReciprocalRateReport reciprocal_rate_check(const MarketModel& m, TariffPair t,
                                                  const SolverConfig& cfg = {}) {
    if (!m.symmetric()) throw DomainError("reciprocal_rate_check needs a symmetric model");
    ReciprocalRateReport rep;
    rep.e_forward = solve_rate(m, t, cfg).rate_e;
    rep.e_swapped = solve_rate(m, TariffPair{t.theta_star, t.theta}, cfg).rate_e;
    rep.product_error = std::abs(rep.e_forward * rep.e_swapped - 1.0);
    return rep;
}

}  // namespace tariffgame
