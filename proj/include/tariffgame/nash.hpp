#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "tariffgame/config.hpp"
#include "tariffgame/demand.hpp"
#include "tariffgame/equilibrium.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/gains.hpp"
#include "tariffgame/rootfind.hpp"

namespace tariffgame {

enum class Side { Domestic, Foreign };

/// A candidate Nash point with its stored diagnostics.
struct EquilibriumTriple {
    double e_hat = 0.0;
    double theta_hat = 0.0;
    double theta_star_hat = 0.0;
    std::array<double, 3> foc_residuals{};  // r1 balance, r2 foreign FOC, r3 domestic FOC
    std::pair<bool, bool> soc_pass{false, false};
    RateSensitivities sensitivities{};
    bool boundary_flag = false;
};

struct SecondOrderReport {
    double ine1 = 0.0;  // must be < 0
    double ine2 = 0.0;  // must be > 0
    bool pass1 = false, pass2 = false;
};

namespace detail {

inline std::array<double, 3> foc_unchecked(const MarketModel& m, double e, TariffPair t) {
    const double a = e / t.theta;
    const double D = m.domestic()(a);
    const double Dp = m.domestic().derivative(a, 1);
    const double Dsp = m.foreign().derivative(t.theta_star * e, 1);
    const double Ds = m.foreign()(t.theta_star * e);
    return {e * D - Ds,
            D - t.theta_star * (1.0 - t.theta) * Dsp,
            D - a * (t.theta_star - 1.0) * Dp};
}

inline RateSensitivities sensitivities_unchecked(const MarketModel& m, double e, TariffPair t) {
    const double a = e / t.theta;
    const double D = m.domestic()(a);
    const double Dp = m.domestic().derivative(a, 1);
    const double Dsp = m.foreign().derivative(t.theta_star * e, 1);
    RateSensitivities s;
    s.denominator = D + a * Dp - t.theta_star * Dsp;
    if (std::abs(s.denominator) < 1e-12)
        throw SingularDenominator("implicit-function denominator ~ 0");
    s.de_dtheta = (e * e / (t.theta * t.theta)) * Dp / s.denominator;
    s.de_dtheta_star = e * Dsp / s.denominator;
    return s;
}

}  // namespace detail

/// Residuals of the equilibrium system: the tariff-distorted balance and the
/// two first-order conditions of the gain maximizations,
///   r1 = e D(e/th) - D*(th* e)
///   r2 = D(e/th) - th*(1-th) D*'(th* e)
///   r3 = D(e/th) - (e/th)(th*-1) D'(e/th).
inline std::array<double, 3> foc_residuals(const MarketModel& m, double e, TariffPair t) {
    require_tariffs_in_box(m, t);
    const double M = m.box_bound();
    if (!(e >= 1.0 / M && e <= M)) throw DomainError("rate outside [1/M, M]");
    return detail::foc_unchecked(m.solver_view(), e, t);
}

/// Strict second-order maximum conditions at a stationary triple.
/// ine1 is the bracket of d2G/dth2 = (e_th/th) * ine1 (negative required);
/// ine2 is th^2 times the bracket of d2G*/dths2 = (e_ths/(th* e)) * bracket,
/// which must be positive since e_ths < 0.
inline SecondOrderReport second_order_report(const MarketModel& m, double e, TariffPair t,
                                             const RateSensitivities& sens) {
    const MarketModel mv = m.solver_view();
    const double a = e / t.theta;
    const double Dp = mv.domestic().derivative(a, 1);
    const double Dpp = mv.domestic().derivative(a, 2);
    const double Dsp = mv.foreign().derivative(t.theta_star * e, 1);
    const double Dspp = mv.foreign().derivative(t.theta_star * e, 2);
    const double et = sens.de_dtheta, ets = sens.de_dtheta_star;
    const double th = t.theta, ts = t.theta_star;

    SecondOrderReport rep;
    rep.ine1 = ts * ts * (1.0 - th) * et * Dspp - ts * Dsp - ((et * th - e) / (th * th)) * Dp;
    rep.ine2 = th * ((2.0 - ts) * ets - e) * Dp + (1.0 - ts) * e * ets * Dpp;
    rep.pass1 = rep.ine1 < 0.0;
    rep.pass2 = rep.ine2 > 0.0;
    return rep;
}

inline std::pair<bool, bool> check_second_order(const MarketModel& m,
                                                const EquilibriumTriple& triple) {
    const auto rep = second_order_report(m, triple.e_hat,
                                         TariffPair{triple.theta_hat, triple.theta_star_hat},
                                         triple.sensitivities);
    return {rep.pass1, rep.pass2};
}

namespace detail {

inline EquilibriumTriple make_triple(const MarketModel& m, double e, TariffPair t) {
    const MarketModel mv = m.solver_view();
    EquilibriumTriple tr;
    tr.e_hat = e;
    tr.theta_hat = t.theta;
    tr.theta_star_hat = t.theta_star;
    tr.foc_residuals = foc_unchecked(mv, e, t);
    tr.sensitivities = sensitivities_unchecked(mv, e, t);
    try {
        const auto rep = second_order_report(m, e, t, tr.sensitivities);
        tr.soc_pass = {rep.pass1, rep.pass2};
    } catch (const KinkError&) {
        tr.soc_pass = {false, false};  // curvature undefined at a clip kink
    }
    const double M = m.box_bound(), lo = 1.0 / M;
    const double be = 1e-9;
    tr.boundary_flag = t.theta < lo + be || t.theta > 1.0 - be || t.theta_star < lo + be ||
                       t.theta_star > 1.0 - be || e < lo * (1.0 + be) || e > M * (1.0 - be);
    return tr;
}

inline double residual_norm(const std::array<double, 3>& r) {
    return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

struct RankedCandidate {
    EquilibriumTriple triple;
    double res_norm = 0.0;
    double total_gain = 0.0;
};

inline bool candidate_better(const RankedCandidate& a, const RankedCandidate& b) {
    const int soc_a = a.triple.soc_pass.first && a.triple.soc_pass.second;
    const int soc_b = b.triple.soc_pass.first && b.triple.soc_pass.second;
    if (soc_a != soc_b) return soc_a > soc_b;
    if (a.triple.boundary_flag != b.triple.boundary_flag)
        return !a.triple.boundary_flag;  // interior Nash points outrank boundary ones
    if (a.res_norm != b.res_norm) return a.res_norm < b.res_norm;
    return a.total_gain > b.total_gain;
}

}  // namespace detail

struct NashResult {
    EquilibriumTriple best;
    std::vector<EquilibriumTriple> candidates;  // every converged point, ranked
};

inline bool nash_accepted(const EquilibriumTriple& t, const SolverConfig& cfg = {}) {
    return detail::residual_norm(t.foc_residuals) <= cfg.tol_nash && t.soc_pass.first &&
           t.soc_pass.second && !t.boundary_flag;
}

namespace detail {

// Damped Newton with a central-difference Jacobian on (e, theta, theta*),
// clamped to the box. Returns true if the residual tolerance was met.
inline bool newton_loop(const MarketModel& mv, Eigen::Vector3d& v, const SolverConfig& cfg) {
    const double M = mv.box_bound(), lo = 1.0 / M;
    auto clamp_box = [&](Eigen::Vector3d u) {
        u[0] = std::clamp(u[0], lo, M);
        u[1] = std::clamp(u[1], lo, 1.0);
        u[2] = std::clamp(u[2], lo, 1.0);
        return u;
    };
    auto resid = [&](const Eigen::Vector3d& u) {
        const auto r = foc_unchecked(mv, u[0], {u[1], u[2]});
        return Eigen::Vector3d(r[0], r[1], r[2]);
    };
    v = clamp_box(v);
    Eigen::Vector3d r = resid(v);
    for (int it = 0; it < cfg.max_newton_iters; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= 1e-13) break;
        Eigen::Matrix3d J;
        const double h = 1e-6;
        for (int c = 0; c < 3; ++c) {
            Eigen::Vector3d vp = v, vm = v;
            vp[c] += h;
            vm[c] -= h;
            J.col(c) = (resid(clamp_box(vp)) - resid(clamp_box(vm))) / (2.0 * h);
        }
        const Eigen::Vector3d step = J.fullPivLu().solve(-r);
        if (!step.allFinite()) return false;
        double lambda = 1.0;
        const double n0 = r.norm();
        bool moved = false;
        while (lambda > 1e-12) {
            const Eigen::Vector3d vn = clamp_box(v + lambda * step);
            const Eigen::Vector3d rn = resid(vn);
            if (rn.norm() < n0) {
                v = vn;
                r = rn;
                moved = true;
                break;
            }
            lambda *= cfg.newton_damping;
        }
        if (!moved) break;  // stagnated; keep the best point reached
    }
    return r.lpNorm<Eigen::Infinity>() <= cfg.tol_nash;
}

}  // namespace detail

/// Newton-polish a single candidate point to the full residual tolerance.
inline EquilibriumTriple refine_candidate(const MarketModel& m, double e, TariffPair t,
                                          const SolverConfig& cfg = {}) {
    cfg.validate();
    Eigen::Vector3d v(e, t.theta, t.theta_star);
    if (!detail::newton_loop(m.solver_view(), v, cfg))
        throw NoNashFound("Newton refinement did not reach the residual tolerance");
    return detail::make_triple(m, v[0], {v[1], v[2]});
}

/// Damped Newton on the full 3-system (e, theta, theta*), seeded from a grid
/// scan of the tariff box ranked by the FOC residuals at the solved rate.
/// Multiple converged points are ranked (SOC, interior, residual norm, total
/// gain) and all are reported rather than hidden.
inline NashResult solve_nash(const MarketModel& m, const SolverConfig& cfg = {}) {
    cfg.validate();
    const MarketModel mv = m.solver_view();
    const double M = m.box_bound(), lo = 1.0 / M;

    struct Seed {
        double e, th, ts, key;
    };
    std::vector<Seed> seeds;
    const int g = cfg.seed_grid;
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            const double th = lo + (1.0 - lo) * (i + 0.5) / g;
            const double ts = lo + (1.0 - lo) * (j + 0.5) / g;
            try {
                const double e = solve_rate(mv, {th, ts}, cfg).rate_e;
                // clipped families admit no-trade plateaus where every
                // residual vanishes identically; those are not equilibria
                if (!(mv.domestic()(e / th) > 0.0)) continue;
                detail::sensitivities_unchecked(mv, e, {th, ts});  // skip singular seeds
                const auto r = detail::foc_unchecked(mv, e, {th, ts});
                seeds.push_back({e, th, ts, std::hypot(r[1], r[2])});
            } catch (const SolverError&) {
            } catch (const KinkError&) {
            }
        }
    }
    if (seeds.empty()) throw NoNashFound("no seed point admits an equilibrium rate");
    std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.key < b.key; });
    const std::size_t n_try = std::min<std::size_t>(seeds.size(), 12);

    std::vector<detail::RankedCandidate> cands;
    for (std::size_t s = 0; s < n_try; ++s) {
        Eigen::Vector3d v(seeds[s].e, seeds[s].th, seeds[s].ts);
        try {
            if (!detail::newton_loop(mv, v, cfg)) continue;
            bool dup = false;
            for (const auto& c : cands)
                if (std::abs(c.triple.e_hat - v[0]) + std::abs(c.triple.theta_hat - v[1]) +
                        std::abs(c.triple.theta_star_hat - v[2]) <
                    1e-7) {
                    dup = true;
                    break;
                }
            if (dup) continue;
            detail::RankedCandidate rc;
            rc.triple = detail::make_triple(m, v[0], {v[1], v[2]});
            rc.res_norm = detail::residual_norm(rc.triple.foc_residuals);
            try {
                const auto gr = gains(m, v[0], {v[1], v[2]});
                rc.total_gain = gr.gain_domestic + gr.gain_foreign;
            } catch (const std::exception&) {
                rc.total_gain = -std::numeric_limits<double>::infinity();
            }
            cands.push_back(std::move(rc));
        } catch (const SolverError&) {
        } catch (const KinkError&) {
        } catch (const DomainError&) {
        }
    }

    if (cands.empty()) throw NoNashFound("no Newton seed converged to the residual tolerance");
    std::sort(cands.begin(), cands.end(), detail::candidate_better);

    NashResult out;
    out.best = cands.front().triple;
    for (auto& c : cands) out.candidates.push_back(c.triple);
    if (!(out.best.soc_pass.first && out.best.soc_pass.second))
        throw SaddleRejected("converged point fails the second-order conditions", out.best.e_hat,
                             out.best.theta_hat, out.best.theta_star_hat);
    return out;
}

/// Gain-maximizing own tariff against a fixed opponent tariff: 256-point grid
/// scan refined by golden section. Derivative-free, so it serves as an oracle
/// for the FOC algebra.
inline double best_response(const MarketModel& m, Side side, double opponent_tariff,
                            const SolverConfig& cfg = {}) {
    cfg.validate();
    const double M = m.box_bound(), lo = 1.0 / M;
    if (!(opponent_tariff >= lo && opponent_tariff <= 1.0))
        throw DomainError("opponent tariff outside [1/M, 1]");

    // the argmax resolution of a derivative-free search is sqrt(noise/|G''|),
    // so the inner rate solves need far tighter tolerance than the 1e-6 the
    // returned tariff promises
    SolverConfig inner = cfg;
    inner.tol_root = std::min(cfg.tol_root, 1e-13);
    int failures = 0;
    auto objective = [&](double own) -> double {
        const TariffPair t = side == Side::Domestic ? TariffPair{own, opponent_tariff}
                                                    : TariffPair{opponent_tariff, own};
        const double e = solve_rate(m, t, inner).rate_e;
        return side == Side::Domestic ? gain_domestic(m, e, t) : gain_foreign(m, e, t);
    };
    auto safe = [&](double own) -> double {
        try {
            return objective(own);
        } catch (const std::exception&) {
            ++failures;
            return -std::numeric_limits<double>::infinity();
        }
    };

    constexpr int kGrid = 256;
    double best_x = lo, best_v = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < kGrid; ++i) {
        const double x = lo + (1.0 - lo) * i / (kGrid - 1);
        const double vx = safe(x);
        if (vx > best_v) {
            best_v = vx;
            best_x = x;
            best_i = i;
        }
    }
    if (!std::isfinite(best_v))
        throw SolverError("best_response: gain evaluation failed at every grid point");
    const double a = lo + (1.0 - lo) * std::max(0, best_i - 1) / (kGrid - 1);
    const double b = lo + (1.0 - lo) * std::min(kGrid - 1, best_i + 1) / (kGrid - 1);
    const double refined = detail::golden_max(safe, a, b, 1e-7);
    return std::isfinite(safe(refined)) ? refined : best_x;
}

struct BestResponseIterationResult {
    EquilibriumTriple triple;
    int rounds = 0;
    std::vector<std::pair<double, double>> trajectory;
};

/// Alternating best responses from a starting pair. Convergence of this
/// dynamic is not guaranteed; after 200 rounds the trajectory is surfaced in
/// a NonConvergent error instead of being truncated silently.
inline BestResponseIterationResult best_response_iteration(const MarketModel& m, TariffPair start,
                                                           const SolverConfig& cfg = {}) {
    require_tariffs_in_box(m, start);
    double th = start.theta, ts = start.theta_star;
    std::vector<std::pair<double, double>> traj{{th, ts}};
    for (int round = 1; round <= 200; ++round) {
        const double th_new = best_response(m, Side::Domestic, ts, cfg);
        const double ts_new = best_response(m, Side::Foreign, th_new, cfg);
        const double delta = std::max(std::abs(th_new - th), std::abs(ts_new - ts));
        th = th_new;
        ts = ts_new;
        traj.emplace_back(th, ts);
        if (delta < 1e-6) {
            BestResponseIterationResult out;
            const double e = solve_rate(m, {th, ts}, cfg).rate_e;
            out.triple = detail::make_triple(m, e, {th, ts});
            out.rounds = round;
            out.trajectory = std::move(traj);
            return out;
        }
    }
    throw NonConvergent("best-response iteration still moving after 200 rounds", traj);
}

/// Symmetric fast path: with theta = theta* and e = 1 the system collapses to
/// the scalar equation theta D(1/theta) = (theta - 1) D'(1/theta).
inline EquilibriumTriple solve_symmetric(const MarketModel& m, const SolverConfig& cfg = {}) {
    cfg.validate();
    if (!m.symmetric()) throw DomainError("solve_symmetric needs a symmetric model");
    const MarketModel mv = m.solver_view();
    const double lo = 1.0 / m.box_bound();

    auto g = [&](double th) {
        try {
            return th * mv.domestic()(1.0 / th) - (th - 1.0) * mv.domestic().derivative(1.0 / th, 1);
        } catch (const KinkError&) {
            const double tp = th * (1.0 + 1e-12);
            return tp * mv.domestic()(1.0 / tp) - (tp - 1.0) * mv.domestic().derivative(1.0 / tp, 1);
        }
    };

    std::vector<double> roots;
    const int n = cfg.scan_points;
    double x_prev = lo, f_prev = g(lo);
    for (int i = 1; i < n; ++i) {
        const double x = lo + (1.0 - lo) * i / (n - 1);
        const double fx = g(x);
        // strict sign changes only: clipped families are identically zero
        // below their kink and that plateau is not a stationary point
        if (f_prev != 0.0 && fx != 0.0 && (f_prev > 0) != (fx > 0))
            roots.push_back(detail::bisect(g, x_prev, x, f_prev, std::min(cfg.tol_root, 1e-12)));
        x_prev = x;
        f_prev = fx;
    }
    if (roots.empty()) throw NoNashFound("symmetric stationarity equation has no root in [1/M, 1]");

    std::vector<detail::RankedCandidate> cands;
    for (double th : roots) {
        detail::RankedCandidate rc;
        rc.triple = detail::make_triple(m, 1.0, {th, th});
        rc.res_norm = detail::residual_norm(rc.triple.foc_residuals);
        cands.push_back(std::move(rc));
    }
    std::sort(cands.begin(), cands.end(), detail::candidate_better);
    return cands.front().triple;
}

/// Closed-form path for D = exp(-delta x), D* = (alpha x exp(beta x)) ^ 1:
/// a scalar equation pins theta*, then theta and e follow explicitly. The
/// scalar equation has a spurious branch ((theta*-1) ln(alpha theta*) = 1,
/// giving theta = 0); interior filtering removes it. The result is
/// cross-checked against the generic Newton solver.
inline EquilibriumTriple solve_exponential_family(double alpha, double beta, double delta,
                                                  const SolverConfig& cfg = {}) {
    cfg.validate();
    if (!(alpha > 0) || !(beta > 0) || !(delta > 0) || !(alpha < 1))
        throw DomainError("solve_exponential_family needs alpha, beta, delta > 0 and alpha < 1");
    const MarketModel model = MarketModel::exponential_asymmetric(alpha, beta, delta);
    const double M = model.box_bound(), lo = 1.0 / M;

    auto h = [&](double ts) {
        const double L = std::log(alpha * ts);
        return beta * ts * (ts - 1.0) -
               (ts * beta - (ts - 1.0) * delta * L + delta) * (ts - (ts - 1.0) * L);
    };

    std::vector<double> roots;
    const int n = cfg.scan_points;
    double x_prev = lo, f_prev = h(lo);
    for (int i = 1; i < n; ++i) {
        const double x = lo + (1.0 - lo) * i / (n - 1);
        const double fx = h(x);
        if (f_prev != 0.0 && fx != 0.0 && (f_prev > 0) != (fx > 0))
            roots.push_back(detail::bisect(h, x_prev, x, f_prev, 1e-13));
        x_prev = x;
        f_prev = fx;
    }
    if (roots.empty()) throw NoNashFound("theta* equation has no root in (1/M, 1)");

    std::vector<detail::RankedCandidate> cands;
    bool saw_out_of_box = false;
    for (double ts : roots) {
        const double L = std::log(alpha * ts);
        const double th = ((ts - 1.0) * delta * L - delta) / (ts * beta);
        const double e = -th * L / (th * ts * beta + delta);
        if (!(th > lo && th < 1.0 && e > lo && e < M)) {
            saw_out_of_box = true;
            continue;
        }
        if (model.foreign()(ts * e) >= 1.0) continue;  // closed form assumed the pre-clip branch
        detail::RankedCandidate rc;
        rc.triple = detail::make_triple(model, e, {th, ts});
        rc.res_norm = detail::residual_norm(rc.triple.foc_residuals);
        cands.push_back(std::move(rc));
    }
    if (cands.empty()) {
        if (saw_out_of_box)
            throw BoundaryError("every closed-form solution lies outside the box");
        throw NoNashFound("no admissible exponential-family solution");
    }
    std::sort(cands.begin(), cands.end(), detail::candidate_better);
    const EquilibriumTriple best = cands.front().triple;

    const NashResult generic = solve_nash(model, cfg);
    const double dev = std::max({std::abs(generic.best.e_hat - best.e_hat),
                                 std::abs(generic.best.theta_hat - best.theta_hat),
                                 std::abs(generic.best.theta_star_hat - best.theta_star_hat)});
    if (dev > 1e-6)
        throw SolverError("exponential-family closed form disagrees with the generic solver by " +
                          std::to_string(dev));
    return best;
}

}  // namespace tariffgame
