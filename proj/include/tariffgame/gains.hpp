#pragma once

#include <cmath>
#include <optional>

#include "tariffgame/config.hpp"
#include "tariffgame/demand.hpp"
#include "tariffgame/equilibrium.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/quadrature.hpp"

namespace tariffgame {

enum class GainMethod { Quadrature, ExpectationSum };

struct GainReport {
    double gain_domestic = 0.0;  // G
    double gain_foreign = 0.0;   // G*
    GainMethod method = GainMethod::Quadrature;
    double truncation_error_bound = 0.0;
};

namespace detail {

// Interval on which the demand derivative can be nonzero, in role space.
inline std::pair<double, double> derivative_support(const DemandFunction& d) {
    if (auto k = d.kink()) {
        // clip-to-constant region: natural families clip above, reciprocal ones below
        const bool clip_above = !d.reciprocal_composed();
        return clip_above ? std::make_pair(0.0, *k) : std::make_pair(*k, kInf);
    }
    return {0.0, kInf};
}

// y |D'(y)| ~ alpha/y for the growth family used as a domestic curve; every
// other family decays fast enough for the improper integral to converge.
inline bool domestic_tail_integrable(const DemandFunction& d) {
    return !(d.family() == DemandFunction::Family::ClippedExpGrowth && d.reciprocal_composed());
}

// D*'(u)/u ~ alpha/u near zero for the natural growth family; log-divergent.
inline bool foreign_origin_integrable(const DemandFunction& d) {
    return !(d.family() == DemandFunction::Family::ClippedExpGrowth && !d.reciprocal_composed());
}

inline void require_gain_point(const MarketModel& m, double e, TariffPair t) {
    require_tariffs_in_box(m, t);
    const double M = m.box_bound();
    if (!(e >= 1.0 / M && e <= M)) throw DomainError("rate outside [1/M, M]");
}

inline GainReport expectation_gains(const MarketModel& m, double e, TariffPair t) {
    const auto* p = m.paired_sample();
    const double a = e / t.theta;       // domestic imports where p/p* > a
    const double c = t.theta_star * e;  // foreign imports where p/p* < c
    const std::size_t ia = p->idx_gt(a);
    const std::size_t ic = p->idx_geq(c);
    const std::size_t n = p->ratios.size();
    GainReport rep;
    rep.method = GainMethod::ExpectationSum;
    rep.gain_domestic = ((p->prw[n] - p->prw[ia]) - p->pv[ic]) / p->wtot;
    rep.gain_foreign = (p->pvr[ic] - (p->pw[n] - p->pw[ia])) / p->vtot;
    rep.truncation_error_bound = 0.0;
    return rep;
}

}  // namespace detail

/// G(e, theta, theta*) = -int_{e/theta} y D'(y) dy - D*(theta* e).
/// The improper tail is integrated in full when it converges; the one
/// log-divergent case (growth family as domestic demand) is cut at
/// U = M max(1, 1/theta) and the M-sensitivity reported.
inline double gain_domestic(const MarketModel& m, double e, TariffPair t,
                            double* truncation_bound = nullptr) {
    detail::require_gain_point(m, e, t);
    if (m.empirical()) {
        if (!m.paired_sample())
            throw ConfigError("expectation-form gains need a paired empirical model");
        return detail::expectation_gains(m, e, t).gain_domestic;
    }
    if (m.domestic().empirical() || m.foreign().empirical())
        throw ConfigError("gains for mixed analytic/empirical models are not supported");

    const auto& D = m.domestic();
    const double a = e / t.theta;
    auto [s_lo, s_hi] = detail::derivative_support(D);
    double lo = std::max(a, s_lo);
    double hi = s_hi;
    double bound = 0.0;
    if (!detail::domestic_tail_integrable(D)) {
        hi = std::min(hi, m.box_bound() * std::max(1.0, 1.0 / t.theta));
        bound = std::abs(D.derivative(hi, 1)) * hi * hi * 0.6931471805599453;  // doubling-M delta
    }
    double integral = 0.0, quad_err = 0.0;
    if (hi > lo) {
        auto f = [&](double y) { return -y * D.derivative(y, 1); };
        auto r = detail::integrate(f, lo, hi);
        integral = r.value;
        quad_err = r.error;
    }
    if (truncation_bound) *truncation_bound = bound + quad_err;
    return integral - m.foreign()(t.theta_star * e);
}

/// G*(e, theta, theta*) = int_0^{theta* e} D*'(u)/u du - D(e/theta), obtained
/// from the paper's y-integral by the substitution u = 1/y. For the growth
/// family the integrand ~ alpha/u is log-divergent at 0 and the box cutoff
/// u >= 1/(M max(1, theta*)) applies.
inline double gain_foreign(const MarketModel& m, double e, TariffPair t,
                           double* truncation_bound = nullptr) {
    detail::require_gain_point(m, e, t);
    if (m.empirical()) {
        if (!m.paired_sample())
            throw ConfigError("expectation-form gains need a paired empirical model");
        return detail::expectation_gains(m, e, t).gain_foreign;
    }
    if (m.domestic().empirical() || m.foreign().empirical())
        throw ConfigError("gains for mixed analytic/empirical models are not supported");

    const auto& Ds = m.foreign();
    const double c = t.theta_star * e;
    auto [s_lo, s_hi] = detail::derivative_support(Ds);
    double lo = s_lo;
    double hi = std::min(c, s_hi);
    double bound = 0.0;
    if (!detail::foreign_origin_integrable(Ds)) {
        lo = std::max(lo, 1.0 / (m.box_bound() * std::max(1.0, t.theta_star)));
        bound = std::abs(Ds.derivative(lo, 1)) * 0.6931471805599453;
    }
    double integral = 0.0, quad_err = 0.0;
    if (hi > lo) {
        auto f = [&](double u) {
            const double dsp = Ds.derivative(u, 1);
            return dsp == 0.0 ? 0.0 : dsp / u;  // underflow-safe near 0
        };
        auto r = detail::integrate(f, lo, hi);
        integral = r.value;
        quad_err = r.error;
    }
    if (truncation_bound) *truncation_bound = bound + quad_err;
    return integral - m.domestic()(e / t.theta);
}

inline GainReport gains(const MarketModel& m, double e, TariffPair t) {
    detail::require_gain_point(m, e, t);
    if (m.empirical()) {
        if (!m.paired_sample())
            throw ConfigError("expectation-form gains need a paired empirical model");
        return detail::expectation_gains(m, e, t);
    }
    GainReport rep;
    rep.method = GainMethod::Quadrature;
    double b1 = 0.0, b2 = 0.0;
    rep.gain_domestic = gain_domestic(m, e, t, &b1);
    rep.gain_foreign = gain_foreign(m, e, t, &b2);
    rep.truncation_error_bound = b1 + b2;
    return rep;
}

struct SymmetryGainReport {
    double rate_e = 0.0;
    double gain_domestic_fwd = 0.0;    // G(e(th,ts), th, ts)
    double gain_foreign_swapped = 0.0; // G*(1/e(th,ts), ts, th)
    double difference = 0.0;
};

/// For symmetric nations G*(1/e(th,ts), ts, th) = G(e(th,ts), th, ts).
inline SymmetryGainReport symmetry_gain_check(const MarketModel& m, TariffPair t,
                                              const SolverConfig& cfg = {}) {
    if (!m.symmetric()) throw DomainError("symmetry_gain_check needs a symmetric model");
    SymmetryGainReport rep;
    rep.rate_e = solve_rate(m, t, cfg).rate_e;
    rep.gain_domestic_fwd = gain_domestic(m, rep.rate_e, t);
    rep.gain_foreign_swapped =
        gain_foreign(m, 1.0 / rep.rate_e, TariffPair{t.theta_star, t.theta});
    rep.difference = std::abs(rep.gain_foreign_swapped - rep.gain_domestic_fwd);
    return rep;
}

namespace detail {

/// Integration-by-parts route for the domestic import value:
/// -int_a yD'(y)dy = a D(a) + int_a D(y) dy (valid when y D(y) -> 0).
/// Second algebraic path used to cross-check the direct quadrature.
inline double domestic_import_value_by_parts(const MarketModel& m, double a) {
    const auto& D = m.domestic();
    if (!domestic_tail_integrable(D))
        throw DomainError("by-parts route needs an integrable tail");
    auto [s_lo, s_hi] = derivative_support(D);
    const double hi = (s_hi == kInf) ? kInf : s_hi;
    double tail = 0.0;
    if (hi > a) tail = integrate([&](double y) { return D(y); }, a, hi).value;
    return a * D(a) + tail;
}

}  // namespace detail

}  // namespace tariffgame
