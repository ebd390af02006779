#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tariffgame/demand.hpp"
#include "tariffgame/equilibrium.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/gains.hpp"

namespace tariffgame {

namespace rng {

/// Counter-based generator: output i of stream s is a pure function of
/// (seed, s, i), so streams can be produced independently and in parallel
/// without changing results. SplitMix64 finalizer over a Weyl counter.
inline constexpr const char* kAlgorithm = "splitmix64-counter";

namespace detail_rng {
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail_rng

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail_rng::mix(seed ^ detail_rng::mix(stream * 0xD1B54A32D192ED03ull))) {}

    std::uint64_t bits(std::uint64_t counter) const {
        return detail_rng::mix(key_ ^ (counter * 0x2545F4914F6CDD1Dull));
    }
    /// uniform on the open interval (0, 1)
    double uniform(std::uint64_t counter) const {
        return (double(bits(counter) >> 11) + 0.5) * 0x1p-53;
    }
    /// standard normal via Box-Muller on counters (2i, 2i+1)
    double normal(std::uint64_t i) const {
        const double u1 = uniform(2 * i), u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_;
};

}  // namespace rng

/// Law of one sampled array; supports are required to be strictly positive.
struct DistributionSpec {
    enum class Kind { Lognormal, Uniform, Constant };
    Kind kind = Kind::Constant;
    double a = 1.0;  // mu / lower bound / value
    double b = 0.0;  // sigma / upper bound

    void validate() const {
        switch (kind) {
            case Kind::Lognormal:
                if (!(b >= 0)) throw ConfigError("lognormal sigma must be >= 0");
                break;
            case Kind::Uniform:
                if (!(a > 0) || !(b > a)) throw ConfigError("uniform law needs 0 < a < b");
                break;
            case Kind::Constant:
                if (!(a > 0)) throw ConfigError("constant law needs a positive value");
                break;
        }
    }
    double draw(const rng::CounterRng& r, std::uint64_t i) const {
        switch (kind) {
            case Kind::Lognormal:
                return std::exp(a + b * r.normal(i));
            case Kind::Uniform:
                return a + (b - a) * r.uniform(i);
            case Kind::Constant:
            default:
                return a;
        }
    }
};

/// The randomized commodity universe: laws for prices and demands plus the
/// seed. The model itself leaves these laws free, so they are configuration.
struct ScenarioSpec {
    std::int64_t n = 0;
    DistributionSpec p, p_star, d, d_star;
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (n < 1) throw ConfigError("scenario needs n >= 1 commodities");
        p.validate();
        p_star.validate();
        d.validate();
        d_star.validate();
    }
};

/// Drawn commodity quadruples (p_k, p*_k, d_k, d*_k) with the normalization
/// constants C_N = sum p*_k d_k and C*_N = sum p_k d*_k.
struct CommoditySample {
    std::vector<double> p, p_star, d, d_star;
    double c_n = 0.0;
    double c_n_star = 0.0;

    std::size_t size() const { return p.size(); }

    void finalize() {
        const std::size_t n = p.size();
        if (n == 0 || p_star.size() != n || d.size() != n || d_star.size() != n)
            throw DomainError("commodity sample arrays must be nonempty and aligned");
        c_n = 0.0;
        c_n_star = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!(p[k] > 0) || !(p_star[k] > 0) || !(d[k] > 0) || !(d_star[k] > 0))
                throw DomainError("commodity sample entries must be strictly positive");
            c_n += p_star[k] * d[k];
            c_n_star += p[k] * d_star[k];
        }
    }
};

/// Draws n independent quadruples; streams 0..3 cover p, p*, d, d*, so the
/// result is bit-identical for a fixed (spec, seed) regardless of evaluation
/// order.
inline CommoditySample sample_commodities(const ScenarioSpec& spec) {
    spec.validate();
    const rng::CounterRng rp(spec.rng_seed, 0), rps(spec.rng_seed, 1), rd(spec.rng_seed, 2),
        rds(spec.rng_seed, 3);
    CommoditySample s;
    const auto n = static_cast<std::size_t>(spec.n);
    s.p.resize(n);
    s.p_star.resize(n);
    s.d.resize(n);
    s.d_star.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.p[k] = spec.p.draw(rp, k);
        s.p_star[k] = spec.p_star.draw(rps, k);
        s.d[k] = spec.d.draw(rd, k);
        s.d_star[k] = spec.d_star.draw(rds, k);
    }
    s.finalize();
    return s;
}

/// Builds the step-function demand pair
///   D(x)  = (1/C_N)  sum p*_k d_k 1{p_k/p*_k > x}
///   D*(x) = (1/C*_N) sum p_k d*_k 1{p_k/p*_k < x}
/// keyed by the price ratios. Ties sit on neither side (strict inequalities).
inline MarketModel empirical_demands(const CommoditySample& s, double M = 100.0) {
    const std::size_t n = s.size();
    std::vector<double> ratios(n), w(n), v(n);
    for (std::size_t k = 0; k < n; ++k) {
        ratios[k] = s.p[k] / s.p_star[k];
        w[k] = s.p_star[k] * s.d[k];
        v[k] = s.p[k] * s.d_star[k];
    }
    auto pair = detail::PairedEmpirical::build(ratios, w, v);
    auto dom = DemandFunction::empirical_step(ratios, w, DemandRole::Domestic);
    auto fgn = DemandFunction::empirical_step(std::move(ratios), std::move(v), DemandRole::Foreign);
    return MarketModel(std::move(dom), std::move(fgn), M, false, std::move(pair));
}

struct GainStats {
    GainReport report;
    double se_domestic = 0.0;
    double se_foreign = 0.0;
};

/// Normalized indicator sums straight off the sample. A commodity is imported
/// by the domestic nation when p/p* > e/theta and by the foreign nation when
/// p/p* < theta* e; each nation's gain is normalized by its own constant.
inline GainReport expectation_gain(const CommoditySample& s, double e, TariffPair t,
                                   double M = 100.0) {
    if (!(e >= 1.0 / M && e <= M)) throw DomainError("rate outside [1/M, M]");
    if (!(t.theta >= 1.0 / M && t.theta <= 1.0) || !(t.theta_star >= 1.0 / M && t.theta_star <= 1.0))
        throw DomainError("tariff parameters must lie in [1/M, 1]");
    const double a = e / t.theta, c = t.theta_star * e;
    double dom = 0.0, fgn = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double r = s.p[k] / s.p_star[k];
        if (r > a) {
            dom += s.p[k] * s.d[k];
            fgn -= s.p_star[k] * s.d[k];
        }
        if (r < c) {
            dom -= s.p[k] * s.d_star[k];
            fgn += s.p_star[k] * s.d_star[k];
        }
    }
    GainReport rep;
    rep.method = GainMethod::ExpectationSum;
    rep.gain_domestic = dom / s.c_n;
    rep.gain_foreign = fgn / s.c_n_star;
    return rep;
}

/// expectation_gain plus ratio-estimator standard errors (delta method),
/// used to scale the quadrature-vs-expectation comparisons.
inline GainStats expectation_gain_stats(const CommoditySample& s, double e, TariffPair t,
                                        double M = 100.0) {
    GainStats out;
    out.report = expectation_gain(s, e, t, M);
    const double a = e / t.theta, c = t.theta_star * e;
    const std::size_t n = s.size();
    const double wbar = s.c_n / double(n), vbar = s.c_n_star / double(n);
    double ss_dom = 0.0, ss_fgn = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = s.p[k] / s.p_star[k];
        double tk = 0.0, uk = 0.0;
        if (r > a) {
            tk += s.p[k] * s.d[k];
            uk -= s.p_star[k] * s.d[k];
        }
        if (r < c) {
            tk -= s.p[k] * s.d_star[k];
            uk += s.p_star[k] * s.d_star[k];
        }
        const double id = (tk - out.report.gain_domestic * s.p_star[k] * s.d[k]) / wbar;
        const double ifn = (uk - out.report.gain_foreign * s.p[k] * s.d_star[k]) / vbar;
        ss_dom += id * id;
        ss_fgn += ifn * ifn;
    }
    out.se_domestic = std::sqrt(ss_dom / (double(n) - 1.0)) / std::sqrt(double(n));
    out.se_foreign = std::sqrt(ss_fgn / (double(n) - 1.0)) / std::sqrt(double(n));
    return out;
}

namespace detail {

// invert a monotone demand curve by bracketed bisection
inline double invert_decreasing(const DemandFunction& D, double q) {
    double hi = 1.0;
    while (D(hi) > q && hi < 1e12) hi *= 2.0;
    auto f = [&](double x) { return D(x) - q; };
    return bisect(f, 0.0, hi, f(0.0), 1e-13);
}
inline double invert_increasing(const DemandFunction& Ds, double q, double lo) {
    double hi = std::max(1.0, 2.0 * lo);
    while (Ds(hi) < q && hi < 1e12) hi *= 2.0;
    auto f = [&](double x) { return Ds(x) - q; };
    return bisect(f, lo, hi, f(lo), 1e-13);
}

}  // namespace detail

/// Commodity sample whose empirical demands converge to a given analytic
/// model. Two blocks: one carries the domestic curve (ratio law -D', unit
/// p*d), one the foreign curve (ratio law D*', unit p d*); each block's
/// opposite-side weight is a positive epsilon so all entries stay strictly
/// positive. For the growth family the foreign ratio law is cut at 1/M, the
/// same cutoff the gain quadrature uses, so both gain forms estimate the same
/// quantity.
inline CommoditySample matched_sample(const MarketModel& model, std::size_t n,
                                      std::uint64_t seed) {
    if (n < 2) throw DomainError("matched_sample needs n >= 2");
    if (model.empirical()) throw DomainError("matched_sample needs an analytic model");
    constexpr double kEps = 1e-12;
    const std::size_t n_dom = n / 2, n_fgn = n - n_dom;
    const rng::CounterRng ra(seed, 0), rb(seed, 1);

    CommoditySample s;
    s.p.reserve(n);
    s.p_star.reserve(n);
    s.d.reserve(n);
    s.d_star.reserve(n);

    for (std::size_t k = 0; k < n_dom; ++k) {
        // P(r > x) = D(x): r = D^{-1}(u)
        const double r = detail::invert_decreasing(model.domestic(), ra.uniform(k));
        s.p.push_back(std::max(r, 1e-300));
        s.p_star.push_back(1.0);
        s.d.push_back(1.0);
        s.d_star.push_back(kEps);
    }
    const bool cut = !detail::foreign_origin_integrable(model.foreign());
    const double u_min = cut ? 1.0 / model.box_bound() : 0.0;
    const double q0 = cut ? model.foreign()(u_min) : 0.0;
    for (std::size_t k = 0; k < n_fgn; ++k) {
        // P(r < x) = D*(x) (conditioned on r >= u_min when the law is cut)
        const double q = q0 + (1.0 - q0) * rb.uniform(k);
        const double r = detail::invert_increasing(model.foreign(), q, u_min);
        s.p.push_back(r);
        s.p_star.push_back(1.0);
        s.d.push_back(kEps);
        s.d_star.push_back(1.0 / r);  // p d* = 1 exactly
    }
    s.finalize();
    return s;
}

/// The single-law construction: p* = d = d* = 1 and the price ratio drawn so
/// that P(r > x) = (1 + x)^{-2}, making the empirical domestic demand an
/// unweighted survival estimate of the rational-square curve.
inline CommoditySample rational_square_ratio_sample(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw DomainError("sample needs n >= 1");
    const rng::CounterRng r(seed, 0);
    CommoditySample s;
    s.p.resize(n);
    s.p_star.assign(n, 1.0);
    s.d.assign(n, 1.0);
    s.d_star.assign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = r.uniform(k);
        s.p[k] = 1.0 / std::sqrt(u) - 1.0 + 1e-300;  // survival inverse of (1+x)^-2
    }
    s.finalize();
    return s;
}

/// Largest deviation between the empirical domestic demand of a sample and an
/// analytic domestic curve, probed on a log grid plus both sides of every
/// breakpoint.
inline double demand_sup_distance(const MarketModel& empirical, const DemandFunction& target,
                                  double x_lo = 1e-4, double x_hi = 1e4) {
    const auto& emp = empirical.domestic();
    double sup = 0.0;
    const int grid = 4096;
    for (int i = 0; i <= grid; ++i) {
        const double x = x_lo * std::pow(x_hi / x_lo, double(i) / grid);
        sup = std::max(sup, std::abs(emp(x) - target(x)));
    }
    for (double rk : emp.steps().ratios) {
        sup = std::max(sup, std::abs(emp(rk) - target(rk)));
        const double below = rk * (1.0 - 1e-12);
        sup = std::max(sup, std::abs(emp(below) - target(rk)));
    }
    return sup;
}

}  // namespace tariffgame
