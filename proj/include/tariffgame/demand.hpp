#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tariffgame/errors.hpp"
#include "tariffgame/rootfind.hpp"

namespace tariffgame {

/// Which side of the market a currency-demand function describes.
/// Domestic demand D is nonincreasing with D(0) = 1; foreign demand D* is
/// nondecreasing with D*(0) = 0 and values capped at 1.
enum class DemandRole { Domestic, Foreign };

namespace detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Step-function data for one empirical demand curve: sorted price ratios
/// with per-commodity value weights and their prefix sums.
struct StepFunction {
    std::vector<double> ratios;   // ascending
    std::vector<double> weights;  // aligned with ratios
    std::vector<double> prefix;   // prefix[i] = sum of weights[0..i-1]
    double total = 0.0;
    double bandwidth = 0.0;       // Silverman kernel bandwidth over the ratios

    // sum of weights at ratios <= x
    double mass_leq(double x) const {
        const auto it = std::upper_bound(ratios.begin(), ratios.end(), x);
        return prefix[static_cast<std::size_t>(it - ratios.begin())];
    }
    // sum of weights at ratios < x
    double mass_lt(double x) const {
        const auto it = std::lower_bound(ratios.begin(), ratios.end(), x);
        return prefix[static_cast<std::size_t>(it - ratios.begin())];
    }
};

using StepFunctionPtr = std::shared_ptr<const StepFunction>;

inline StepFunctionPtr make_step(std::vector<double> ratios, std::vector<double> weights) {
    if (ratios.empty() || ratios.size() != weights.size())
        throw DomainError("empirical step needs equally sized, nonempty breakpoint/weight arrays");
    const std::size_t n = ratios.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ratios[a] < ratios[b]; });

    auto s = std::make_shared<StepFunction>();
    s->ratios.resize(n);
    s->weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ratios[order[i]], w = weights[order[i]];
        if (!(r > 0) || !std::isfinite(r)) throw DomainError("breakpoints must be finite and positive");
        if (!(w > 0) || !std::isfinite(w)) throw DomainError("weights must be finite and positive");
        s->ratios[i] = r;
        s->weights[i] = w;
    }
    s->prefix.resize(n + 1);
    s->prefix[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) s->prefix[i + 1] = s->prefix[i] + s->weights[i];
    s->total = s->prefix[n];

    // Silverman rule on the weighted ratio distribution
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += s->weights[i] * s->ratios[i];
    mean /= s->total;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = s->ratios[i] - mean;
        var += s->weights[i] * d * d;
    }
    var /= s->total;
    const double sigma = std::sqrt(var);
    s->bandwidth = std::max(1.06 * sigma * std::pow(double(n), -0.2),
                            1e-12 * std::max(1.0, std::abs(mean)));
    return s;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

/// Commodity sample reduced to what the gain expectations need: shared sorted
/// ratios r = p/p* with both value weights w = p*d and v = p d*.
struct PairedEmpirical {
    std::vector<double> ratios;
    std::vector<double> w, v;
    std::vector<double> pw, pv, prw, pvr;  // prefix sums of w, v, r*w, v/r
    double wtot = 0.0, vtot = 0.0;

    static std::shared_ptr<const PairedEmpirical> build(const std::vector<double>& ratios,
                                                        const std::vector<double>& w,
                                                        const std::vector<double>& v) {
        const std::size_t n = ratios.size();
        if (n == 0 || w.size() != n || v.size() != n)
            throw DomainError("paired empirical data must be nonempty and aligned");
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return ratios[a] < ratios[b]; });
        auto p = std::make_shared<PairedEmpirical>();
        p->ratios.resize(n);
        p->w.resize(n);
        p->v.resize(n);
        p->pw.assign(n + 1, 0.0);
        p->pv.assign(n + 1, 0.0);
        p->prw.assign(n + 1, 0.0);
        p->pvr.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            p->ratios[i] = ratios[order[i]];
            p->w[i] = w[order[i]];
            p->v[i] = v[order[i]];
        }
        for (std::size_t i = 0; i < n; ++i) {
            p->pw[i + 1] = p->pw[i] + p->w[i];
            p->pv[i + 1] = p->pv[i] + p->v[i];
            p->prw[i + 1] = p->prw[i] + p->ratios[i] * p->w[i];
            p->pvr[i + 1] = p->pvr[i] + p->v[i] / p->ratios[i];
        }
        p->wtot = p->pw[n];
        p->vtot = p->pv[n];
        return p;
    }

    std::size_t idx_gt(double x) const {  // first index with ratio > x
        return static_cast<std::size_t>(
            std::upper_bound(ratios.begin(), ratios.end(), x) - ratios.begin());
    }
    std::size_t idx_geq(double x) const {  // first index with ratio >= x
        return static_cast<std::size_t>(
            std::lower_bound(ratios.begin(), ratios.end(), x) - ratios.begin());
    }
};

using PairedEmpiricalPtr = std::shared_ptr<const PairedEmpirical>;

}  // namespace detail

/// One currency-demand curve. Parametric families are exact formula
/// transcriptions; the empirical family is a weighted step function estimated
/// from commodity samples (see the montecarlo module).
///
/// A family has a natural monotonic orientation; using it in the opposite
/// role evaluates the formula at 1/x, which is how the symmetric market pairs
/// D(x) = D*(1/x) are formed.
class DemandFunction {
public:
    enum class Family { RationalSquare, ClippedLinear, Exponential, ClippedExpGrowth, EmpiricalStep };

    static DemandFunction rational_square(DemandRole role) {
        DemandFunction d(Family::RationalSquare, role);
        d.recip_ = (role == DemandRole::Foreign);
        return d;
    }
    static DemandFunction clipped_linear(double alpha, DemandRole role) {
        if (!(alpha > 0) || !(alpha < 1)) throw DomainError("clipped_linear needs 0 < alpha < 1");
        DemandFunction d(Family::ClippedLinear, role);
        d.p1_ = alpha;
        d.recip_ = (role == DemandRole::Foreign);
        d.kink_nat_ = 1.0 / alpha;
        return d;
    }
    static DemandFunction exponential(double delta, DemandRole role) {
        if (!(delta > 0)) throw DomainError("exponential needs delta > 0");
        DemandFunction d(Family::Exponential, role);
        d.p1_ = delta;
        d.recip_ = (role == DemandRole::Foreign);
        return d;
    }
    static DemandFunction clipped_exp_growth(double alpha, double beta, DemandRole role) {
        if (!(alpha > 0) || !(beta > 0)) throw DomainError("clipped_exp_growth needs alpha, beta > 0");
        DemandFunction d(Family::ClippedExpGrowth, role);
        d.p1_ = alpha;
        d.p2_ = beta;
        d.recip_ = (role == DemandRole::Domestic);  // natural orientation is increasing
        // clip point: alpha * x * exp(beta x) = 1
        double hi = 1.0;
        auto g = [&](double x) { return alpha * x * std::exp(beta * x) - 1.0; };
        while (g(hi) < 0) hi *= 2;
        d.kink_nat_ = detail::bisect(g, 0.0, hi, g(0.0), 1e-14);
        return d;
    }
    static DemandFunction empirical_step(std::vector<double> breakpoints, std::vector<double> weights,
                                         DemandRole role) {
        DemandFunction d(Family::EmpiricalStep, role);
        d.steps_ = detail::make_step(std::move(breakpoints), std::move(weights));
        return d;
    }
    static DemandFunction empirical_step(detail::StepFunctionPtr steps, DemandRole role) {
        DemandFunction d(Family::EmpiricalStep, role);
        d.steps_ = std::move(steps);
        return d;
    }

    Family family() const { return family_; }
    DemandRole role() const { return role_; }
    bool empirical() const { return family_ == Family::EmpiricalStep; }
    bool reciprocal_composed() const { return recip_; }
    bool smoothed() const { return smoothed_; }

    /// Kink location in this role's argument, if the family is clipped.
    std::optional<double> kink() const {
        if (std::isnan(kink_nat_)) return std::nullopt;
        return recip_ ? 1.0 / kink_nat_ : kink_nat_;
    }

    double param1() const { return p1_; }  // alpha or delta
    double param2() const { return p2_; }  // beta
    const detail::StepFunction& steps() const { return *steps_; }
    detail::StepFunctionPtr steps_ptr() const { return steps_; }

    /// Kernel-smoothed evaluation view (empirical only; identity otherwise).
    /// Derivative-based solvers use this so that values and derivatives come
    /// from the same differentiable curve.
    DemandFunction smoothed_view() const {
        DemandFunction d = *this;
        if (d.empirical()) d.smoothed_ = true;
        return d;
    }

    double operator()(double x) const {
        if (!(x >= 0)) throw DomainError("demand evaluated at negative or NaN argument");
        if (family_ == Family::EmpiricalStep) return step_value(x);
        return formula(recip_ ? 1.0 / x : x);
    }
    double value(double x) const { return (*this)(x); }

    /// First or second derivative. Parametric families are analytic; the
    /// empirical family differentiates its kernel-smoothed curve by central
    /// finite differences. Exactly at a clip kink a KinkError carrying both
    /// one-sided values is thrown.
    double derivative(double x, int order) const {
        if (order != 1 && order != 2) throw DomainError("derivative order must be 1 or 2");
        if (!(x >= 0)) throw DomainError("demand derivative at negative or NaN argument");
        if (family_ == Family::EmpiricalStep) return step_derivative(x, order);

        if (auto k = kink()) {
            if (x == *k || (recip_ && x > 0 && 1.0 / x == kink_nat_)) {
                const double loc = *k;
                double left, right;
                if (!recip_) {
                    left = (order == 1) ? d1_branch(kink_nat_, -1) : d2_branch(kink_nat_, -1);
                    right = (order == 1) ? d1_branch(kink_nat_, +1) : d2_branch(kink_nat_, +1);
                } else {
                    // x below the role-space kink maps to the post-clip branch in t = 1/x
                    left = chain(loc, order, +1);
                    right = chain(loc, order, -1);
                }
                throw KinkError(loc, left, right);
            }
        }
        if (recip_) {
            if (x == 0.0) return 0.0;  // all families flatten at the reciprocal origin
            return chain(x, order, 0);
        }
        return (order == 1) ? d1_branch(x, 0) : d2_branch(x, 0);
    }

private:
    DemandFunction(Family f, DemandRole r) : family_(f), role_(r) {}

    double formula(double t) const {
        switch (family_) {
            case Family::RationalSquare: {
                const double u = 1.0 + t;
                return 1.0 / (u * u);
            }
            case Family::ClippedLinear: {
                const double c = 1.0 - p1_ * t;
                return c > 0.0 ? c : 0.0;
            }
            case Family::Exponential:
                return std::exp(-p1_ * t);
            case Family::ClippedExpGrowth: {
                const double c = p1_ * t * std::exp(p2_ * t);
                return c < 1.0 ? c : 1.0;
            }
            default:
                return detail::kNaN;
        }
    }

    // branch: -1 pre-clip, +1 post-clip, 0 resolve by comparing with the kink
    double d1_branch(double t, int branch) const {
        switch (family_) {
            case Family::RationalSquare: {
                const double u = 1.0 + t;
                return -2.0 / (u * u * u);
            }
            case Family::ClippedLinear:
                if (branch == 0) branch = (t < kink_nat_) ? -1 : +1;
                return branch < 0 ? -p1_ : 0.0;
            case Family::Exponential:
                return -p1_ * std::exp(-p1_ * t);
            case Family::ClippedExpGrowth:
                if (branch == 0) branch = (t < kink_nat_) ? -1 : +1;
                return branch < 0 ? p1_ * (p2_ * t + 1.0) * std::exp(p2_ * t) : 0.0;
            default:
                return detail::kNaN;
        }
    }
    double d2_branch(double t, int branch) const {
        switch (family_) {
            case Family::RationalSquare: {
                const double u = 1.0 + t;
                return 6.0 / (u * u * u * u);
            }
            case Family::ClippedLinear:
                return 0.0;
            case Family::Exponential:
                return p1_ * p1_ * std::exp(-p1_ * t);
            case Family::ClippedExpGrowth:
                if (branch == 0) branch = (t < kink_nat_) ? -1 : +1;
                return branch < 0 ? p1_ * (p2_ * p2_ * t + 2.0 * p2_) * std::exp(p2_ * t) : 0.0;
            default:
                return detail::kNaN;
        }
    }

    // derivatives of t -> formula(1/t) via the chain rule
    double chain(double x, int order, int branch) const {
        const double t = 1.0 / x;
        const double d1 = d1_branch(t, branch);
        if (order == 1) return -d1 / (x * x);
        return d2_branch(t, branch) / (x * x * x * x) + 2.0 * d1 / (x * x * x);
    }

    double step_value(double x) const {
        return smoothed_ ? step_smoothed(x) : step_raw(x);
    }
    double step_raw(double x) const {
        const auto& s = *steps_;
        if (role_ == DemandRole::Domestic) return (s.total - s.mass_leq(x)) / s.total;
        return s.mass_lt(x) / s.total;
    }
    // Gaussian-kernel smoothing of the step indicator; contributions beyond
    // 10 bandwidths are taken at their saturated values.
    double step_smoothed(double x) const {
        const auto& s = *steps_;
        const double h = s.bandwidth;
        const double win = 10.0 * h;
        const std::size_t lo = static_cast<std::size_t>(
            std::lower_bound(s.ratios.begin(), s.ratios.end(), x - win) - s.ratios.begin());
        const std::size_t hi = static_cast<std::size_t>(
            std::upper_bound(s.ratios.begin(), s.ratios.end(), x + win) - s.ratios.begin());
        double acc = 0.0;
        if (role_ == DemandRole::Domestic) {
            acc = s.total - s.prefix[hi];  // ratios far above x count fully
            for (std::size_t i = lo; i < hi; ++i)
                acc += s.weights[i] * detail::normal_cdf((s.ratios[i] - x) / h);
        } else {
            acc = s.prefix[lo];  // ratios far below x count fully
            for (std::size_t i = lo; i < hi; ++i)
                acc += s.weights[i] * detail::normal_cdf((x - s.ratios[i]) / h);
        }
        return acc / s.total;
    }
    double step_derivative(double x, int order) const {
        auto smooth = [this](double t) {
            DemandFunction v = *this;
            v.smoothed_ = true;
            return v.step_smoothed(t);
        };
        if (order == 1) {
            const double h = std::max(1e-6, 1e-6 * x);
            return (smooth(x + h) - smooth(x - h)) / (2.0 * h);
        }
        // second differences need a wider step to stay above rounding noise
        const double h = std::max(1e-4, 1e-4 * x);
        return (smooth(x + h) - 2.0 * smooth(x) + smooth(x - h)) / (h * h);
    }

    Family family_;
    DemandRole role_;
    bool recip_ = false;
    bool smoothed_ = false;
    double p1_ = 0.0, p2_ = 0.0;
    double kink_nat_ = detail::kNaN;
    detail::StepFunctionPtr steps_;
};

struct MonotoneReport {
    bool pass = true;
    long first_violation = -1;  // grid index i with the wrong order between i and i+1
    double x_lo = 0, x_hi = 0, value_lo = 0, value_hi = 0;
};

/// Checks the role's monotonicity on a uniform grid over [0, upper].
inline MonotoneReport check_monotone(const DemandFunction& d, int grid_n, double upper = 100.0) {
    if (grid_n < 2) throw DomainError("check_monotone needs grid_n >= 2");
    MonotoneReport rep;
    double prev_x = 0.0, prev_v = d(0.0);
    for (int i = 1; i < grid_n; ++i) {
        const double x = upper * double(i) / double(grid_n - 1);
        const double v = d(x);
        const bool bad = (d.role() == DemandRole::Domestic) ? (v > prev_v) : (v < prev_v);
        if (bad) {
            rep.pass = false;
            rep.first_violation = i - 1;
            rep.x_lo = prev_x;
            rep.x_hi = x;
            rep.value_lo = prev_v;
            rep.value_hi = v;
            return rep;
        }
        prev_x = x;
        prev_v = v;
    }
    return rep;
}

/// A two-nation market: domestic demand D, foreign demand D*, and the box
/// bound M restricting rates to [1/M, M] and tariff parameters to [1/M, 1].
class MarketModel {
public:
    MarketModel(DemandFunction domestic, DemandFunction foreign, double truncation_bound_M = 100.0,
                std::optional<bool> symmetric = std::nullopt,
                detail::PairedEmpiricalPtr paired = nullptr)
        : dom_(std::move(domestic)), for_(std::move(foreign)), M_(truncation_bound_M),
          pair_(std::move(paired)) {
        if (dom_.role() != DemandRole::Domestic || for_.role() != DemandRole::Foreign)
            throw DomainError("market model needs a Domestic and a Foreign demand, in that order");
        if (!(M_ > 1.0)) throw DomainError("truncation bound M must exceed 1");
        symmetric_ = symmetric ? *symmetric : structurally_symmetric();
        if (symmetric_) verify_symmetry();
    }

    static MarketModel rational_square_symmetric(double M = 100.0) {
        return MarketModel(DemandFunction::rational_square(DemandRole::Domestic),
                           DemandFunction::rational_square(DemandRole::Foreign), M);
    }
    static MarketModel clipped_linear_symmetric(double alpha, double M = 100.0) {
        return MarketModel(DemandFunction::clipped_linear(alpha, DemandRole::Domestic),
                           DemandFunction::clipped_linear(alpha, DemandRole::Foreign), M);
    }
    static MarketModel exponential_symmetric(double delta, double M = 100.0) {
        return MarketModel(DemandFunction::exponential(delta, DemandRole::Domestic),
                           DemandFunction::exponential(delta, DemandRole::Foreign), M);
    }
    static MarketModel exponential_asymmetric(double alpha, double beta, double delta,
                                              double M = 100.0) {
        return MarketModel(DemandFunction::exponential(delta, DemandRole::Domestic),
                           DemandFunction::clipped_exp_growth(alpha, beta, DemandRole::Foreign), M);
    }

    const DemandFunction& domestic() const { return dom_; }
    const DemandFunction& foreign() const { return for_; }
    double box_bound() const { return M_; }
    bool symmetric() const { return symmetric_; }
    bool empirical() const { return dom_.empirical() && for_.empirical(); }
    const detail::PairedEmpirical* paired_sample() const { return pair_.get(); }

    MarketModel smoothed_view() const {
        MarketModel m = *this;
        m.dom_ = dom_.smoothed_view();
        m.for_ = for_.smoothed_view();
        return m;
    }
    /// The view derivative-based solvers operate on: kernel-smoothed for
    /// empirical models, the model itself otherwise.
    MarketModel solver_view() const { return empirical() ? smoothed_view() : *this; }

private:
    bool structurally_symmetric() const {
        if (dom_.empirical() || for_.empirical()) return false;
        return dom_.family() == for_.family() && dom_.param1() == for_.param1() &&
               dom_.param2() == for_.param2();
    }
    void verify_symmetry() const {
        const int n = 129;
        for (int i = 0; i < n; ++i) {
            const double x = M_ * std::pow(M_ * M_, double(i) / (n - 1) - 1.0);
            const double lhs = dom_(x);
            const double rhs = for_(1.0 / x);
            if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, std::abs(lhs)))
                throw DomainError("model marked symmetric but D(x) != D*(1/x) at x=" +
                                  std::to_string(x));
        }
    }

    DemandFunction dom_, for_;
    double M_;
    bool symmetric_ = false;
    detail::PairedEmpiricalPtr pair_;
};

}  // namespace tariffgame
