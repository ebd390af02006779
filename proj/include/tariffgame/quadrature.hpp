#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

#include "tariffgame/errors.hpp"

namespace tariffgame::detail {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive Gauss-Kronrod integration; b may be +infinity. Targets 1e-10
/// absolute accuracy on the gain integrands.
template <typename F>
QuadResult integrate(F&& f, double a, double b) {
    if (!(b > a)) return {};
    using boost::math::quadrature::gauss_kronrod;
    QuadResult r;
    r.value = gauss_kronrod<double, 15>::integrate(f, a, b, 17, 1e-12, &r.error);
    if (!std::isfinite(r.value) || r.error > 1e-8)
        throw IntegrationError("quadrature did not converge on [" + std::to_string(a) + ", " +
                               std::to_string(b) + "]");
    return r;
}

}  // namespace tariffgame::detail
