#pragma once

#include <cmath>
#include <functional>
#include <limits>

namespace tariffgame::detail {

// Bisection on a bracket with f(lo)*f(hi) < 0. Narrows until the bracket
// width is below tol_x (absolute) or floating-point resolution is hit.
template <typename F>
double bisect(F&& f, double lo, double hi, double f_lo, double tol_x, int max_iter = 200) {
    if (f_lo == 0.0) return lo;
    for (int i = 0; i < max_iter && (hi - lo) > tol_x; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // resolution limit
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((f_lo > 0) == (fm > 0)) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Golden-section maximization on [a, b]; returns the abscissa once the
// interval is narrower than tol_x. Assumes f is unimodal on the bracket.
template <typename F>
double golden_max(F&& f, double a, double b, double tol_x, int max_iter = 200) {
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > tol_x; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

inline bool finite(double x) { return std::isfinite(x); }

}  // namespace tariffgame::detail
