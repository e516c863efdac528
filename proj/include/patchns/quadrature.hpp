#pragma once

#include <cmath>
#include <stdexcept>

namespace patchns {
namespace quad {

namespace detail {

template <class F>
double simpson(F&& f, double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_rec(F&& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(f, a, m, fa, flm, fm);
    double right = simpson(f, m, b, fm, frm, fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction. rel_tol is
/// applied against a running magnitude estimate, with an absolute floor
/// for integrals that vanish.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-12) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = detail::simpson(f, a, b, fa, fm, fb);
    double scale = std::max(std::abs(whole), 1e-30);
    return detail::adaptive_rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 48);
}

}  // namespace quad
}  // namespace patchns
