#pragma once

#include <cmath>

#include "patchns/grid.hpp"
#include "patchns/interp.hpp"

namespace patchns {

/// Level-set companion of the interface: D(t) = { phi > 0 }. phi is
/// transported semi-Lagrangianly and is the authority for side
/// classification; the marker curve is the authority for jump probing.
struct LevelSet {
    ScalarGrid phi;

    LevelSet() = default;
    explicit LevelSet(ScalarGrid p) : phi(std::move(p)) {}

    double value(const Vec2& p) const { return interp::bicubic(phi, p); }
    int side(const Vec2& p) const { return value(p) >= 0.0 ? +1 : -1; }
};

/// 4th-order centered finite-difference gradient. Used for level-set
/// geometry: phi may have a cone at the patch center, which spectral
/// differentiation would smear globally while local stencils keep the
/// error near the cone.
inline VectorGrid fd4_gradient(const ScalarGrid& f) {
    const int n = f.n();
    const int mask = n - 1;
    const double c = 1.0 / (12.0 * f.h());
    VectorGrid g(n, f.L());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            g.x(i, j) = c * (-f((i + 2) & mask, j) + 8.0 * f((i + 1) & mask, j) -
                             8.0 * f((i - 1) & mask, j) + f((i - 2) & mask, j));
            g.y(i, j) = c * (-f(i, (j + 2) & mask) + 8.0 * f(i, (j + 1) & mask) -
                             8.0 * f(i, (j - 1) & mask) + f(i, (j - 2) & mask));
        }
    return g;
}

/// Signed distance proxy |phi| / |grad phi| (clamped gradient floor).
inline double distance_proxy(const LevelSet& ls, const VectorGrid& grad_phi, const Vec2& p) {
    double g = interp::bicubic(grad_phi, p).norm();
    return std::abs(ls.value(p)) / std::max(g, 1e-12);
}

}  // namespace patchns
