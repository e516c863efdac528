#pragma once

#include <cmath>

#include "patchns/grid.hpp"

namespace patchns {
namespace interp {

// Periodic bicubic interpolation (Catmull-Rom kernel). Reproduces cubic
// polynomials exactly on the stencil, so smooth fields converge at
// O(h^4) and bilinear fields are interpolated exactly.

namespace detail {

inline void cr_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

}  // namespace detail

inline double bicubic(const ScalarGrid& f, double x, double y) {
    const int n = f.n();
    const int mask = n - 1;
    const double invh = double(n) / f.L();
    double gx = x * invh, gy = y * invh;
    // Callers may hand in coordinates slightly outside [0, L); floor and
    // mask wrapping keeps the stencil periodic either way.
    double fx = std::floor(gx), fy = std::floor(gy);
    int i0 = int(fx), j0 = int(fy);
    double tx = gx - fx, ty = gy - fy;
    double wx[4], wy[4];
    detail::cr_weights(tx, wx);
    detail::cr_weights(ty, wy);

    const double* data = f.data();
    double acc = 0.0;
    for (int dj = -1; dj <= 2; ++dj) {
        const double* row = data + size_t((j0 + dj) & mask) * n;
        double r = wx[0] * row[(i0 - 1) & mask] + wx[1] * row[i0 & mask] +
                   wx[2] * row[(i0 + 1) & mask] + wx[3] * row[(i0 + 2) & mask];
        acc += wy[dj + 1] * r;
    }
    return acc;
}

inline double bicubic(const ScalarGrid& f, const Vec2& p) { return bicubic(f, p.x, p.y); }

inline Vec2 bicubic(const VectorGrid& v, const Vec2& p) {
    return {bicubic(v.x, p.x, p.y), bicubic(v.y, p.x, p.y)};
}

}  // namespace interp
}  // namespace patchns
