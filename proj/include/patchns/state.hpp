#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "patchns/constitutive.hpp"
#include "patchns/curve.hpp"
#include "patchns/levelset.hpp"
#include "patchns/particles.hpp"
#include "patchns/spectral.hpp"

namespace patchns {

/// Complete simulation state. The density lives on the particles as
/// f-values; the grid density is a same-side moving-least-squares
/// reconstruction refreshed once per step.
struct FluidState {
    double time = 0.0;
    VectorGrid u;
    ParticleCloud particles;
    InterfaceCurve curve;
    LevelSet levelset;
    ScalarGrid rho;  // reconstruction cache

    // Velocity ring for material derivatives (u at t - dt, t - 2dt).
    std::optional<VectorGrid> u_prev, u_prev2;
    double dt_prev = 0.0;

    std::shared_ptr<const ConstitutiveLaws> laws;

    int n() const { return u.n(); }
    double L() const { return u.L(); }
    double h() const { return u.x.h(); }
};

/// Same-side moving-least-squares density reconstruction: at each grid
/// point, a linear fit (Gaussian weights, radius 3h) of the f-values of
/// particles on the side indicated by sign(phi), then rho = f^{-1}(fit).
/// No cross-interface averaging and no clamping; an out-of-band value or
/// an empty stencil invalidates the run.
inline ScalarGrid density_on_grid(const ParticleCloud& cloud, const LevelSet& levelset,
                                  const ConstitutiveLaws& laws) {
    const int n = levelset.phi.n();
    const double L = levelset.phi.L();
    const double h = L / n;
    const double radius = 3.0 * h;
    const double radius2 = radius * radius;
    const double inv_w2 = 1.0 / (1.5 * h * 1.5 * h);

    ParticleBins bins;
    bins.build(cloud, n);

    ScalarGrid rho(n, L);
    bool failed = false;
    std::string fail_msg;

#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (failed) continue;
            const Vec2 xg{i * h, j * h};
            const std::int8_t want = levelset.phi(i, j) >= 0.0 ? +1 : -1;
            // Weighted normal equations for fval ~ c0 + c1 dx + c2 dy.
            double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0, swyy = 0;
            double sf = 0, sfx = 0, sfy = 0;
            for (int dj = -3; dj <= 3; ++dj)
                for (int di = -3; di <= 3; ++di) {
                    auto [begin, end] = bins.cell(i + di, j + dj);
                    for (const int* it = begin; it != end; ++it) {
                        int p = *it;
                        if (cloud.side[p] != want) continue;
                        double dx = periodic_delta(cloud.pos_x[p], xg.x, L);
                        double dy = periodic_delta(cloud.pos_y[p], xg.y, L);
                        double d2 = dx * dx + dy * dy;
                        if (d2 > radius2) continue;
                        double w = std::exp(-d2 * inv_w2);
                        sw += w;
                        swx += w * dx;
                        swy += w * dy;
                        swxx += w * dx * dx;
                        swxy += w * dx * dy;
                        swyy += w * dy * dy;
                        double f = cloud.fval[p];
                        sf += w * f;
                        sfx += w * f * dx;
                        sfy += w * f * dy;
                    }
                }
            double c0;
            if (sw == 0.0) {
#pragma omp critical
                {
                    failed = true;
                    fail_msg = "density_on_grid: empty same-side stencil (particle depletion)";
                }
                continue;
            }
            // Solve the 3x3 normal system; fall back to the weighted mean
            // when the fit is rank-deficient (isolated stencil).
            double a11 = sw, a12 = swx, a13 = swy;
            double a22 = swxx, a23 = swxy, a33 = swyy;
            double det = a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) +
                         a13 * (a12 * a23 - a22 * a13);
            double scale = sw * h * h;
            if (std::abs(det) > 1e-12 * scale * scale * sw) {
                double b1 = sf, b2 = sfx, b3 = sfy;
                c0 = (b1 * (a22 * a33 - a23 * a23) - a12 * (b2 * a33 - a23 * b3) +
                      a13 * (b2 * a23 - a22 * b3)) /
                     det;
            } else {
                c0 = sf / sw;
            }
            double r;
            try {
                r = laws.f_inverse(c0);
            } catch (const invalid_state&) {
#pragma omp critical
                {
                    failed = true;
                    fail_msg = "density_on_grid: reconstructed f-value outside admissible band";
                }
                continue;
            }
            rho(i, j) = r;
        }
    }
    if (failed) throw invalid_state(fail_msg);
    return rho;
}

/// Material derivative from three velocity snapshots at spacing dt:
/// centered time difference plus the dealiased advective term of the
/// middle snapshot. With only two snapshots the time difference is
/// one-sided (order drop flagged).
struct MaterialDerivative {
    VectorGrid value;
    bool one_sided = false;
};

/// Material derivative of an arbitrary field along a given advecting
/// velocity: centered (or one-sided) time difference of the three
/// snapshots plus the dealiased (advect . grad) term of the middle one.
inline MaterialDerivative material_derivative_field(const VectorGrid* prev,
                                                    const VectorGrid& curr,
                                                    const VectorGrid* next,
                                                    const VectorGrid& advect, double dt) {
    if (!prev && !next) throw std::invalid_argument("material_derivative: need >= 2 snapshots");
    MaterialDerivative out;
    VectorGrid dudt(curr.n(), curr.L());
    if (prev && next) {
        dudt = *next;
        dudt -= *prev;
        dudt *= 1.0 / (2.0 * dt);
    } else {
        const VectorGrid& a = prev ? *prev : curr;
        const VectorGrid& b = prev ? curr : *next;
        dudt = b;
        dudt -= a;
        dudt *= 1.0 / dt;
        out.one_sided = true;
    }
    MatrixGrid G = spectral::gradient_of(curr);
    VectorGrid adv(curr.n(), curr.L());
    adv.x = spectral::dealias23(pointwise(advect.x, G.xx) + pointwise(advect.y, G.xy));
    adv.y = spectral::dealias23(pointwise(advect.x, G.yx) + pointwise(advect.y, G.yy));
    dudt += adv;
    out.value = std::move(dudt);
    return out;
}

inline MaterialDerivative material_derivative(const VectorGrid* prev, const VectorGrid& curr,
                                              const VectorGrid* next, double dt) {
    return material_derivative_field(prev, curr, next, curr, dt);
}

}  // namespace patchns
