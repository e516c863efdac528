#pragma once

#include <cmath>
#include <string>

#include "patchns/constitutive.hpp"
#include "patchns/curve.hpp"
#include "patchns/interp.hpp"
#include "patchns/levelset.hpp"
#include "patchns/particles.hpp"
#include "patchns/spectral.hpp"

namespace patchns {

/// Velocity fields for the Runge-Kutta stages of one step: linear
/// extrapolation in time from (u^{n-1}, u^n) at t, t + dt/2 and t + dt.
/// Without a previous snapshot the field is frozen over the step.
struct StageFields {
    VectorGrid u0, u_half, u_one;
    ScalarGrid div0, div_half, div_one;

    static StageFields build(const VectorGrid& u, const VectorGrid* u_prev, double dt,
                             double dt_prev) {
        StageFields s;
        s.u0 = u;
        if (u_prev && dt_prev > 0.0) {
            double r_half = 0.5 * dt / dt_prev;
            double r_one = dt / dt_prev;
            s.u_half = extrapolate(u, *u_prev, r_half);
            s.u_one = extrapolate(u, *u_prev, r_one);
        } else {
            s.u_half = u;
            s.u_one = u;
        }
        s.div0 = spectral::divergence(s.u0);
        s.div_half = spectral::divergence(s.u_half);
        s.div_one = spectral::divergence(s.u_one);
        return s;
    }

    static StageFields frozen(const VectorGrid& u) {
        StageFields s;
        s.u0 = u;
        s.u_half = u;
        s.u_one = u;
        s.div0 = spectral::divergence(u);
        s.div_half = s.div0;
        s.div_one = s.div0;
        return s;
    }

  private:
    static VectorGrid extrapolate(const VectorGrid& u, const VectorGrid& up, double r) {
        VectorGrid v = u;
        for (size_t k = 0; k < v.x.size(); ++k) {
            v.x[k] += r * (u.x[k] - up.x[k]);
            v.y[k] += r * (u.y[k] - up.y[k]);
        }
        return v;
    }
};

namespace detail {

inline void check_courant(const StageFields& s, double dt, double h) {
    double umax = s.u0.max_norm();
    if (umax * dt > 2.0 * h)
        throw std::invalid_argument("advection: dt violates the Courant bound");
}

/// Classical RK4 position update on the stage fields.
inline Vec2 rk4_position(const StageFields& s, const Vec2& x, double dt, double L) {
    Vec2 k1 = interp::bicubic(s.u0, x);
    Vec2 k2 = interp::bicubic(s.u_half, wrap(x + (0.5 * dt) * k1, L));
    Vec2 k3 = interp::bicubic(s.u_half, wrap(x + (0.5 * dt) * k2, L));
    Vec2 k4 = interp::bicubic(s.u_one, wrap(x + dt * k3, L));
    return wrap(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), L);
}

}  // namespace detail

/// Advance the marker polyline by RK4 on the interpolated velocity;
/// reparameterizes when adjacent spacing degrades past ratio 3.
inline InterfaceCurve advect_markers(const InterfaceCurve& curve, const StageFields& stages,
                                     double dt) {
    detail::check_courant(stages, dt, stages.u0.x.h());
    InterfaceCurve out = curve;
    for (int i = 0; i < curve.size(); ++i)
        out.pos[i] = detail::rk4_position(stages, curve.pos[i], dt, curve.L);
    if (out.spacing_ratio() > 3.0) out = reparameterize(out);
    return out;
}

/// Semi-Lagrangian update: phi'(x) = phi(backtrace(x)), RK4 backtrace
/// through the stage fields, bicubic evaluation at the foot.
inline LevelSet advect_levelset(const LevelSet& ls, const StageFields& stages, double dt) {
    const int n = ls.phi.n();
    const double L = ls.phi.L();
    detail::check_courant(stages, dt, ls.phi.h());
    ScalarGrid next(n, L);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            Vec2 x = ls.phi.point(i, j);
            Vec2 k1 = interp::bicubic(stages.u_one, x);
            Vec2 k2 = interp::bicubic(stages.u_half, wrap(x - (0.5 * dt) * k1, L));
            Vec2 k3 = interp::bicubic(stages.u_half, wrap(x - (0.5 * dt) * k2, L));
            Vec2 k4 = interp::bicubic(stages.u0, wrap(x - dt * k3, L));
            Vec2 foot = wrap(x - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), L);
            next(i, j) = interp::bicubic(ls.phi, foot);
        }
    return LevelSet(std::move(next));
}

/// Source mode for the carried f-value ODE along trajectories
///   d fval / dt = -(P(rho_p) - Pt) - F.
enum class FSource {
    /// F assembled at the particle from its carried density and the
    /// interpolated div u; the pressure deviation cancels exactly and
    /// the ODE reduces to d fval/dt = -(2 mu + lambda)(rho_p) div u.
    direct,
    /// F suppressed: pure pressure damping d fval/dt = -(P(rho_p) - Pt).
    zero
};

/// One transport step for the whole cloud: RK4 positions, RK4 on log J
/// (dJ/dt = J div u keeps J positive by construction), RK2 midpoint for
/// the f-value. Per-particle work is independent.
inline void advance_particles(ParticleCloud& cloud, const StageFields& stages,
                              const ConstitutiveLaws& laws, double dt, FSource source) {
    const double L = cloud.L;
    const double Pt = laws.P_tilde();
    const int m = cloud.count();
    bool failed = false;
    std::string fail_msg;

#pragma omp parallel for schedule(static)
    for (int p = 0; p < m; ++p) {
        try {
            Vec2 x{cloud.pos_x[p], cloud.pos_y[p]};
            Vec2 k1 = interp::bicubic(stages.u0, x);
            double d1 = interp::bicubic(stages.div0, x);
            Vec2 x2 = wrap(x + (0.5 * dt) * k1, L);
            Vec2 k2 = interp::bicubic(stages.u_half, x2);
            double d2 = interp::bicubic(stages.div_half, x2);
            Vec2 x3 = wrap(x + (0.5 * dt) * k2, L);
            Vec2 k3 = interp::bicubic(stages.u_half, x3);
            double d3 = interp::bicubic(stages.div_half, x3);
            Vec2 x4 = wrap(x + dt * k3, L);
            Vec2 k4 = interp::bicubic(stages.u_one, x4);
            double d4 = interp::bicubic(stages.div_one, x4);

            Vec2 xn = wrap(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), L);
            double dlogJ = (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);

            double f0 = cloud.fval[p];
            double rho_p = cloud.rho[p];
            double rhs1, rhs2;
            if (source == FSource::direct) {
                rhs1 = -(2.0 * laws.mu(rho_p) + laws.lambda(rho_p)) * d1;
                double f_half = f0 + 0.5 * dt * rhs1;
                double rho_h = laws.f_inverse(f_half, rho_p);
                rhs2 = -(2.0 * laws.mu(rho_h) + laws.lambda(rho_h)) * d2;
            } else {
                rhs1 = -(laws.P(rho_p) - Pt);
                double f_half = f0 + 0.5 * dt * rhs1;
                double rho_h = laws.f_inverse(f_half, rho_p);
                rhs2 = -(laws.P(rho_h) - Pt);
            }
            double f1 = f0 + dt * rhs2;

            cloud.pos_x[p] = xn.x;
            cloud.pos_y[p] = xn.y;
            cloud.jac[p] *= std::exp(dlogJ);
            cloud.fval[p] = f1;
            cloud.rho[p] = laws.f_inverse(f1, rho_p);
            if (!std::isfinite(cloud.jac[p]) || !std::isfinite(f1))
                throw invalid_state("particle update produced non-finite state");
        } catch (const std::exception& e) {
#pragma omp critical
            {
                failed = true;
                fail_msg = e.what();
            }
        }
    }
    if (failed) throw invalid_state(std::string("advance_particles: ") + fail_msg);
}

/// Fraction of particles whose level-set side disagrees with their
/// conserved label (advection-consistency monitor).
inline double side_mismatch_fraction(const ParticleCloud& cloud, const LevelSet& ls,
                                     int stride = 7) {
    int checked = 0, bad = 0;
    for (int p = 0; p < cloud.count(); p += stride) {
        ++checked;
        double v = ls.value({cloud.pos_x[p], cloud.pos_y[p]});
        int s = v >= 0.0 ? +1 : -1;
        if (s != cloud.side[p]) ++bad;
    }
    return checked ? double(bad) / checked : 0.0;
}

}  // namespace patchns
