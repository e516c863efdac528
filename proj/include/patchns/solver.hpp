#pragma once

#include <cmath>
#include <functional>

#include "patchns/state.hpp"
#include "patchns/transport.hpp"

namespace patchns {

/// Time-step controls. The implicit core always carries the
/// constant-coefficient viscosity (mu_tilde, lambda(rho_tilde)); the
/// CFL machinery protects only the explicitly treated pieces.
struct StepConfig {
    double dt_fixed = 0.0;  // > 0 pins dt, otherwise CFL-adaptive
    double cfl = 0.4;
    double dt_max = 5e-3;
    bool dealias = true;
    /// Decay-study mode: velocity held fixed, transport static, f-value
    /// ODE driven by the pressure term alone (FSource::zero).
    bool freeze_velocity = false;
    /// Linear-in-time extrapolation of the stage velocities for the
    /// transport substeps (falls back to a frozen field when off).
    bool extrapolate_stages = true;
    /// Body force hook for manufactured-solution verification.
    std::function<VectorGrid(double)> body_force;

    void validate() const {
        if (dt_fixed < 0.0 || dt_max <= 0.0) throw std::invalid_argument("StepConfig: bad dt");
        if (cfl <= 0.0 || cfl > 0.9) throw std::invalid_argument("StepConfig: CFL must be in (0, 0.9]");
    }
};

namespace solver_detail {

inline ScalarGrid maybe_dealias(ScalarGrid g, bool dealias) {
    return dealias ? spectral::dealias23(g) : g;
}

/// Explicit (inviscid) acceleration: -(u . grad) u - grad(P - Pt)/rho
/// plus the optional body force per unit mass. Every viscous term is
/// handled by the implicit solve.
inline VectorGrid explicit_accel(const VectorGrid& u, const ScalarGrid& rho,
                                 const ConstitutiveLaws& laws, const StepConfig& cfg, double t) {
    const int n = u.n();
    const double L = u.L();
    MatrixGrid G = spectral::gradient_of(u);

    VectorGrid rhs(n, L);
    rhs.x = maybe_dealias(pointwise(u.x, G.xx) + pointwise(u.y, G.xy), cfg.dealias);
    rhs.y = maybe_dealias(pointwise(u.x, G.yx) + pointwise(u.y, G.yy), cfg.dealias);
    rhs *= -1.0;

    ScalarGrid p_dev(n, L);
    for (size_t k = 0; k < rho.size(); ++k) p_dev[k] = laws.P(rho[k]) - laws.P_tilde();
    VectorGrid grad_p = spectral::gradient(p_dev);
    VectorGrid force = cfg.body_force ? cfg.body_force(t) : VectorGrid(n, L);
    for (size_t k = 0; k < rhs.x.size(); ++k) {
        rhs.x[k] += (-grad_p.x[k] + force.x[k]) / rho[k];
        rhs.y[k] += (-grad_p.y[k] + force.y[k]) / rho[k];
    }
    return rhs;
}

/// Full viscous stress divergence L u = div(2 mu(rho) Du) +
/// grad(lambda(rho) div u) with pointwise coefficient products
/// (self-adjoint, negative semidefinite discretely).
inline VectorGrid viscous_apply(const VectorGrid& u, const ScalarGrid& mu,
                                const ScalarGrid& lam) {
    MatrixGrid G = spectral::gradient_of(u);
    const int n = u.n();
    const double L = u.L();
    MatrixGrid M(n, L);
    ScalarGrid dxy(n, L);
    for (size_t k = 0; k < dxy.size(); ++k) dxy[k] = 0.5 * (G.xy[k] + G.yx[k]);
    for (size_t k = 0; k < dxy.size(); ++k) {
        M.xx[k] = 2.0 * mu[k] * G.xx[k];
        M.xy[k] = 2.0 * mu[k] * dxy[k];
        M.yx[k] = M.xy[k];
        M.yy[k] = 2.0 * mu[k] * G.yy[k];
    }
    VectorGrid r = spectral::divergence(M);
    ScalarGrid divu = G.xx + G.yy;
    r += spectral::gradient(pointwise(lam, divu));
    return r;
}

inline double dot(const VectorGrid& a, const VectorGrid& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.x.size(); ++k) s += a.x[k] * b.x[k] + a.y[k] * b.y[k];
    return s;
}

/// Constant-coefficient inverse of [mass I + (1/2)(mu_t |k|^2 I + nu_t
/// k k^T)] per mode (the paper-split core), used as the preconditioner
/// of the variable-coefficient implicit solve. Nyquist wavenumbers are
/// treated as zero, matching the derivative operators.
inline VectorGrid precond_core(const VectorGrid& b, const ConstitutiveLaws& laws,
                               double mass) {
    const double mu_t = laws.mu_tilde();
    const double nu_t = mu_t + laws.lambda_tilde();
    Spectrum bx = fft_forward(b.x);
    Spectrum by = fft_forward(b.y);
    const double k0 = 2.0 * M_PI / b.L();
    const int n = b.n(), half = n / 2;
    const double c = 0.5;
    for (int jy = 0; jy < n; ++jy) {
        int my = bx.my(jy);
        double ky = (my == half || my == -half) ? 0.0 : k0 * my;
        for (int mx = 0; mx <= half; ++mx) {
            double kx = (mx == half) ? 0.0 : k0 * mx;
            double k2 = kx * kx + ky * ky;
            // (a I + g k k^T)^{-1} = (1/a)(I - g k k^T / (a + g k2))
            double a = mass + c * mu_t * k2;
            double g = c * nu_t;
            auto vx = bx.at(mx, jy), vy = by.at(mx, jy);
            auto kdotv = kx * vx + ky * vy;
            double fac = g / (a * (a + g * k2));
            bx.at(mx, jy) = vx / a - fac * kx * kdotv;
            by.at(mx, jy) = vy / a - fac * ky * kdotv;
        }
    }
    return {fft_backward(bx), fft_backward(by)};
}

/// Solve [rho/dt I - (1/2) L] v = b by preconditioned conjugate
/// gradients; the operator is SPD for mu > 0, lambda >= 0, rho > 0.
inline VectorGrid solve_viscous_cn(const VectorGrid& b, const ScalarGrid& rho,
                                   const ScalarGrid& mu, const ScalarGrid& lam,
                                   const ConstitutiveLaws& laws, double dt,
                                   const VectorGrid* warm_start = nullptr,
                                   int* iterations = nullptr) {
    const int n = b.n();
    const double L = b.L();
    auto apply = [&](const VectorGrid& v) {
        VectorGrid r = viscous_apply(v, mu, lam);
        r *= -0.5;
        for (size_t k = 0; k < r.x.size(); ++k) {
            r.x[k] += rho[k] / dt * v.x[k];
            r.y[k] += rho[k] / dt * v.y[k];
        }
        return r;
    };
    double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return VectorGrid(n, L);

    VectorGrid x = warm_start ? *warm_start : VectorGrid(n, L);
    VectorGrid r = b;
    if (warm_start) r -= apply(x);
    const double mass = laws.rho_tilde() / dt;
    VectorGrid z = precond_core(r, laws, mass);
    VectorGrid p = z;
    double rz = dot(r, z);
    for (int it = 0; it < 200; ++it) {
        if (iterations) *iterations = it;
        double rnorm = std::sqrt(dot(r, r));
        if (rnorm < 1e-10 * bnorm) break;
        VectorGrid Ap = apply(p);
        double alpha = rz / dot(p, Ap);
        for (size_t k = 0; k < x.x.size(); ++k) {
            x.x[k] += alpha * p.x[k];
            x.y[k] += alpha * p.y[k];
            r.x[k] -= alpha * Ap.x[k];
            r.y[k] -= alpha * Ap.y[k];
        }
        z = precond_core(r, laws, mass);
        double rz_new = dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (size_t k = 0; k < p.x.size(); ++k) {
            p.x[k] = z.x[k] + beta * p.x[k];
            p.y[k] = z.y[k] + beta * p.y[k];
        }
    }
    if (!x.finite()) throw invalid_state("solve_viscous_cn: non-finite solution");
    return x;
}

}  // namespace solver_detail

/// Largest stable dt: advective CFL, acoustic CFL for the explicit
/// pressure gradient, a viscosity-deviation bound of the form
/// rho_min h^2 over the coefficient fluctuation (conservative now that
/// the full stress is implicit), and the configured cap.
inline double cfl_dt(const FluidState& state, const StepConfig& cfg) {
    const ConstitutiveLaws& laws = *state.laws;
    const double h = state.h();
    double umax = state.u.max_norm();
    double dmu = 0.0, dlam = 0.0, rho_min = laws.band_hi(), cs2 = 0.0;
    for (size_t k = 0; k < state.rho.size(); ++k) {
        double r = state.rho[k];
        dmu = std::max(dmu, std::abs(laws.mu(r) - laws.mu_tilde()));
        dlam = std::max(dlam, std::abs(laws.lambda(r) - laws.lambda_tilde()));
        rho_min = std::min(rho_min, r);
        cs2 = std::max(cs2, laws.Pp(r));
    }
    double dt = cfg.dt_max;
    if (umax > 0.0) dt = std::min(dt, cfg.cfl * h / umax);
    if (cs2 > 0.0) dt = std::min(dt, cfg.cfl * h / std::sqrt(cs2));
    double visc = 2.0 * dmu + dlam;
    if (visc > 0.0) dt = std::min(dt, cfg.cfl * rho_min * h * h / (2.0 * visc));
    return dt;
}

/// One semi-implicit velocity update over [t, t + dt]: Crank-Nicolson
/// on the full variable-coefficient viscous stress (solved by CG with
/// the constant-coefficient split as the preconditioner), Heun on the
/// inviscid terms with the corrector re-evaluating them at the newly
/// reconstructed density.
inline VectorGrid velocity_step(const VectorGrid& u, const ScalarGrid& rho_old,
                                const ScalarGrid& rho_new, const ConstitutiveLaws& laws,
                                const StepConfig& cfg, double t, double dt) {
    using namespace solver_detail;
    const int n = u.n();
    const double L = u.L();

    // Coefficients at the step midpoint; the mass weight is the same
    // density so the CN system stays symmetric positive definite.
    ScalarGrid rho_mid(n, L), mu_mid(n, L), lam_mid(n, L);
    for (size_t k = 0; k < rho_mid.size(); ++k) {
        double r = 0.5 * (rho_old[k] + rho_new[k]);
        rho_mid[k] = r;
        mu_mid[k] = laws.mu(r);
        lam_mid[k] = laws.lambda(r);
    }

    VectorGrid Lu = viscous_apply(u, mu_mid, lam_mid);
    VectorGrid accel0 = explicit_accel(u, rho_old, laws, cfg, t);

    // Predictor: Euler in the explicit terms.
    VectorGrid rhs1(n, L);
    for (size_t k = 0; k < rhs1.x.size(); ++k) {
        rhs1.x[k] = rho_mid[k] * (u.x[k] / dt + accel0.x[k]) + 0.5 * Lu.x[k];
        rhs1.y[k] = rho_mid[k] * (u.y[k] / dt + accel0.y[k]) + 0.5 * Lu.y[k];
    }
    VectorGrid u_pred = solve_viscous_cn(rhs1, rho_mid, mu_mid, lam_mid, laws, dt, &u);

    // Corrector: trapezoidal explicit terms at the new density.
    VectorGrid accel1 = explicit_accel(u_pred, rho_new, laws, cfg, t + dt);
    VectorGrid rhs2(n, L);
    for (size_t k = 0; k < rhs2.x.size(); ++k) {
        double ax = 0.5 * (accel0.x[k] + accel1.x[k]);
        double ay = 0.5 * (accel0.y[k] + accel1.y[k]);
        rhs2.x[k] = rho_mid[k] * (u.x[k] / dt + ax) + 0.5 * Lu.x[k];
        rhs2.y[k] = rho_mid[k] * (u.y[k] / dt + ay) + 0.5 * Lu.y[k];
    }
    VectorGrid u_next = solve_viscous_cn(rhs2, rho_mid, mu_mid, lam_mid, laws, dt, &u_pred);
    if (!u_next.finite()) throw invalid_state("velocity_step: non-finite velocity");
    return u_next;
}

/// Advance the whole state by one step. Ordering: transport (particles,
/// markers, level set) on the current velocity, density reconstruction,
/// then the velocity update against old and new density.
inline double full_step(FluidState& state, const StepConfig& cfg) {
    cfg.validate();
    const ConstitutiveLaws& laws = *state.laws;
    double dt = cfg.dt_fixed > 0.0 ? std::min(cfg.dt_fixed, cfg.dt_max) : cfl_dt(state, cfg);
    if (!(dt > 0.0)) throw invalid_state("full_step: non-positive dt");

    StageFields stages =
        (cfg.freeze_velocity || !cfg.extrapolate_stages)
            ? StageFields::frozen(state.u)
            : StageFields::build(state.u, state.u_prev ? &*state.u_prev : nullptr, dt,
                                 state.dt_prev);

    FSource source = cfg.freeze_velocity ? FSource::zero : FSource::direct;
    advance_particles(state.particles, stages, laws, dt, source);
    state.curve = advect_markers(state.curve, stages, dt);
    state.levelset = advect_levelset(state.levelset, stages, dt);

    ScalarGrid rho_new = density_on_grid(state.particles, state.levelset, laws);

    if (!cfg.freeze_velocity) {
        VectorGrid u_next = velocity_step(state.u, state.rho, rho_new, laws, cfg, state.time, dt);
        state.u_prev2 = std::move(state.u_prev);
        state.u_prev = state.u;
        state.u = std::move(u_next);
    }
    state.rho = std::move(rho_new);
    state.dt_prev = dt;
    state.time += dt;
    return dt;
}

}  // namespace patchns
