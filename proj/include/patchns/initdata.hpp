#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "patchns/norms.hpp"
#include "patchns/solver.hpp"
#include "patchns/state.hpp"

namespace patchns {

/// C-infinity bump, equal to 1 at r = 0 and supported in r < 1.
inline double bump(double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

inline double bump_deriv(double r) {
    if (r >= 1.0) return 0.0;
    double q = 1.0 - r * r;
    return bump(r) * (-2.0 * r / (q * q));
}

/// Smooth ramp: 1 for t <= 0, 0 for t >= 1.
inline double smooth_ramp(double t) {
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    auto b = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    return b(1.0 - t) / (b(1.0 - t) + b(t));
}

/// Density patch: shape boundary given in polar form around the center
/// (circle / ellipse / star harmonics), alpha-Hölder one-sided profiles
/// with optional cusp, far field relaxing to rho_tilde.
struct PatchSpec {
    enum class Shape { circle, ellipse, star };
    Shape shape = Shape::circle;
    Vec2 center{0.0, 0.0};
    double radius = 0.5;
    double ellipse_ratio = 1.0;  // major/minor axis ratio
    std::vector<int> star_modes;
    std::vector<double> star_amps;
    std::vector<double> star_phases;

    double rho_in = 1.1;
    double rho_out = 1.0;  // base value just outside; relaxes to rho_tilde
    double cusp_amp_in = 0.0;
    double cusp_amp_out = 0.0;
    Vec2 cusp_anchor{0.0, 0.0};  // offset from the center
    double alpha = 0.5;

    double boundary_radius(double theta) const {
        switch (shape) {
            case Shape::circle:
                return radius;
            case Shape::ellipse: {
                double a = radius, b = radius / ellipse_ratio;
                double c = std::cos(theta), s = std::sin(theta);
                return a * b / std::sqrt(b * b * c * c + a * a * s * s);
            }
            case Shape::star: {
                double r = 1.0;
                for (size_t k = 0; k < star_modes.size(); ++k)
                    r += star_amps[k] *
                         std::cos(star_modes[k] * theta +
                                  (k < star_phases.size() ? star_phases[k] : 0.0));
                return radius * r;
            }
        }
        return radius;
    }

    /// Signed shape function, positive inside: R(theta)^2 - |x - c|^2.
    double signed_shape(const Vec2& x, double L) const {
        Vec2 d = periodic_delta(x, center, L);
        double r2 = d.norm2();
        double theta = std::atan2(d.y, d.x);
        double R = boundary_radius(theta);
        return R * R - r2;
    }

    double density(const Vec2& x, double rho_tilde, double L) const {
        Vec2 d = periodic_delta(x, center, L);
        double r = d.norm();
        double theta = std::atan2(d.y, d.x);
        double R = boundary_radius(theta);
        Vec2 anchor_d = periodic_delta(x, center + cusp_anchor, L);
        double cusp = std::pow(anchor_d.norm(), alpha);
        if (r <= R) return rho_in + cusp_amp_in * cusp;
        // Outside: relax toward the far-field state between L/8 and L/4
        // from the patch boundary.
        double dist = r - R;
        double taper = smooth_ramp((dist - L / 8.0) / (L / 8.0));
        return rho_tilde + (rho_out - rho_tilde + cusp_amp_out * cusp) * taper;
    }
};

/// Target initial velocity: a solenoidal part from a bump stream
/// function plus a potential part, both compactly supported.
struct InitialVelocitySpec {
    Vec2 center{0.0, 0.0};
    double stream_amp = 0.0;
    double stream_radius = 1.0;
    double potential_amp = 0.0;
    double potential_radius = 1.0;
    double delta = 0.1;  // mollifier width

    Vec2 velocity(const Vec2& x, double L) const {
        Vec2 v{0.0, 0.0};
        Vec2 d = periodic_delta(x, center, L);
        double r = d.norm();
        if (r > 1e-14) {
            Vec2 rhat = d * (1.0 / r);
            if (stream_amp != 0.0 && r < stream_radius) {
                // grad-perp of psi(r): magnitude psi'(r), direction rhat-perp
                double dpsi = stream_amp * bump_deriv(r / stream_radius) / stream_radius;
                v += dpsi * Vec2{-rhat.y, rhat.x};
            }
            if (potential_amp != 0.0 && r < potential_radius) {
                double dchi = potential_amp * bump_deriv(r / potential_radius) / potential_radius;
                v += dchi * rhat;
            }
        }
        return v;
    }
};

/// Result of the regularized elliptic solve for the compatible initial
/// velocity.
struct InitialVelocitySolve {
    VectorGrid u;
    double c_delta = 0.0;
    double residual = 0.0;  // relative L2 residual of the discrete system
    int iterations = 0;
    bool converged = false;
    bool stagnated = false;
};

namespace initdetail {

/// Discrete elliptic operator -div(2 mu0 Du) - grad(lambda0 div u) + cd u.
inline VectorGrid elliptic_apply(const VectorGrid& u, const ScalarGrid& mu0,
                                 const ScalarGrid& lam0, double cd) {
    MatrixGrid G = spectral::gradient_of(u);
    MatrixGrid M(u.n(), u.L());
    ScalarGrid dxy(u.n(), u.L());
    for (size_t k = 0; k < dxy.size(); ++k) dxy[k] = 0.5 * (G.xy[k] + G.yx[k]);
    for (size_t k = 0; k < dxy.size(); ++k) {
        M.xx[k] = 2.0 * mu0[k] * G.xx[k];
        M.xy[k] = 2.0 * mu0[k] * dxy[k];
        M.yx[k] = M.xy[k];
        M.yy[k] = 2.0 * mu0[k] * G.yy[k];
    }
    VectorGrid r = spectral::divergence(M);
    ScalarGrid divu = G.xx + G.yy;
    r += spectral::gradient(pointwise(lam0, divu));
    r *= -1.0;
    for (size_t k = 0; k < r.x.size(); ++k) {
        r.x[k] += cd * u.x[k];
        r.y[k] += cd * u.y[k];
    }
    return r;
}

/// Constant-coefficient inverse (the preconditioner), exact per mode.
/// Nyquist wavenumbers are treated as zero, matching the convention of
/// the odd-derivative operators inside elliptic_apply; otherwise those
/// modes poison the preconditioned spectrum.
inline VectorGrid elliptic_precond(const VectorGrid& b, double mu_t, double lam_t, double cd) {
    Spectrum bx = fft_forward(b.x);
    Spectrum by = fft_forward(b.y);
    const double k0 = 2.0 * M_PI / b.L();
    const int n = b.n(), half = n / 2;
    for (int jy = 0; jy < n; ++jy) {
        int my = bx.my(jy);
        double ky = (my == half || my == -half) ? 0.0 : k0 * my;
        for (int mx = 0; mx <= half; ++mx) {
            double kx = (mx == half) ? 0.0 : k0 * mx;
            double k2 = kx * kx + ky * ky;
            double a = mu_t * k2 + cd;
            double g = mu_t + lam_t;
            if (a == 0.0) {  // cd = 0 and k = 0: project out the mean
                bx.at(mx, jy) = 0.0;
                by.at(mx, jy) = 0.0;
                continue;
            }
            auto vx = bx.at(mx, jy), vy = by.at(mx, jy);
            auto kdotv = kx * vx + ky * vy;
            double fac = g / (a * (a + g * k2));
            bx.at(mx, jy) = vx / a - fac * kx * kdotv;
            by.at(mx, jy) = vy / a - fac * ky * kdotv;
        }
    }
    return {fft_backward(bx), fft_backward(by)};
}

inline double dot(const VectorGrid& a, const VectorGrid& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.x.size(); ++k) s += a.x[k] * b.x[k] + a.y[k] * b.y[k];
    return s;
}

/// Periodic convolution against a grid-sampled kernel of unit mass.
inline ScalarGrid convolve(const ScalarGrid& f, const Spectrum& kernel_hat, double h2) {
    Spectrum fh = fft_forward(f);
    for (size_t k = 0; k < fh.c.size(); ++k) fh.c[k] *= kernel_hat.c[k] * h2;
    return fft_backward(fh);
}

}  // namespace initdetail

/// Assemble the initial stress Pi0 = 2 mu(rho0) D u0 + (lambda(rho0)
/// div u0 - P(rho0) + Pt) I from the target velocity and density.
inline MatrixGrid initial_stress(const ScalarGrid& rho0, const VectorGrid& u0,
                                 const ConstitutiveLaws& laws) {
    MatrixGrid G = spectral::gradient_of(u0);
    MatrixGrid Pi(rho0.n(), rho0.L());
    for (size_t k = 0; k < rho0.size(); ++k) {
        double mu = laws.mu(rho0[k]);
        double lam = laws.lambda(rho0[k]);
        double divu = G.xx[k] + G.yy[k];
        double iso = lam * divu - (laws.P(rho0[k]) - laws.P_tilde());
        double dxy = 0.5 * (G.xy[k] + G.yx[k]);
        Pi.xx[k] = 2.0 * mu * G.xx[k] + iso;
        Pi.xy[k] = 2.0 * mu * dxy;
        Pi.yx[k] = Pi.xy[k];
        Pi.yy[k] = 2.0 * mu * G.yy[k] + iso;
    }
    return Pi;
}

/// Solve the mollified elliptic problem
///   -div(2 mu0 D u + (lam0 div u - P0 + Pt) I) + cd u = -div(w_delta * Pi0),
/// cd = |w_delta * Pi0 - Pi0|_L2, by preconditioned conjugate gradients
/// on the symmetric positive operator. Relative residual target 1e-8.
inline InitialVelocitySolve solve_initial_velocity(const ScalarGrid& rho0, const VectorGrid& u0,
                                                   double delta, const ConstitutiveLaws& laws,
                                                   int max_iter = 2000) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("solve_initial_velocity: delta must be in (0, 1)");
    const int n = rho0.n();
    const double L = rho0.L();
    const double h = rho0.h();

    MatrixGrid Pi0 = initial_stress(rho0, u0, laws);

    // Truncated-Gaussian mollifier, unit discrete mass.
    ScalarGrid w(n, L);
    const double s = delta / 3.0;
    double mass = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            Vec2 d = periodic_delta(w.point(i, j), Vec2{0.0, 0.0}, L);
            double r2 = d.norm2();
            double v = (r2 < delta * delta) ? std::exp(-r2 / (2.0 * s * s)) : 0.0;
            w(i, j) = v;
            mass += v;
        }
    if (mass == 0.0) throw std::invalid_argument("solve_initial_velocity: delta below grid scale");
    w *= 1.0 / (mass * h * h);
    Spectrum w_hat = fft_forward(w);

    MatrixGrid Pi_moll(n, L);
    double cd2 = 0.0;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            Pi_moll.comp(j, k) = initdetail::convolve(Pi0.comp(j, k), w_hat, h * h);
            ScalarGrid diff = Pi_moll.comp(j, k) - Pi0.comp(j, k);
            cd2 += diff.l2_norm() * diff.l2_norm();
        }
    const double cd = std::sqrt(cd2);

    ScalarGrid mu0(n, L), lam0(n, L), pdev(n, L);
    for (size_t k = 0; k < rho0.size(); ++k) {
        mu0[k] = laws.mu(rho0[k]);
        lam0[k] = laws.lambda(rho0[k]);
        pdev[k] = laws.P(rho0[k]) - laws.P_tilde();
    }

    VectorGrid b = spectral::divergence(Pi_moll);
    b *= -1.0;
    b -= spectral::gradient(pdev);

    InitialVelocitySolve out;
    out.c_delta = cd;
    double bnorm = std::sqrt(initdetail::dot(b, b));
    if (bnorm == 0.0) {
        out.u = VectorGrid(n, L);
        out.converged = true;
        return out;
    }

    const double mu_t = laws.mu_tilde(), lam_t = laws.lambda_tilde();
    VectorGrid x(n, L);
    VectorGrid r = b;
    VectorGrid z = initdetail::elliptic_precond(r, mu_t, lam_t, cd);
    VectorGrid p = z;
    double rz = initdetail::dot(r, z);
    double best = bnorm;
    int since_drop = 0;
    for (int it = 0; it < max_iter; ++it) {
        VectorGrid Ap = initdetail::elliptic_apply(p, mu0, lam0, cd);
        double alpha = rz / initdetail::dot(p, Ap);
        for (size_t k = 0; k < x.x.size(); ++k) {
            x.x[k] += alpha * p.x[k];
            x.y[k] += alpha * p.y[k];
            r.x[k] -= alpha * Ap.x[k];
            r.y[k] -= alpha * Ap.y[k];
        }
        // Recurrence residual drifts from the true one over long runs;
        // replace it periodically so the target accuracy stays reachable.
        if ((it + 1) % 50 == 0) {
            VectorGrid Ax = initdetail::elliptic_apply(x, mu0, lam0, cd);
            r = b;
            r -= Ax;
        }
        double rnorm = std::sqrt(initdetail::dot(r, r));
        out.iterations = it + 1;
        if (rnorm < 1e-8 * bnorm) {
            out.converged = true;
            break;
        }
        if (rnorm < 0.1 * best) {
            best = rnorm;
            since_drop = 0;
        } else if (++since_drop >= 200) {
            out.stagnated = true;
            break;
        }
        z = initdetail::elliptic_precond(r, mu_t, lam_t, cd);
        double rz_new = initdetail::dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (size_t k = 0; k < p.x.size(); ++k) {
            p.x[k] = z.x[k] + beta * p.x[k];
            p.y[k] = z.y[k] + beta * p.y[k];
        }
    }
    // Independent residual recomputation.
    VectorGrid res = initdetail::elliptic_apply(x, mu0, lam0, cd);
    res -= b;
    out.residual = std::sqrt(initdetail::dot(res, res)) / bnorm;
    out.u = std::move(x);
    return out;
}

/// Smallness monitors of the initial data: the squared-norm aggregate
///   c0 = |u0|_H1^2 + |rho0 - rho_t|_{L2 ^ Calpha_pw}^2 + |[rho0]|_{L4 ^ Linf(C)}^2
/// (intersection norms realized as the max of the two members) together
/// with the viscosity-smallness composite evaluated on the initial
/// interface. Pure monitors; the matching thresholds are existential.
struct SmallnessReport {
    double u_h1_sq = 0.0;
    double rho_dev_l2 = 0.0;
    PiecewiseNorm rho_dev_pw;
    double jump_rho_l4 = 0.0;
    double jump_rho_linf = 0.0;
    double c0 = 0.0;
    ViscosityComposite composite;
    double frak_p = 0.0;
    double ell = 0.0;
};

inline SmallnessReport smallness_report(const FluidState& state, double alpha,
                                        std::uint64_t seed, int pair_budget = 40000,
                                        double probe_r0 = 0.0) {
    const ConstitutiveLaws& laws = *state.laws;
    const int n = state.n();
    const double L = state.L();
    const double h = state.h();
    if (probe_r0 <= 0.0) probe_r0 = 8.0 * h;
    SmallnessReport rep;

    MatrixGrid G = spectral::gradient_of(state.u);
    double h1 = 0.0;
    for (size_t k = 0; k < state.rho.size(); ++k) {
        h1 += state.u.x[k] * state.u.x[k] + state.u.y[k] * state.u.y[k];
        h1 += G.xx[k] * G.xx[k] + G.xy[k] * G.xy[k] + G.yx[k] * G.yx[k] + G.yy[k] * G.yy[k];
    }
    rep.u_h1_sq = h1 * h * h;

    ScalarGrid rho_dev(n, L), mu_dev(n, L), lam(n, L), mu(n, L);
    for (size_t k = 0; k < state.rho.size(); ++k) {
        rho_dev[k] = state.rho[k] - laws.rho_tilde();
        mu[k] = laws.mu(state.rho[k]);
        mu_dev[k] = mu[k] - laws.mu_tilde();
        lam[k] = laws.lambda(state.rho[k]);
    }
    rep.rho_dev_l2 = rho_dev.l2_norm();

    VectorGrid grad_phi = fd4_gradient(state.levelset.phi);
    auto classify = levelset_classifier(state.levelset, grad_phi, h);
    auto rng = make_rng(seed, 0x5d417);
    const double cutoff = std::max(0.1 * L, 4.5 * h);
    rep.rho_dev_pw = piecewise_norm(rho_dev, classify, alpha, cutoff, rng, pair_budget);

    auto jumps = jumps_along_curve(state.rho, classify, state.curve, probe_r0, alpha);
    rep.jump_rho_l4 = curve_lp_norm(state.curve, jumps, 4.0);
    rep.jump_rho_linf = curve_lp_norm(state.curve, jumps,
                                      std::numeric_limits<double>::infinity());

    double rho_norm = std::max(rep.rho_dev_l2, rep.rho_dev_pw.total());
    double jump_norm = std::max(rep.jump_rho_l4, rep.jump_rho_linf);
    rep.c0 = rep.u_h1_sq + rho_norm * rho_norm + jump_norm * jump_norm;

    CurveGeometry geo = geometry(state.curve, alpha);
    rep.frak_p = frak_P(geo);
    auto lsm = levelset_metrics(state.levelset, grad_phi, state.curve, alpha, rng,
                                pair_budget / 2);
    rep.ell = lsm.ell;

    ViscosityComposite& c = rep.composite;
    c.frak_p = rep.frak_p;
    c.ell_inv_alpha = lsm.ell > 0.0 ? std::pow(lsm.ell, -alpha) : 0.0;
    auto mu_pw = piecewise_norm(mu_dev, classify, alpha, cutoff, rng, pair_budget);
    auto lam_pw = piecewise_norm(lam, classify, alpha, cutoff, rng, pair_budget);
    c.mu_pw_norm = mu_pw.total();
    c.lam_seminorm = lam_pw.seminorm();
    auto mu_jumps = jumps_along_curve(mu, classify, state.curve, probe_r0, alpha);
    auto lam_jumps = jumps_along_curve(lam, classify, state.curve, probe_r0, alpha);
    double ratio_inf = 0.0;
    for (size_t i = 0; i < mu_jumps.size(); ++i) {
        if (!mu_jumps[i].valid) continue;
        c.jump_mu_inf = std::max(c.jump_mu_inf, std::abs(mu_jumps[i].jump));
        if (mu_jumps[i].average != 0.0)
            ratio_inf = std::max(ratio_inf,
                                 std::abs(1.0 - laws.mu_tilde() / mu_jumps[i].average));
    }
    for (const auto& j : lam_jumps)
        if (j.valid) c.jump_lam_inf = std::max(c.jump_lam_inf, std::abs(j.jump));
    c.one_minus_ratio_inf = ratio_inf;
    c.value = viscosity_composite_value(c);
    return rep;
}

/// Assemble a complete initial state: analytic level set and markers,
/// particle lattice (particle_factor x finer than the grid per axis)
/// carrying f(rho0), and the compatible velocity from the elliptic
/// solve.
inline FluidState build_initial_state(const PatchSpec& patch, const InitialVelocitySpec& vel,
                                      int n, double L,
                                      std::shared_ptr<const ConstitutiveLaws> laws,
                                      int particle_factor = 4, int markers = 512) {
    FluidState st;
    st.laws = laws;
    const ConstitutiveLaws& lw = *laws;

    // Level set from the analytic signed shape.
    ScalarGrid phi(n, L);
    phi.fill_with([&](const Vec2& x) { return patch.signed_shape(x, L); });
    st.levelset = LevelSet(std::move(phi));

    // Markers at equal arclength along the analytic boundary.
    const int fine = 8192;
    std::vector<Vec2> bpts(fine);
    std::vector<double> arc(fine + 1, 0.0);
    for (int k = 0; k < fine; ++k) {
        double th = 2.0 * M_PI * k / fine;
        double R = patch.boundary_radius(th);
        bpts[k] = wrap(patch.center + R * Vec2{std::cos(th), std::sin(th)}, L);
    }
    for (int k = 0; k < fine; ++k)
        arc[k + 1] = arc[k] + periodic_dist(bpts[(k + 1) % fine], bpts[k], L);
    const double total = arc[fine];
    st.curve.L = L;
    st.curve.s_period = total;
    st.curve.pos.resize(markers);
    st.curve.s.resize(markers);
    int seg = 0;
    for (int i = 0; i < markers; ++i) {
        double target = total * double(i) / markers;
        while (seg + 1 < fine && arc[seg + 1] < target) ++seg;
        double wgt = (target - arc[seg]) / std::max(arc[seg + 1] - arc[seg], 1e-300);
        Vec2 d = periodic_delta(bpts[(seg + 1) % fine], bpts[seg], L);
        st.curve.pos[i] = wrap(bpts[seg] + wgt * d, L);
        st.curve.s[i] = target;
    }

    // Particle lattice, 4x finer than the velocity grid by default.
    const int np = particle_factor * n;
    const double hp = L / np;
    ParticleCloud& cloud = st.particles;
    cloud.L = L;
    cloud.cell_volume = hp * hp;
    cloud.resize(np * np);
    int idx = 0;
    for (int j = 0; j < np; ++j)
        for (int i = 0; i < np; ++i, ++idx) {
            Vec2 y{(i + 0.5) * hp, (j + 0.5) * hp};
            double rho0 = patch.density(y, lw.rho_tilde(), L);
            lw.check_in_band(rho0, "build_initial_state");
            cloud.label_x[idx] = y.x;
            cloud.label_y[idx] = y.y;
            cloud.pos_x[idx] = y.x;
            cloud.pos_y[idx] = y.y;
            cloud.rho0[idx] = rho0;
            cloud.rho[idx] = rho0;
            cloud.fval[idx] = lw.f(rho0);
            cloud.jac[idx] = 1.0;
            cloud.side[idx] = patch.signed_shape(y, L) >= 0.0 ? +1 : -1;
        }

    // Density on the grid (analytic sample for the elliptic solve).
    ScalarGrid rho0g(n, L);
    rho0g.fill_with([&](const Vec2& x) { return patch.density(x, lw.rho_tilde(), L); });

    VectorGrid u0(n, L);
    u0.x.fill_with([&](const Vec2& x) { return vel.velocity(x, L).x; });
    u0.y.fill_with([&](const Vec2& x) { return vel.velocity(x, L).y; });

    auto solve = solve_initial_velocity(rho0g, u0, vel.delta, lw);
    if (!solve.converged)
        throw invalid_state("build_initial_state: elliptic solve did not converge");
    st.u = std::move(solve.u);

    st.rho = density_on_grid(cloud, st.levelset, lw);
    return st;
}

}  // namespace patchns
