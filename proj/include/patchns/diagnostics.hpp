#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "patchns/norms.hpp"
#include "patchns/state.hpp"

namespace patchns {
namespace diag {

inline double sigma_weight(double t) { return std::min(1.0, t); }
inline double r_alpha(double alpha) { return 1.0 + 2.0 * alpha; }

/// Mask of grid points farther than band_h * h from the interface (by
/// the |phi| / |grad phi| distance proxy). Identity residuals use grid
/// quadrature only outside this band; the interface itself is handled
/// by one-sided probing.
inline std::vector<char> interface_band_mask(const LevelSet& ls, const VectorGrid& grad_phi,
                                             double band_h) {
    const int n = ls.phi.n();
    const double h = ls.phi.h();
    std::vector<char> keep(size_t(n) * n, 1);
    for (size_t k = 0; k < keep.size(); ++k) {
        double g = std::max(std::hypot(grad_phi.x[k], grad_phi.y[k]), 1e-12);
        if (std::abs(ls.phi[k]) / g < band_h * h) keep[k] = 0;
    }
    return keep;
}

inline double masked_rel_l2(const ScalarGrid& a, const ScalarGrid& b,
                            const std::vector<char>& keep) {
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        if (!keep[k]) continue;
        double d = a[k] - b[k];
        num += d * d;
        den += b[k] * b[k];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------
// Energy
// ---------------------------------------------------------------------

struct EnergyReport {
    double energy = 0.0;            // int rho |u|^2 / 2 + H_1(rho)
    double dissipation_rate = 0.0;  // int 2 mu |Du|^2 + lambda (div u)^2
};

inline EnergyReport classical_energy(const FluidState& state) {
    const ConstitutiveLaws& laws = *state.laws;
    MatrixGrid Du = spectral::sym_gradient(state.u);
    EnergyReport r;
    double e = 0.0, d = 0.0;
    for (size_t k = 0; k < state.rho.size(); ++k) {
        double rho = state.rho[k];
        double u2 = state.u.x[k] * state.u.x[k] + state.u.y[k] * state.u.y[k];
        e += 0.5 * rho * u2 + laws.potential_energy(rho, 1.0);
        double du2 = Du.xx[k] * Du.xx[k] + 2.0 * Du.xy[k] * Du.xy[k] + Du.yy[k] * Du.yy[k];
        double divu = Du.xx[k] + Du.yy[k];
        d += 2.0 * laws.mu(rho) * du2 + laws.lambda(rho) * divu * divu;
    }
    double cell = state.h() * state.h();
    r.energy = e * cell;
    r.dissipation_rate = d * cell;
    return r;
}

// ---------------------------------------------------------------------
// Time-weighted energy functionals (running sup / integral forms)
// ---------------------------------------------------------------------

/// A1 = sup |grad u|_L2^2            + int |sqrt(rho) udot|_L2^2
/// A2 = sup s |sqrt(rho) udot|_L2^2  + int s |grad udot|_L2^2
/// A3 = sup s^2 |grad udot|_L2^2     + int s^2 |sqrt(rho) uddot|_L2^2
/// with s(t) = min(1, t). Non-decreasing by construction.
struct HoffFunctionals {
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;

    double sup_grad_u = 0.0, int_rho_udot = 0.0;
    double sup_s_rho_udot = 0.0, int_s_grad_udot = 0.0;
    double sup_s2_grad_udot = 0.0, int_s2_rho_uddot = 0.0;
    double last_t = -1.0;
    double prev_rho_udot = 0.0, prev_s_grad_udot = 0.0, prev_s2_rho_uddot = 0.0;
    bool has_prev = false;

    /// Feed one snapshot: |grad u|^2, |sqrt rho udot|^2, |grad udot|^2,
    /// |sqrt rho uddot|^2 (pass NaN when a piece is not yet available).
    void update(double t, double grad_u2, double rho_udot2, double grad_udot2,
                double rho_uddot2) {
        double s = sigma_weight(t);
        if (std::isfinite(grad_u2)) sup_grad_u = std::max(sup_grad_u, grad_u2);
        if (std::isfinite(rho_udot2)) sup_s_rho_udot = std::max(sup_s_rho_udot, s * rho_udot2);
        if (std::isfinite(grad_udot2))
            sup_s2_grad_udot = std::max(sup_s2_grad_udot, s * s * grad_udot2);
        double i1 = std::isfinite(rho_udot2) ? rho_udot2 : 0.0;
        double i2 = std::isfinite(grad_udot2) ? s * grad_udot2 : 0.0;
        double i3 = std::isfinite(rho_uddot2) ? s * s * rho_uddot2 : 0.0;
        if (has_prev && t > last_t) {
            double dt = t - last_t;
            int_rho_udot += 0.5 * dt * (prev_rho_udot + i1);
            int_s_grad_udot += 0.5 * dt * (prev_s_grad_udot + i2);
            int_s2_rho_uddot += 0.5 * dt * (prev_s2_rho_uddot + i3);
        }
        prev_rho_udot = i1;
        prev_s_grad_udot = i2;
        prev_s2_rho_uddot = i3;
        last_t = t;
        has_prev = true;
        a1 = sup_grad_u + int_rho_udot;
        a2 = sup_s_rho_udot + int_s_grad_udot;
        a3 = sup_s2_grad_udot + int_s2_rho_uddot;
    }
};

/// theta = sup |f(rho)|_pw^4 + int [ |f(rho)|_pw^4
///         + s^{1+2 alpha} |grad u|_pw^4 ], piecewise norms over the
/// transported interface.
struct ThetaFunctional {
    double alpha = 0.5;
    double value = 0.0;
    double sup_f4 = 0.0, integral = 0.0;
    double last_t = -1.0, prev_integrand = 0.0;
    bool has_prev = false;
    int skipped = 0;  // estimator-invalid records

    void update(double t, double f_pw_norm, double grad_u_pw_norm) {
        if (!std::isfinite(f_pw_norm) || !std::isfinite(grad_u_pw_norm)) {
            ++skipped;
            return;
        }
        double f4 = std::pow(f_pw_norm, 4.0);
        sup_f4 = std::max(sup_f4, f4);
        double integrand = f4 + std::pow(sigma_weight(t), r_alpha(alpha)) *
                                    std::pow(grad_u_pw_norm, 4.0);
        if (has_prev && t > last_t)
            integral += 0.5 * (t - last_t) * (prev_integrand + integrand);
        prev_integrand = integrand;
        last_t = t;
        has_prev = true;
        value = sup_f4 + integral;
    }
};

// ---------------------------------------------------------------------
// Effective flux and vorticity representations
// ---------------------------------------------------------------------

struct FluxReport {
    ScalarGrid direct;  // (2 mu + lambda) div u - (P - Pt)
    ScalarGrid repr;    // -(-Lap)^{-1} div(rho udot) + [K, mu - mu_t] Du
    double residual = 0.0;
};

namespace fluxdetail {

inline VectorGrid rho_udot(const FluidState& state, const VectorGrid& udot) {
    VectorGrid r = udot;
    for (size_t k = 0; k < r.x.size(); ++k) {
        r.x[k] *= state.rho[k];
        r.y[k] *= state.rho[k];
    }
    return r;
}

inline void remove_mean(ScalarGrid& g) {
    double m = g.mean();
    for (size_t k = 0; k < g.size(); ++k) g[k] -= m;
}

}  // namespace fluxdetail

/// Both routes to the effective flux, compared in relative L2 outside
/// the interface band. The torus identity holds modulo constants, so
/// means are removed before differencing.
inline FluxReport effective_flux(const FluidState& state, const VectorGrid& udot,
                                 const std::vector<char>& keep) {
    const ConstitutiveLaws& laws = *state.laws;
    MatrixGrid Du = spectral::sym_gradient(state.u);
    ScalarGrid divu = Du.xx + Du.yy;

    FluxReport out;
    out.direct = ScalarGrid(state.n(), state.L());
    ScalarGrid mu_dev(state.n(), state.L());
    for (size_t k = 0; k < divu.size(); ++k) {
        double rho = state.rho[k];
        out.direct[k] = (2.0 * laws.mu(rho) + laws.lambda(rho)) * divu[k] -
                        (laws.P(rho) - laws.P_tilde());
        mu_dev[k] = laws.mu(rho) - laws.mu_tilde();
    }

    ScalarGrid div_rudot = spectral::divergence(fluxdetail::rho_udot(state, udot));
    out.repr = -1.0 * spectral::inv_laplacian(div_rudot);
    out.repr += spectral::commutator_K(mu_dev, Du, spectral::Kind::K);

    ScalarGrid a = out.direct, b = out.repr;
    fluxdetail::remove_mean(a);
    fluxdetail::remove_mean(b);
    out.residual = masked_rel_l2(b, a, keep);
    return out;
}

/// Vorticity route: mu(rho) rot u vs -(-Lap)^{-1} rot(rho udot)
/// + [K', mu - mu_t] Du.
inline FluxReport vorticity_identity(const FluidState& state, const VectorGrid& udot,
                                     const std::vector<char>& keep) {
    const ConstitutiveLaws& laws = *state.laws;
    MatrixGrid Du = spectral::sym_gradient(state.u);
    ScalarGrid rot = spectral::rot2(state.u);

    FluxReport out;
    out.direct = ScalarGrid(state.n(), state.L());
    ScalarGrid mu_dev(state.n(), state.L());
    for (size_t k = 0; k < rot.size(); ++k) {
        out.direct[k] = laws.mu(state.rho[k]) * rot[k];
        mu_dev[k] = laws.mu(state.rho[k]) - laws.mu_tilde();
    }

    ScalarGrid rot_rudot = spectral::rot2(fluxdetail::rho_udot(state, udot));
    out.repr = -1.0 * spectral::inv_laplacian(rot_rudot);
    out.repr += spectral::commutator_K(mu_dev, Du, spectral::Kind::Kprime);

    ScalarGrid a = out.direct, b = out.repr;
    fluxdetail::remove_mean(a);
    fluxdetail::remove_mean(b);
    out.residual = masked_rel_l2(b, a, keep);
    return out;
}

// ---------------------------------------------------------------------
// Interface jump identities
// ---------------------------------------------------------------------

/// Per-marker residuals of the interface relations, normalized by the
/// local field scale:
///   r1: stress continuity in the normal direction, |[Pi] n|
///   r2: tangential continuity of the velocity gradient, |[grad u] tau|
///   r3: effective-flux jump vs 2 [mu] (<div u> - n . <Du> n)
///   r4: vorticity jump [mu rot u] vs [mu] (<rot u> - 2 tau . <Du> n)
struct JumpIdentityRow {
    int marker = -1;
    bool valid = false;
    double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0;
    double jump_f = 0.0, jump_p = 0.0, jump_mu = 0.0, jump_lambda = 0.0;
    double jump_F = 0.0, jump_mu_rot = 0.0, jump_divu = 0.0, jump_rotu = 0.0;
    double jump_gradu_norm = 0.0;  // Frobenius norm of the grad-u jump
    double avg_mu = 0.0;
    double err_F = 0.0, err_mu_rot = 0.0;  // extrapolation error estimates
};

/// One-sided field evaluators probed at the markers. Grid-backed in
/// production (assemble_jump_fields); analytic in verification tests.
struct JumpFields {
    FieldEval gradu[2][2];
    FieldEval Du_parts[3];  // Du as xx, xy, yy
    FieldEval pi[2][2];
    FieldEval F, mu_rot, divu, rotu;
    FieldEval f_of_rho, p_dev, mu, lambda;
    // Keeps grid storage alive for the grid-backed variant.
    std::shared_ptr<void> storage;
};

namespace jumpdetail {

struct JumpGrids {
    ScalarGrid gradu[2][2];
    ScalarGrid Du_parts[3];
    ScalarGrid pi[2][2];
    ScalarGrid F, mu_rot, divu, rotu;
    ScalarGrid f_of_rho, p_dev, mu, lambda;
};

}  // namespace jumpdetail

inline JumpFields assemble_jump_fields(const FluidState& state) {
    const ConstitutiveLaws& laws = *state.laws;
    const int n = state.n();
    const double L = state.L();
    auto g = std::make_shared<jumpdetail::JumpGrids>();
    MatrixGrid G = spectral::gradient_of(state.u);
    g->gradu[0][0] = G.xx;
    g->gradu[0][1] = G.xy;
    g->gradu[1][0] = G.yx;
    g->gradu[1][1] = G.yy;
    ScalarGrid dxy(n, L);
    for (size_t k = 0; k < dxy.size(); ++k) dxy[k] = 0.5 * (G.xy[k] + G.yx[k]);
    g->Du_parts[0] = G.xx;
    g->Du_parts[1] = dxy;
    g->Du_parts[2] = G.yy;
    g->divu = G.xx + G.yy;
    g->rotu = ScalarGrid(n, L);
    for (size_t k = 0; k < g->rotu.size(); ++k) g->rotu[k] = G.yx[k] - G.xy[k];

    g->F = ScalarGrid(n, L);
    g->mu_rot = ScalarGrid(n, L);
    g->f_of_rho = ScalarGrid(n, L);
    g->p_dev = ScalarGrid(n, L);
    g->mu = ScalarGrid(n, L);
    g->lambda = ScalarGrid(n, L);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) g->pi[a][b] = ScalarGrid(n, L);
    for (size_t k = 0; k < g->F.size(); ++k) {
        double rho = state.rho[k];
        double mu = laws.mu(rho), lam = laws.lambda(rho);
        double pd = laws.P(rho) - laws.P_tilde();
        double dv = g->divu[k];
        g->F[k] = (2.0 * mu + lam) * dv - pd;
        g->mu_rot[k] = mu * g->rotu[k];
        g->f_of_rho[k] = laws.f(rho);
        g->p_dev[k] = pd;
        g->mu[k] = mu;
        g->lambda[k] = lam;
        double iso = lam * dv - pd;
        g->pi[0][0][k] = 2.0 * mu * G.xx[k] + iso;
        g->pi[0][1][k] = 2.0 * mu * dxy[k];
        g->pi[1][0][k] = g->pi[0][1][k];
        g->pi[1][1][k] = 2.0 * mu * G.yy[k] + iso;
    }

    JumpFields jf;
    auto wrap_grid = [g](const ScalarGrid& grid) -> FieldEval {
        const ScalarGrid* ptr = &grid;
        return [g, ptr](const Vec2& p) { return interp::bicubic(*ptr, p); };
    };
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            jf.gradu[a][b] = wrap_grid(g->gradu[a][b]);
            jf.pi[a][b] = wrap_grid(g->pi[a][b]);
        }
    for (int a = 0; a < 3; ++a) jf.Du_parts[a] = wrap_grid(g->Du_parts[a]);
    jf.F = wrap_grid(g->F);
    jf.mu_rot = wrap_grid(g->mu_rot);
    jf.divu = wrap_grid(g->divu);
    jf.rotu = wrap_grid(g->rotu);
    jf.f_of_rho = wrap_grid(g->f_of_rho);
    jf.p_dev = wrap_grid(g->p_dev);
    jf.mu = wrap_grid(g->mu);
    jf.lambda = wrap_grid(g->lambda);
    jf.storage = g;
    return jf;
}

inline std::vector<JumpIdentityRow> jump_identities(const InterfaceCurve& curve,
                                                    const JumpFields& jf,
                                                    const SideClassifier& classify, double r0,
                                                    double alpha) {
    const double L = curve.L;
    const int m = curve.size();
    std::vector<JumpIdentityRow> rows(m);

    auto probe = [&](const FieldEval& ev, int i, const Vec2& nrm) {
        return jump_average(ev, classify, curve.pos[i], nrm, r0, alpha, L, i);
    };

    // Local scales, accumulated for a global floor.
    std::vector<double> s1(m, 0.0), s2(m, 0.0), s3(m, 0.0), s4(m, 0.0);
    std::vector<JumpIdentityRow>& R = rows;

#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        Vec2 nrm = curve.normal(i);
        Vec2 tau{-nrm.y, nrm.x};
        JumpIdentityRow row;
        row.marker = i;

        JumpSample gu[2][2];
        bool ok = true;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                gu[a][b] = probe(jf.gradu[a][b], i, nrm);
                ok = ok && gu[a][b].valid;
            }
        JumpSample pi[2][2];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                pi[a][b] = probe(jf.pi[a][b], i, nrm);
                ok = ok && pi[a][b].valid;
            }
        JumpSample du_xx = probe(jf.Du_parts[0], i, nrm);
        JumpSample du_xy = probe(jf.Du_parts[1], i, nrm);
        JumpSample du_yy = probe(jf.Du_parts[2], i, nrm);
        JumpSample sF = probe(jf.F, i, nrm);
        JumpSample sMR = probe(jf.mu_rot, i, nrm);
        JumpSample sdiv = probe(jf.divu, i, nrm);
        JumpSample srot = probe(jf.rotu, i, nrm);
        JumpSample smu = probe(jf.mu, i, nrm);
        JumpSample slam = probe(jf.lambda, i, nrm);
        JumpSample sf = probe(jf.f_of_rho, i, nrm);
        JumpSample sp = probe(jf.p_dev, i, nrm);
        ok = ok && du_xx.valid && du_xy.valid && du_yy.valid && sF.valid && sMR.valid &&
             sdiv.valid && srot.valid && smu.valid && slam.valid && sf.valid && sp.valid;
        if (!ok) {
            R[i] = row;
            continue;
        }

        row.valid = true;
        row.jump_f = sf.jump;
        row.jump_p = sp.jump;
        row.jump_mu = smu.jump;
        row.jump_lambda = slam.jump;
        row.jump_F = sF.jump;
        row.jump_mu_rot = sMR.jump;
        row.jump_divu = sdiv.jump;
        row.jump_rotu = srot.jump;
        row.avg_mu = smu.average;
        row.err_F = sF.error;
        row.err_mu_rot = sMR.error;

        // r1: [Pi] n
        Vec2 jump_pi_n{pi[0][0].jump * nrm.x + pi[0][1].jump * nrm.y,
                       pi[1][0].jump * nrm.x + pi[1][1].jump * nrm.y};
        Vec2 pi_n_plus{(pi[0][0].average + 0.5 * pi[0][0].jump) * nrm.x +
                           (pi[0][1].average + 0.5 * pi[0][1].jump) * nrm.y,
                       (pi[1][0].average + 0.5 * pi[1][0].jump) * nrm.x +
                           (pi[1][1].average + 0.5 * pi[1][1].jump) * nrm.y};
        Vec2 pi_n_minus = pi_n_plus - jump_pi_n;
        row.r1 = jump_pi_n.norm();
        s1[i] = std::max(pi_n_plus.norm(), pi_n_minus.norm());

        // r2: [grad u] tau (tangential continuity)
        Vec2 jump_gu_tau{gu[0][0].jump * tau.x + gu[0][1].jump * tau.y,
                         gu[1][0].jump * tau.x + gu[1][1].jump * tau.y};
        row.r2 = jump_gu_tau.norm();
        double gu_frob_sq = 0.0, gu_scale = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                gu_frob_sq += gu[a][b].jump * gu[a][b].jump;
                gu_scale = std::max({gu_scale, std::abs(gu[a][b].g_plus),
                                     std::abs(gu[a][b].g_minus)});
            }
        row.jump_gradu_norm = std::sqrt(gu_frob_sq);
        s2[i] = gu_scale;

        // <Du> contractions
        double du_nn = du_xx.average * nrm.x * nrm.x + 2.0 * du_xy.average * nrm.x * nrm.y +
                       du_yy.average * nrm.y * nrm.y;
        double du_nt = du_xx.average * tau.x * nrm.x +
                       du_xy.average * (tau.x * nrm.y + tau.y * nrm.x) +
                       du_yy.average * tau.y * nrm.y;

        // r3: [F] = 2 [mu] (<div u> - n.<Du>n)
        double rhs3 = 2.0 * smu.jump * (sdiv.average - du_nn);
        row.r3 = std::abs(sF.jump - rhs3);
        s3[i] = std::max({std::abs(sF.g_plus), std::abs(sF.g_minus), std::abs(rhs3)});

        // r4: [mu rot u] = [mu] (<rot u> - 2 tau.<Du>n)
        double rhs4 = smu.jump * (srot.average - 2.0 * du_nt);
        row.r4 = std::abs(sMR.jump - rhs4);
        s4[i] = std::max({std::abs(sMR.g_plus), std::abs(sMR.g_minus), std::abs(rhs4)});

        R[i] = row;
    }

    // Normalize by max(local scale, mean scale) so residuals stay
    // meaningful where the local field happens to vanish.
    auto normalize = [&](std::vector<double>& s, auto member) {
        double mean = 0.0;
        int cnt = 0;
        for (int i = 0; i < m; ++i)
            if (rows[i].valid) {
                mean += s[i];
                ++cnt;
            }
        mean = cnt ? mean / cnt : 0.0;
        for (int i = 0; i < m; ++i)
            if (rows[i].valid) {
                double denom = std::max({s[i], mean, 1e-14});
                member(rows[i]) /= denom;
            }
    };
    normalize(s1, [](JumpIdentityRow& r) -> double& { return r.r1; });
    normalize(s2, [](JumpIdentityRow& r) -> double& { return r.r2; });
    normalize(s3, [](JumpIdentityRow& r) -> double& { return r.r3; });
    normalize(s4, [](JumpIdentityRow& r) -> double& { return r.r4; });
    return rows;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// ---------------------------------------------------------------------
// Lagrangian mass cross-check
// ---------------------------------------------------------------------

/// max over particles of |rho(t, x(t)) J(t) - rho0| / rho0 with
/// rho(t, x(t)) recovered from the carried f-value. Couples the f-ODE
/// route to the Jacobian route.
inline double lagrangian_mass_residual(const ParticleCloud& cloud) {
    double worst = 0.0;
    for (int p = 0; p < cloud.count(); ++p)
        worst = std::max(worst,
                         std::abs(cloud.rho[p] * cloud.jac[p] - cloud.rho0[p]) / cloud.rho0[p]);
    return worst;
}

// ---------------------------------------------------------------------
// Second material-derivative energy identity
// ---------------------------------------------------------------------

/// One time sample of the identity
///   d/dt [ 1/2 int rho |udot|^2 ] + int (2 mu |D udot|^2 + lambda
///   (div udot)^2) = RHS, with the RHS integrals assembled from grad u,
///   grad udot, the stress and the law derivatives; an optional body
///   force contributes int udot . (f_dot + f div u).
struct Hoff2Sample {
    double t = 0.0;
    double kinetic = 0.0;      // 1/2 int rho |udot|^2
    double dissipation = 0.0;  // int 2 mu |D udot|^2 + lambda (div udot)^2
    double rhs = 0.0;
    double max_term = 0.0;  // largest |term| for normalization
};

inline Hoff2Sample hoff2_sample(const FluidState& state, const VectorGrid& udot,
                                const VectorGrid* force, const VectorGrid* force_dot) {
    const ConstitutiveLaws& laws = *state.laws;
    const int n = state.n();
    const double L = state.L();
    MatrixGrid G = spectral::gradient_of(state.u);
    MatrixGrid Gd = spectral::gradient_of(udot);

    Hoff2Sample out;
    out.t = state.time;
    double kin = 0.0, diss = 0.0;
    double terms[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (size_t k = 0; k < state.rho.size(); ++k) {
        double rho = state.rho[k];
        double mu = laws.mu(rho), lam = laws.lambda(rho);
        double mup = laws.mup(rho), lamp = laws.lambdap(rho);
        double Pp = laws.Pp(rho);
        double pd = laws.P(rho) - laws.P_tilde();

        double gu[2][2] = {{G.xx[k], G.xy[k]}, {G.yx[k], G.yy[k]}};
        double gd[2][2] = {{Gd.xx[k], Gd.xy[k]}, {Gd.yx[k], Gd.yy[k]}};
        double divu = gu[0][0] + gu[1][1];
        double divd = gd[0][0] + gd[1][1];

        kin += 0.5 * rho * (udot.x[k] * udot.x[k] + udot.y[k] * udot.y[k]);
        double Dd2 = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                double s = 0.5 * (gd[a][b] + gd[b][a]);
                Dd2 += s * s;
            }
        diss += 2.0 * mu * Dd2 + lam * divd * divd;

        double pi[2][2];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                pi[a][b] = mu * (gu[a][b] + gu[b][a]) + (a == b ? lam * divu - pd : 0.0);

        // int dk udot^j { mu (dj u^l dl u^k + dk u^l dl u^j) + 2 rho mu' D^{jk}u div u }
        double t1 = 0.0, t2 = 0.0;
        for (int j = 0; j < 2; ++j)
            for (int kk = 0; kk < 2; ++kk) {
                double sum1 = 0.0;
                for (int l = 0; l < 2; ++l) sum1 += gu[l][j] * gu[kk][l] + gu[l][kk] * gu[j][l];
                t1 += gd[j][kk] * mu * sum1;
                double Djk = 0.5 * (gu[j][kk] + gu[kk][j]);
                t2 += gd[j][kk] * 2.0 * rho * mup * Djk * divu;
            }
        // int div udot { lambda tr((grad u)^2) + rho lambda' (div u)^2 - rho P' div u }
        double tr2 = gu[0][0] * gu[0][0] + 2.0 * gu[0][1] * gu[1][0] + gu[1][1] * gu[1][1];
        double t3 = divd * lam * tr2;
        double t4 = divd * rho * lamp * divu * divu;
        double t5 = -divd * rho * Pp * divu;
        // - int dk udot^j Pi^{jk} div u + int dl udot^j dk u^l Pi^{jk}
        double t6 = 0.0, t7 = 0.0;
        for (int j = 0; j < 2; ++j)
            for (int kk = 0; kk < 2; ++kk) {
                t6 -= gd[j][kk] * pi[j][kk] * divu;
                for (int l = 0; l < 2; ++l) t7 += gd[j][l] * gu[l][kk] * pi[j][kk];
            }
        double t8 = 0.0;
        if (force && force_dot) {
            // int udot . (f_dot + f div u)
            t8 = udot.x[k] * (force_dot->x[k] + force->x[k] * divu) +
                 udot.y[k] * (force_dot->y[k] + force->y[k] * divu);
        }
        terms[0] += t1;
        terms[1] += t2;
        terms[2] += t3;
        terms[3] += t4;
        terms[4] += t5;
        terms[5] += t6;
        terms[6] += t7;
        terms[7] += t8;
    }
    double cell = (L / n) * (L / n);
    out.kinetic = kin * cell;
    out.dissipation = diss * cell;
    for (double& t : terms) t *= cell;
    for (double t : terms) {
        out.rhs += t;
        out.max_term = std::max(out.max_term, std::abs(t));
    }
    out.max_term = std::max({out.max_term, out.dissipation, std::abs(out.kinetic)});
    return out;
}

/// Residual of the identity at the middle of three samples, normalized
/// by the largest participating term (0/0 guarded to 0).
inline double hoff2_residual(const Hoff2Sample& a, const Hoff2Sample& b, const Hoff2Sample& c) {
    double ddt = c.t > a.t ? (c.kinetic - a.kinetic) / (c.t - a.t) : 0.0;
    double lhs = ddt + b.dissipation;
    double scale = std::max({b.max_term, std::abs(ddt), 1e-300});
    double res = std::abs(lhs - b.rhs);
    if (res < 1e-14 && scale < 1e-12) return 0.0;
    return res / scale;
}

// ---------------------------------------------------------------------
// Jump decay fit
// ---------------------------------------------------------------------

struct DecayFit {
    double fitted_slope = 0.0;
    double predicted_slope = 0.0;
    int points_used = 0;
    bool pass = false;
};

/// Least-squares slope of log |[f(rho)]|_{L^p(C)} against time, compared
/// with -nu_lo + (6 nu_hi + 1/p) * (int |grad u|_inf) / t. Entries that
/// have decayed below 1e-12 truncate the fit window.
inline DecayFit jump_decay_fit(const std::vector<double>& times, const std::vector<double>& norms,
                               const NuBounds& nu, double p, double int_grad_u_inf) {
    DecayFit fit;
    std::vector<double> ts, ls;
    for (size_t i = 0; i < times.size(); ++i) {
        if (norms[i] < 1e-12) break;
        ts.push_back(times[i]);
        ls.push_back(std::log(norms[i]));
    }
    fit.points_used = int(ts.size());
    if (ts.size() < 2) return fit;
    double tm = 0.0, lm = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
        tm += ts[i];
        lm += ls[i];
    }
    tm /= ts.size();
    lm /= ts.size();
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
        num += (ts[i] - tm) * (ls[i] - lm);
        den += (ts[i] - tm) * (ts[i] - tm);
    }
    fit.fitted_slope = num / den;
    double t_final = ts.back();
    double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    fit.predicted_slope =
        -nu.lo + (6.0 * nu.hi + inv_p) * (t_final > 0.0 ? int_grad_u_inf / t_final : 0.0);
    fit.pass = fit.fitted_slope <= fit.predicted_slope + 0.1 * std::abs(fit.predicted_slope) + 1e-12;
    return fit;
}

/// Exponential-envelope check for an interface characteristic Q(t):
/// fit the smallest C with log Q(t) <= log Q(0) + C * W(t) where
/// W(t) = int_0^t |grad u|_inf, then verify log Q - C W never exceeds
/// its running minimum history by more than tol * range. Passing means
/// the growth is explained by the measured gradient accumulation.
inline bool growth_envelope_check(const std::vector<double>& values,
                                  const std::vector<double>& int_grad_u, double tol = 0.10) {
    if (values.size() < 3) return true;
    double base = std::log(std::max(values.front(), 1e-300));
    double C = 0.0;
    for (size_t i = 1; i < values.size(); ++i) {
        double w = int_grad_u[i];
        if (w <= 0.0) continue;
        C = std::max(C, (std::log(std::max(values[i], 1e-300)) - base) / w);
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::vector<double> resid(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        resid[i] = std::log(std::max(values[i], 1e-300)) - C * int_grad_u[i];
        lo = std::min(lo, resid[i]);
        hi = std::max(hi, resid[i]);
    }
    double range = std::max(hi - lo, 1e-12);
    double running_min = resid[0];
    for (size_t i = 1; i < resid.size(); ++i) {
        if (resid[i] > running_min + tol * range) return false;
        running_min = std::min(running_min, resid[i]);
    }
    return true;
}

// ---------------------------------------------------------------------
// Blow-up monitors
// ---------------------------------------------------------------------

struct BlowupThresholds {
    double c_gamma = 1e4;
    double grad_gamma_holder = 1e6;
    double inv_rho = 1e4;
    double inv_mu = 1e4;
    double u_h1 = 1e6;
    double rho_udot_l2 = 1e6;
    double p_dev_pw = 1e6;
    double composite = 1e9;
};

struct BlowupReport {
    double c_gamma = 0.0;
    double grad_gamma_holder = 0.0;
    double inv_rho_min = 0.0;
    double inv_mu_min = 0.0;
    double u_h1 = 0.0;
    double rho_udot_l2 = 0.0;
    double p_dev_pw = 0.0;
    double composite = 0.0;
    bool breached = false;
    std::string breach_reason;
};

inline void check_thresholds(BlowupReport& r, const BlowupThresholds& th) {
    auto chk = [&](double v, double lim, const char* name) {
        if (v > lim && !r.breached) {
            r.breached = true;
            r.breach_reason = name;
        }
    };
    chk(r.c_gamma, th.c_gamma, "c_gamma");
    chk(r.grad_gamma_holder, th.grad_gamma_holder, "grad_gamma_holder");
    chk(r.inv_rho_min, th.inv_rho, "inv_rho_min");
    chk(r.inv_mu_min, th.inv_mu, "inv_mu_min");
    chk(r.u_h1, th.u_h1, "u_h1");
    chk(r.rho_udot_l2, th.rho_udot_l2, "rho_udot_l2");
    chk(r.p_dev_pw, th.p_dev_pw, "p_dev_pw");
    chk(r.composite, th.composite, "viscosity_composite");
}

}  // namespace diag
}  // namespace patchns
