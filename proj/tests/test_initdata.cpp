/// Initial-data construction: trivial specs collapse to the constant
/// state, configured jumps and cusp seminorms are recovered by the
/// estimators, and the mollified elliptic solve converges with the
/// documented residuals and delta-trends.
#include <catch2/catch.hpp>

#include <cmath>

#include "patchns/initdata.hpp"

using namespace patchns;

namespace {

std::shared_ptr<ConstitutiveLaws> patch_laws() {
    LawPreset p;
    p.pressure_a = 1.0;
    p.pressure_gamma = 1.4;
    p.mu_base = 1.0;
    p.mu_slope = 0.2;
    p.lambda_b = 0.5;
    p.lambda_beta = 1.0;
    return std::make_shared<ConstitutiveLaws>(ConstitutiveLaws::from_preset(p));
}

}  // namespace

TEST_CASE("trivial spec collapses to the constant state with zero monitors") {
    auto laws = patch_laws();
    PatchSpec patch;
    patch.center = {4.0, 4.0};
    patch.radius = 0.5;
    patch.rho_in = 1.0;
    patch.rho_out = 1.0;
    InitialVelocitySpec vel;
    vel.center = patch.center;
    vel.delta = 0.1;
    FluidState st = build_initial_state(patch, vel, 64, 8.0, laws, 2, 128);
    CHECK(st.u.max_norm() == 0.0);
    for (size_t k = 0; k < st.rho.size(); ++k) CHECK(st.rho[k] == 1.0);

    SmallnessReport rep = smallness_report(st, 0.5, 42);
    CHECK(rep.c0 < 1e-25);               // probe roundoff squared
    CHECK(rep.composite.value < 1e-10);  // geometry factor times roundoff
}

TEST_CASE("piecewise-constant circle patch: measured density jump is the configured one") {
    auto laws = patch_laws();
    PatchSpec patch;
    patch.center = {4.0, 4.0};
    patch.radius = 0.5;
    patch.rho_in = 1.1;
    patch.rho_out = 1.0;
    InitialVelocitySpec vel;
    vel.center = patch.center;
    vel.delta = 0.1;
    const int n = 128;
    FluidState st = build_initial_state(patch, vel, n, 8.0, laws, 4, 256);

    VectorGrid grad_phi = fd4_gradient(st.levelset.phi);
    auto classify = levelset_classifier(st.levelset, grad_phi, st.h());
    // With r0 = 12h every probe stencil stays on one side of the curve,
    // so the piecewise-constant reconstruction is interpolated exactly.
    auto jumps = jumps_along_curve(st.rho, classify, st.curve, 12.0 * st.h(), 1.0);
    int valid = 0;
    for (const auto& j : jumps) {
        if (!j.valid) continue;
        ++valid;
        CHECK(j.jump == Approx(-0.1).margin(1e-10));
        CHECK(j.average == Approx(1.05).margin(1e-10));
    }
    CHECK(valid > st.curve.size() / 2);
}

TEST_CASE("star patch with a Hölder cusp has the configured seminorm") {
    auto laws = patch_laws();
    PatchSpec patch;
    patch.shape = PatchSpec::Shape::star;
    patch.center = {4.0, 4.0};
    patch.radius = 0.5;
    patch.star_modes = {3};
    patch.star_amps = {0.08};
    patch.star_phases = {0.0};
    patch.rho_in = 1.1;
    patch.rho_out = 1.0;
    patch.cusp_amp_in = 0.4;
    patch.cusp_anchor = {0.0, 0.0};  // at the patch center
    patch.alpha = 0.5;
    InitialVelocitySpec vel;
    vel.center = patch.center;
    vel.delta = 0.1;
    const int n = 256;
    FluidState st = build_initial_state(patch, vel, n, 8.0, laws, 4, 256);

    VectorGrid grad_phi = fd4_gradient(st.levelset.phi);
    auto classify = levelset_classifier(st.levelset, grad_phi, st.h());
    auto rng = make_rng(9, 1);
    // Sample near the cusp anchor where the sup quotient lives. The
    // profile itself is probed; its grid reconstruction is an O(h^2)
    // image of it (covered by the reconstruction tests).
    std::uniform_real_distribution<double> unif(-0.2, 0.2);
    auto sampler = [&](std::mt19937_64& r) {
        return wrap(patch.center + Vec2{unif(r), unif(r)}, 8.0);
    };
    FieldEval eval = [&](const Vec2& p) {
        return patch.density(p, laws->rho_tilde(), 8.0) - laws->rho_tilde();
    };
    auto est =
        holder_pw(eval, classify, +1, patch.alpha, 0.5, st.h(), 8.0, rng, 100000, sampler);
    CHECK(est.seminorm > 0.8 * patch.cusp_amp_in);
    CHECK(est.seminorm < 1.2 * patch.cusp_amp_in);

    // The reconstruction carries a finite seminorm of the right scale.
    ScalarGrid rho_dev = st.rho;
    for (size_t k = 0; k < rho_dev.size(); ++k) rho_dev[k] -= laws->rho_tilde();
    FieldEval grid_eval = [&](const Vec2& p) { return interp::bicubic(rho_dev, p); };
    auto grid_est =
        holder_pw(grid_eval, classify, +1, patch.alpha, 0.5, st.h(), 8.0, rng, 50000, sampler);
    CHECK(std::isfinite(grid_est.seminorm));
    CHECK(grid_est.seminorm > 0.4 * patch.cusp_amp_in);
}

TEST_CASE("elliptic solve: zero data, residuals, and independent recomputation") {
    auto laws = patch_laws();
    const int n = 64;
    const double L = 8.0;
    ScalarGrid rho0(n, L, 1.0);
    VectorGrid u0(n, L);
    auto sol = solve_initial_velocity(rho0, u0, 0.1, *laws);
    CHECK(sol.converged);
    CHECK(sol.u.max_norm() == 0.0);
    CHECK(sol.c_delta == 0.0);

    // Patch density with a bump velocity target.
    PatchSpec patch;
    patch.center = {4.0, 4.0};
    patch.radius = 0.5;
    patch.rho_in = 1.1;
    patch.rho_out = 1.0;
    rho0.fill_with([&](const Vec2& p) { return patch.density(p, 1.0, L); });
    InitialVelocitySpec vel;
    vel.center = {4.0, 4.0};
    vel.stream_amp = 0.2;
    vel.stream_radius = 1.5;
    vel.potential_amp = 0.05;
    vel.potential_radius = 1.5;
    u0.x.fill_with([&](const Vec2& p) { return vel.velocity(p, L).x; });
    u0.y.fill_with([&](const Vec2& p) { return vel.velocity(p, L).y; });
    auto sol2 = solve_initial_velocity(rho0, u0, 0.1, *laws);
    REQUIRE(sol2.converged);
    CHECK(sol2.residual < 1e-8);
    CHECK(sol2.c_delta > 0.0);

    // Recompute the discrete residual from scratch, including an
    // independent mollifier pass.
    ScalarGrid mu0(n, L), lam0(n, L), pdev(n, L);
    for (size_t k = 0; k < rho0.size(); ++k) {
        mu0[k] = laws->mu(rho0[k]);
        lam0[k] = laws->lambda(rho0[k]);
        pdev[k] = laws->P(rho0[k]) - laws->P_tilde();
    }
    VectorGrid Au = initdetail::elliptic_apply(sol2.u, mu0, lam0, sol2.c_delta);
    MatrixGrid Pi0 = initial_stress(rho0, u0, *laws);
    ScalarGrid w(n, L);
    const double delta = 0.1, s = delta / 3.0;
    double mass = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            Vec2 d = periodic_delta(w.point(i, j), Vec2{0.0, 0.0}, L);
            double r2 = d.norm2();
            double v = (r2 < delta * delta) ? std::exp(-r2 / (2.0 * s * s)) : 0.0;
            w(i, j) = v;
            mass += v;
        }
    w *= 1.0 / (mass * w.h() * w.h());
    Spectrum wh = fft_forward(w);
    MatrixGrid Pm(n, L);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            Pm.comp(a, b) = initdetail::convolve(Pi0.comp(a, b), wh, w.h() * w.h());
    VectorGrid b = spectral::divergence(Pm);
    b *= -1.0;
    b -= spectral::gradient(pdev);
    VectorGrid resid = Au;
    resid -= b;
    double bn = std::sqrt(initdetail::dot(b, b));
    CHECK(std::sqrt(initdetail::dot(resid, resid)) / bn < 1e-7);
}

TEST_CASE("delta sweep: H1 distance to the target decreases, c_delta shrinks") {
    auto laws = patch_laws();
    const int n = 128;
    const double L = 8.0;
    ScalarGrid rho0(n, L, 1.0);  // constant-density benchmark
    InitialVelocitySpec vel;
    vel.center = {4.0, 4.0};
    vel.stream_amp = 0.2;
    vel.stream_radius = 1.5;
    vel.delta = 0.1;
    VectorGrid u0(n, L);
    u0.x.fill_with([&](const Vec2& p) { return vel.velocity(p, L).x; });
    u0.y.fill_with([&](const Vec2& p) { return vel.velocity(p, L).y; });

    auto h1_dist = [&](const VectorGrid& a, const VectorGrid& b2) {
        VectorGrid d = a;
        d -= b2;
        MatrixGrid G = spectral::gradient_of(d);
        double acc = 0.0;
        for (size_t k = 0; k < d.x.size(); ++k)
            acc += d.x[k] * d.x[k] + d.y[k] * d.y[k] + G.xx[k] * G.xx[k] +
                   G.xy[k] * G.xy[k] + G.yx[k] * G.yx[k] + G.yy[k] * G.yy[k];
        return std::sqrt(acc) * d.x.h();
    };

    double prev_dist = -1.0, prev_cd = -1.0, prev_ratio = -1.0;
    for (double delta : {0.2, 0.1, 0.05}) {
        auto sol = solve_initial_velocity(rho0, u0, delta, *laws);
        REQUIRE(sol.converged);
        CHECK(sol.residual < 1e-8);
        double dist = h1_dist(sol.u, u0);
        if (prev_dist >= 0.0) CHECK(dist < prev_dist);
        if (prev_cd >= 0.0) CHECK(sol.c_delta <= prev_cd);
        prev_dist = dist;
        prev_cd = sol.c_delta;

        // Energy-bound ratio |grad u|^2 / (|Pi0|^2 + |Pdev|^2) stays stable.
        MatrixGrid G = spectral::gradient_of(sol.u);
        double gnorm = 0.0;
        for (size_t k = 0; k < G.xx.size(); ++k)
            gnorm += G.xx[k] * G.xx[k] + G.xy[k] * G.xy[k] + G.yx[k] * G.yx[k] +
                     G.yy[k] * G.yy[k];
        gnorm *= G.xx.h() * G.xx.h();
        MatrixGrid Pi0 = initial_stress(rho0, u0, *laws);
        double pin = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b2 = 0; b2 < 2; ++b2) {
                double l2 = Pi0.comp(a, b2).l2_norm();
                pin += l2 * l2;
            }
        double ratio = gnorm / pin;  // Pdev = 0 on this benchmark
        if (prev_ratio >= 0.0) CHECK(ratio == Approx(prev_ratio).epsilon(1.0));
        prev_ratio = ratio;
    }
}

TEST_CASE("smallness report components match independent quadrature") {
    auto laws = patch_laws();
    PatchSpec patch;
    patch.center = {4.0, 4.0};
    patch.radius = 0.5;
    patch.rho_in = 1.1;
    patch.rho_out = 1.0;
    InitialVelocitySpec vel;
    vel.center = patch.center;
    vel.stream_amp = 0.1;
    vel.stream_radius = 1.5;
    vel.delta = 0.1;
    const int n = 128;
    const double L = 8.0;
    FluidState st = build_initial_state(patch, vel, n, L, laws, 2, 256);
    SmallnessReport rep = smallness_report(st, 0.5, 7);

    // Independent L2 of the density deviation by direct summation.
    double acc = 0.0;
    for (size_t k = 0; k < st.rho.size(); ++k) {
        double d = st.rho[k] - 1.0;
        acc += d * d;
    }
    double l2 = std::sqrt(acc) * st.h();
    CHECK(rep.rho_dev_l2 == Approx(l2).epsilon(1e-12));

    // H1 norm cross-checked with 4th-order finite differences on a
    // smooth velocity (the constant-density benchmark keeps grad u
    // continuous, so both estimators agree to quadrature accuracy).
    {
        PatchSpec flat = patch;
        flat.rho_in = 1.0;
        flat.rho_out = 1.0;
        InitialVelocitySpec vsm = vel;
        vsm.delta = 0.3;  // resolved mollifier keeps u smooth at this n
        FluidState sm = build_initial_state(flat, vsm, n, L, laws, 2, 256);
        SmallnessReport srep = smallness_report(sm, 0.5, 7);
        VectorGrid gx = fd4_gradient(sm.u.x), gy = fd4_gradient(sm.u.y);
        double h1 = 0.0;
        for (size_t k = 0; k < sm.u.x.size(); ++k)
            h1 += sm.u.x[k] * sm.u.x[k] + sm.u.y[k] * sm.u.y[k] + gx.x[k] * gx.x[k] +
                  gx.y[k] * gx.y[k] + gy.x[k] * gy.x[k] + gy.y[k] * gy.y[k];
        h1 *= sm.h() * sm.h();
        CHECK(srep.u_h1_sq == Approx(h1).epsilon(0.01));
    }

    // The measured density jump enters c0 at the configured 0.1 scale.
    CHECK(rep.jump_rho_linf == Approx(0.1).margin(5e-3));
    CHECK(rep.c0 > 0.0);
    CHECK(rep.c0 ==
          Approx(rep.u_h1_sq +
                 std::pow(std::max(rep.rho_dev_l2, rep.rho_dev_pw.total()), 2.0) +
                 std::pow(std::max(rep.jump_rho_l4, rep.jump_rho_linf), 2.0))
              .epsilon(1e-12));
}

TEST_CASE("mollifier width outside (0,1) rejected") {
    auto laws = patch_laws();
    ScalarGrid rho0(32, 8.0, 1.0);
    VectorGrid u0(32, 8.0);
    CHECK_THROWS_AS(solve_initial_velocity(rho0, u0, 0.0, *laws), std::invalid_argument);
    CHECK_THROWS_AS(solve_initial_velocity(rho0, u0, 1.5, *laws), std::invalid_argument);
}
