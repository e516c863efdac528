/// Law-family tests: closed forms of the damped variable f, inversion
/// round trips, potential energies against an independent Gauss-Kronrod
/// oracle, and the difference-quotient bounds.
#include <catch2/catch.hpp>

#include <cmath>

#include "patchns/constitutive.hpp"

using namespace patchns;

namespace {

// Gauss-Kronrod 15-point rule (QUADPACK constants), composited on a
// fixed fine subdivision. Independent of the library quadrature path.
double gk15(const std::function<double(double)>& f, double a, double b) {
    static const double xk[8] = {0.0,
                                 0.207784955007898468,
                                 0.405845151377397167,
                                 0.586087235467691130,
                                 0.741531185599394440,
                                 0.864864423359769073,
                                 0.949107912342758525,
                                 0.991455371120812639};
    static const double wk[8] = {0.209482141084727828, 0.204432940075298892,
                                 0.190350578064785410, 0.169004726639267903,
                                 0.140653259715525919, 0.104790010322250184,
                                 0.063092092629978553, 0.022935322010529225};
    const int panels = 64;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double pa = a + (b - a) * p / panels;
        double pb = a + (b - a) * (p + 1) / panels;
        double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
        double acc = wk[0] * f(mid);
        for (int i = 1; i < 8; ++i)
            acc += wk[i] * (f(mid - half * xk[i]) + f(mid + half * xk[i]));
        total += acc * half;
    }
    return total;
}

ConstitutiveLaws log_laws() {  // mu = 1, lambda = 0 => f = 2 ln(rho)
    LawPreset p;
    p.pressure_a = 1.0;
    p.pressure_gamma = 1.0;
    p.mu_base = 1.0;
    return ConstitutiveLaws::from_preset(p);
}

}  // namespace

TEST_CASE("f closed forms") {
    auto laws = log_laws();
    CHECK(laws.f(std::exp(1.0)) == Approx(2.0).epsilon(1e-13));
    CHECK(laws.f(1.0) == 0.0);

    LawPreset p;
    p.pressure_gamma = 1.0;
    p.mu_base = 1.0;
    p.mu_slope = 0.1;
    p.lambda_b = 1.0;
    p.lambda_beta = 1.0;  // lambda = rho
    auto laws2 = ConstitutiveLaws::from_preset(p);
    double oracle =
        gk15([&](double s) { return (2.0 * (1.0 + 0.1 * (s - 1.0)) + s) / s; }, 1.0, 2.0);
    CHECK(laws2.f(2.0) == Approx(oracle).margin(1e-10));
}

TEST_CASE("f rejects densities outside the band") {
    auto laws = log_laws();
    CHECK_THROWS_AS(laws.f(0.01), std::invalid_argument);
    CHECK_THROWS_AS(laws.f(100.0), std::invalid_argument);
}

TEST_CASE("f_inverse: exact values and round trip") {
    auto laws = log_laws();
    CHECK(laws.f_inverse(0.0) == 1.0);
    CHECK(laws.f_inverse(2.0 * std::log(2.0)) == Approx(2.0).epsilon(1e-12));

    LawPreset p;
    p.pressure_gamma = 1.4;
    p.mu_base = 1.0;
    p.mu_slope = 0.2;
    p.lambda_b = 0.5;
    p.lambda_beta = 1.0;
    auto laws2 = ConstitutiveLaws::from_preset(p);
    for (int i = 0; i < 1000; ++i) {
        double rho = 0.3 + (3.5 - 0.3) * i / 999.0;
        CHECK(laws2.f_inverse(laws2.f(rho)) == Approx(rho).epsilon(1e-10));
    }
    CHECK_THROWS_AS(laws2.f_inverse(1e9), invalid_state);
}

TEST_CASE("potential energies") {
    auto laws = log_laws();  // P = rho, rho_tilde = 1
    CHECK(laws.potential_energy(1.0, 1.0) == 0.0);
    CHECK(laws.potential_energy(1.0, 3.0) == 0.0);
    // H_1(2) = 2 (ln 2 + 1/2 - 1)
    CHECK(laws.potential_energy(2.0, 1.0) ==
          Approx(2.0 * (std::log(2.0) + 0.5 - 1.0)).epsilon(1e-12));

    // Quadrature oracle for fractional l on a gamma law.
    LawPreset p;
    p.pressure_a = 2.0;
    p.pressure_gamma = 1.4;
    p.mu_base = 1.0;
    auto g = ConstitutiveLaws::from_preset(p);
    double Pt = 2.0;
    for (double l : {1.0, 2.0, 3.0}) {
        for (double rho : {0.6, 1.7, 2.9}) {
            double oracle = rho * gk15(
                                      [&](double s) {
                                          double d = 2.0 * std::pow(s, 1.4) - Pt;
                                          return std::pow(std::abs(d), l - 1.0) * d / (s * s);
                                      },
                                      1.0, rho);
            CHECK(g.potential_energy(rho, l) == Approx(oracle).margin(1e-9));
            CHECK(g.potential_energy(rho, l) >= 0.0);
        }
    }
}

TEST_CASE("H_l satisfies rho H' - H = |P - Pt|^{l-1} (P - Pt)") {
    LawPreset p;
    p.pressure_a = 1.5;
    p.pressure_gamma = 2.0;
    p.mu_base = 1.0;
    auto laws = ConstitutiveLaws::from_preset(p);
    const double eps = 1e-5;
    for (double l : {1.0, 2.0}) {
        for (double rho : {0.7, 1.3, 2.1}) {
            double Hp = (laws.potential_energy(rho + eps, l) -
                         laws.potential_energy(rho - eps, l)) /
                        (2.0 * eps);
            double lhs = rho * Hp - laws.potential_energy(rho, l);
            double d = laws.P(rho) - laws.P_tilde();
            double rhs = std::pow(std::abs(d), l - 1.0) * d;
            CHECK(lhs == Approx(rhs).margin(1e-6 * std::max(1.0, std::abs(rhs))));
        }
    }
}

TEST_CASE("H_l convex near the reference state for gamma presets") {
    for (double gamma : {1.0, 1.4, 2.0}) {
        LawPreset p;
        p.pressure_gamma = gamma;
        p.mu_base = 1.0;
        auto laws = ConstitutiveLaws::from_preset(p);
        double d = 0.05;
        for (double rho : {0.9, 1.0, 1.1}) {
            double second = laws.potential_energy(rho + d, 1.0) -
                            2.0 * laws.potential_energy(rho, 1.0) +
                            laws.potential_energy(rho - d, 1.0);
            CHECK(second >= -1e-12);
        }
    }
}

TEST_CASE("nu bounds: proportional laws give (1, 1)") {
    // P = rho, 2 mu + lambda = rho  =>  f = rho - rho_tilde = P - Pt
    LawPreset p;
    p.pressure_a = 1.0;
    p.pressure_gamma = 1.0;
    p.mu_base = 0.5;
    p.mu_slope = 0.5;
    auto laws = ConstitutiveLaws::from_preset(p);
    auto nu = laws.nu_bounds(400);
    CHECK(nu.lo == Approx(1.0).epsilon(1e-9));
    // |d mu / d f| = 1/2 here, dominated by the pressure quotient.
    CHECK(nu.hi == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("nu bounds: linear pressure with constant viscosity") {
    LawPreset p;
    p.pressure_a = 1.0;
    p.pressure_gamma = 1.0;
    p.mu_base = 1.0;
    p.band_lo = 0.5;
    p.band_hi = 2.0;
    auto laws = ConstitutiveLaws::from_preset(p);
    auto nu = laws.nu_bounds(2000);
    // ratio = (r - r') / (2 (ln r - ln r')) in [0.25, 1] on [0.5, 2]
    CHECK(nu.lo == Approx(0.25).epsilon(2e-3));
    CHECK(nu.hi == Approx(1.0).epsilon(2e-3));
    CHECK(nu.resolution == 2000);
}

TEST_CASE("nu bounds collapse to the coincidence limit on shrinking bands") {
    LawPreset p;
    p.pressure_a = 1.0;
    p.pressure_gamma = 1.4;
    p.mu_base = 1.0;
    p.lambda_b = 0.5;
    p.lambda_beta = 1.0;
    double want = 1.0 * 1.4 / (2.0 + 0.5);  // rho P' / (2 mu + lambda) at rho_tilde
    for (double w : {0.5, 0.1, 0.02}) {
        LawPreset q = p;
        q.band_lo = 1.0 - w;
        q.band_hi = 1.0 + w;
        auto laws = ConstitutiveLaws::from_preset(q);
        auto nu = laws.nu_bounds(300);
        CHECK(std::abs(nu.lo - want) < 3.0 * w);
        // mu and lambda quotients stay below the pressure quotient here
        CHECK(std::abs(nu.hi - want) < 3.0 * w);
    }
}

TEST_CASE("viscosity jump dominated by nu_hi times f jump") {
    LawPreset p;
    p.pressure_gamma = 1.4;
    p.mu_base = 1.0;
    p.mu_slope = 0.3;
    p.lambda_b = 0.2;
    p.lambda_beta = 2.0;
    auto laws = ConstitutiveLaws::from_preset(p);
    auto nu = laws.nu_bounds(500);
    CHECK(nu.lo > 0.0);
    auto rng_vals = {0.41, 0.77, 1.11, 1.63, 2.49, 3.3};
    for (double r1 : rng_vals)
        for (double r2 : rng_vals) {
            if (r1 == r2) continue;
            double dmu = std::abs(laws.mu(r1) - laws.mu(r2));
            double df = std::abs(laws.f(r1) - laws.f(r2));
            CHECK(dmu <= nu.hi * df * (1.0 + 1e-9));
        }
}

TEST_CASE("f strictly increasing on the band") {
    LawPreset p;
    p.pressure_gamma = 1.4;
    p.mu_base = 2.0;
    p.mu_slope = -0.3;  // decreasing mu, still positive on band
    p.lambda_b = 1.0;
    p.lambda_beta = 1.0;
    auto laws = ConstitutiveLaws::from_preset(p);
    double prev = laws.f(laws.band_lo());
    for (int i = 1; i <= 200; ++i) {
        double r = laws.band_lo() + (laws.band_hi() - laws.band_lo()) * i / 200.0;
        double fr = laws.f(r);
        CHECK(fr > prev);
        prev = fr;
    }
}

TEST_CASE("invalid presets rejected") {
    LawPreset p;
    p.mu_base = 1.0;
    p.mu_slope = -2.0;  // mu goes negative on the default band
    CHECK_THROWS_AS(ConstitutiveLaws::from_preset(p), std::invalid_argument);

    LawPreset q;
    q.pressure_a = -1.0;  // P' < 0
    CHECK_THROWS_AS(ConstitutiveLaws::from_preset(q), std::invalid_argument);
}

TEST_CASE("custom callables use the quadrature path") {
    auto laws = ConstitutiveLaws::from_callables(
        [](double r) { return r * r; }, [](double r) { return 2.0 * r; },
        [](double) { return 1.0; }, [](double) { return 0.0; },
        [](double r) { return r; }, [](double) { return 1.0; }, 1.0, 0.4, 3.0);
    // f = int (2 + s)/s = 2 ln(rho) + rho - 1
    for (double rho : {0.5, 1.7, 2.8}) {
        double want = 2.0 * std::log(rho) + rho - 1.0;
        CHECK(laws.f(rho) == Approx(want).epsilon(1e-10));
    }
}
