/// Fourier operator tests: symbol exactness on single modes, the
/// K/K' contraction identities, finite-difference and brute-force
/// convolution oracles, and bicubic interpolation accuracy.
#include <catch2/catch.hpp>

#include <complex>
#include <random>

#include "patchns/interp.hpp"
#include "patchns/spectral.hpp"

using namespace patchns;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

ScalarGrid mode_field(int n, double L, int mx, int my, double amp = 1.0, double phase = 0.0) {
    ScalarGrid f(n, L);
    f.fill_with([&](const Vec2& p) {
        return amp * std::cos(kTwoPi * (mx * p.x + my * p.y) / L + phase);
    });
    return f;
}

/// Random band-limited field with modes up to mmax.
ScalarGrid random_band_limited(int n, double L, int mmax, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> amp(-1.0, 1.0), ph(0.0, kTwoPi);
    ScalarGrid f(n, L, 0.0);
    for (int mx = 0; mx <= mmax; ++mx)
        for (int my = -mmax; my <= mmax; ++my) {
            if (mx == 0 && my <= 0) continue;
            f += mode_field(n, L, mx, my, amp(rng), ph(rng));
        }
    return f;
}

VectorGrid random_band_limited_vec(int n, double L, int mmax, std::mt19937_64& rng) {
    return {random_band_limited(n, L, mmax, rng), random_band_limited(n, L, mmax, rng)};
}

/// 4th-order centered finite difference in x on the periodic samples.
ScalarGrid fd4_ddx(const ScalarGrid& f) {
    int n = f.n();
    int mask = n - 1;
    double c = 1.0 / (12.0 * f.h());
    ScalarGrid g(n, f.L());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            g(i, j) = c * (-f((i + 2) & mask, j) + 8.0 * f((i + 1) & mask, j) -
                           8.0 * f((i - 1) & mask, j) + f((i - 2) & mask, j));
    return g;
}

ScalarGrid fd4_ddy(const ScalarGrid& f) {
    int n = f.n();
    int mask = n - 1;
    double c = 1.0 / (12.0 * f.h());
    ScalarGrid g(n, f.L());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            g(i, j) = c * (-f(i, (j + 2) & mask) + 8.0 * f(i, (j + 1) & mask) -
                           8.0 * f(i, (j - 1) & mask) + f(i, (j - 2) & mask));
    return g;
}

}  // namespace

TEST_CASE("gradient: single mode and constant") {
    const int n = 64;
    const double L = 2.0;
    ScalarGrid f = mode_field(n, L, 1, 0);
    VectorGrid g = spectral::gradient(f);
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double x = i * f.h();
            worst = std::max(worst, std::abs(g.x(i, j) + kTwoPi / L * std::sin(kTwoPi * x / L)));
            worst = std::max(worst, std::abs(g.y(i, j)));
        }
    CHECK(worst < 1e-12);

    ScalarGrid c(n, L, 3.7);
    VectorGrid gc = spectral::gradient(c);
    CHECK(gc.x.max_abs() < 1e-13);
    CHECK(gc.y.max_abs() < 1e-13);
}

TEST_CASE("gradient rejects non-finite input") {
    ScalarGrid f(16, 1.0);
    f(3, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(spectral::gradient(f), std::invalid_argument);
}

TEST_CASE("gradient matches 4th-order finite differences at O(h^4)") {
    auto rng = make_rng(7, 1);
    const double L = 3.0;
    double err[2];
    int idx = 0;
    for (int n : {64, 128}) {
        auto rng_n = make_rng(7, 1);  // same field at both resolutions
        ScalarGrid f = random_band_limited(n, L, 8, rng_n);
        VectorGrid g = spectral::gradient(f);
        ScalarGrid dx = fd4_ddx(f), dy = fd4_ddy(f);
        double e = 0.0;
        for (size_t k = 0; k < f.size(); ++k)
            e = std::max({e, std::abs(g.x[k] - dx[k]), std::abs(g.y[k] - dy[k])});
        err[idx++] = e;
    }
    // FD4 truncation decays like h^4: halving h should shrink the gap ~16x.
    CHECK(err[0] / err[1] > 12.0);
    (void)rng;
}

TEST_CASE("divergence and rot2: constants and stream function") {
    const int n = 64;
    const double L = 2.0;
    VectorGrid v(n, L);
    v.x = ScalarGrid(n, L, 1.5);
    v.y = ScalarGrid(n, L, -0.5);
    CHECK(spectral::divergence(v).max_abs() < 1e-13);
    CHECK(spectral::rot2(v).max_abs() < 1e-13);

    // v = grad-perp(psi), psi = cos(2 pi x / L): div v = 0, rot2 v = Lap psi.
    ScalarGrid psi = mode_field(n, L, 1, 0);
    VectorGrid gp = spectral::gradient(psi);
    VectorGrid vperp(n, L);
    vperp.x = -1.0 * gp.y;
    vperp.y = gp.x;
    CHECK(spectral::divergence(vperp).max_abs() < 1e-12);
    ScalarGrid rot = spectral::rot2(vperp);
    double kk = kTwoPi / L;
    double worst = 0.0;
    for (size_t k = 0; k < rot.size(); ++k)
        worst = std::max(worst, std::abs(rot[k] + kk * kk * psi[k]));
    CHECK(worst < 1e-11);
}

TEST_CASE("divergence and rot2 match finite-difference oracle") {
    const double L = 5.0;
    double err_div[2], err_rot[2];
    int idx = 0;
    for (int n : {64, 128}) {
        auto rng = make_rng(21, 2);
        VectorGrid v = random_band_limited_vec(n, L, 8, rng);
        ScalarGrid dv = spectral::divergence(v);
        ScalarGrid rv = spectral::rot2(v);
        ScalarGrid dv_fd = fd4_ddx(v.x) + fd4_ddy(v.y);
        ScalarGrid rv_fd = fd4_ddx(v.y) - fd4_ddy(v.x);
        double ed = 0.0, er = 0.0;
        for (size_t k = 0; k < dv.size(); ++k) {
            ed = std::max(ed, std::abs(dv[k] - dv_fd[k]));
            er = std::max(er, std::abs(rv[k] - rv_fd[k]));
        }
        err_div[idx] = ed;
        err_rot[idx] = er;
        ++idx;
    }
    CHECK(err_div[0] / err_div[1] > 12.0);
    CHECK(err_rot[0] / err_rot[1] > 12.0);
}

TEST_CASE("inv_laplacian on single modes") {
    const int n = 64;
    const double L = 4.0;
    ScalarGrid f = mode_field(n, L, 1, 0);
    ScalarGrid g = spectral::inv_laplacian(f);
    double scale = (L / kTwoPi) * (L / kTwoPi);
    double worst = 0.0;
    for (size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(g[k] - scale * f[k]));
    CHECK(worst < 1e-12 * scale);

    ScalarGrid c(n, L, 2.0);
    CHECK(spectral::inv_laplacian(c).max_abs() < 1e-13);

    ScalarGrid diag = mode_field(n, L, 1, 1);
    ScalarGrid gd = spectral::inv_laplacian(diag);
    worst = 0.0;
    for (size_t k = 0; k < gd.size(); ++k)
        worst = std::max(worst, std::abs(gd[k] - 0.5 * scale * diag[k]));
    CHECK(worst < 1e-12 * scale);
}

TEST_CASE("inv_laplacian inverts -Lap on zero-mean band-limited fields") {
    auto rng = make_rng(3, 3);
    const int n = 64;
    const double L = 1.0;
    ScalarGrid f = random_band_limited(n, L, 10, rng);
    ScalarGrid lap = spectral::laplacian(f);
    ScalarGrid back = spectral::inv_laplacian(-1.0 * lap);
    double worst = 0.0;
    for (size_t k = 0; k < f.size(); ++k) worst = std::max(worst, std::abs(back[k] - f[k]));
    CHECK(worst < 1e-11 * std::max(1.0, f.max_abs()));
}

TEST_CASE("riesz2 symbols") {
    const int n = 64;
    const double L = 2.0;
    ScalarGrid f = mode_field(n, L, 1, 0);
    ScalarGrid r11 = spectral::riesz2(f, 0, 0);
    double worst = 0.0;
    for (size_t k = 0; k < f.size(); ++k) worst = std::max(worst, std::abs(r11[k] - f[k]));
    CHECK(worst < 1e-12);

    ScalarGrid c(n, L, 5.0);
    CHECK(spectral::riesz2(c, 0, 1).max_abs() < 1e-13);

    ScalarGrid diag = mode_field(n, L, 1, 1);
    ScalarGrid r12 = spectral::riesz2(diag, 0, 1);
    worst = 0.0;
    for (size_t k = 0; k < diag.size(); ++k)
        worst = std::max(worst, std::abs(r12[k] - 0.5 * diag[k]));
    CHECK(worst < 1e-12);
}

TEST_CASE("every operator reproduces its multiplier on pure modes") {
    const int n = 64;
    const double L = 3.0;
    const double k0 = kTwoPi / L;
    struct Mode {
        int mx, my;
    };
    for (Mode m : {Mode{1, 0}, Mode{0, 2}, Mode{3, 5}, Mode{2, -7}}) {
        ScalarGrid f = mode_field(n, L, m.mx, m.my, 1.3, 0.4);
        ScalarGrid fs = mode_field(n, L, m.mx, m.my, 1.3, 0.4 - M_PI / 2.0);  // sine partner
        double kx = k0 * m.mx, ky = k0 * m.my, k2 = kx * kx + ky * ky;

        // gradient: cos -> -k sin
        VectorGrid g = spectral::gradient(f);
        double worst = 0.0;
        for (size_t k = 0; k < f.size(); ++k) {
            worst = std::max(worst, std::abs(g.x[k] + kx * fs[k]));
            worst = std::max(worst, std::abs(g.y[k] + ky * fs[k]));
        }
        CHECK(worst < 1e-12 * (1.0 + std::abs(kx) + std::abs(ky)));

        // inv_laplacian: 1/k^2
        ScalarGrid il = spectral::inv_laplacian(f);
        worst = 0.0;
        for (size_t k = 0; k < f.size(); ++k)
            worst = std::max(worst, std::abs(il[k] - f[k] / k2));
        CHECK(worst < 1e-12);

        // riesz2: kj kk / k^2
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                double ka = a == 0 ? kx : ky, kb = b == 0 ? kx : ky;
                ScalarGrid r = spectral::riesz2(f, a, b);
                worst = 0.0;
                for (size_t k = 0; k < f.size(); ++k)
                    worst = std::max(worst, std::abs(r[k] - ka * kb / k2 * f[k]));
                CHECK(worst < 1e-12);
            }
    }
}

TEST_CASE("K of a divergence-free shear vanishes") {
    const int n = 64;
    const double L = 2.0;
    VectorGrid u(n, L);
    u.x.fill_with([&](const Vec2& p) { return std::sin(kTwoPi * p.y / L); });
    MatrixGrid Du = spectral::sym_gradient(u);
    CHECK(spectral::K_op(Du).max_abs() < 1e-12);
}

TEST_CASE("K and K' of constant-diagonal matrices vanish") {
    const int n = 32;
    const double L = 1.0;
    MatrixGrid M(n, L);
    M.xx = ScalarGrid(n, L, 2.0);
    M.yy = ScalarGrid(n, L, 2.0);
    CHECK(spectral::K_op(M).max_abs() < 1e-13);
    CHECK(spectral::Kp_op(M).max_abs() < 1e-13);
}

TEST_CASE("K_op rejects asymmetric input") {
    const int n = 32;
    MatrixGrid M(n, 1.0);
    M.xy = ScalarGrid(n, 1.0, 1.0);
    M.yx = ScalarGrid(n, 1.0, -1.0);
    CHECK_THROWS_AS(spectral::K_op(M), std::invalid_argument);
}

TEST_CASE("contraction identities: K(Du) = -2 div u, K'(Du) = -rot2 u") {
    const double L = 7.0;
    const int n = 64;
    for (int trial = 0; trial < 20; ++trial) {
        auto rng = make_rng(100 + trial, 4);
        VectorGrid u = random_band_limited_vec(n, L, 10, rng);
        MatrixGrid Du = spectral::sym_gradient(u);
        ScalarGrid divu = spectral::divergence(u);
        ScalarGrid rotu = spectral::rot2(u);
        ScalarGrid k = spectral::K_op(Du);
        ScalarGrid kp = spectral::Kp_op(Du);
        double worst_k = 0.0, worst_kp = 0.0;
        for (size_t i = 0; i < k.size(); ++i) {
            worst_k = std::max(worst_k, std::abs(k[i] + 2.0 * divu[i]));
            worst_kp = std::max(worst_kp, std::abs(kp[i] + rotu[i]));
        }
        CHECK(worst_k < 1e-10);
        CHECK(worst_kp < 1e-10);
    }
}

TEST_CASE("windowed rigid rotation: K'(Du) tracks -rot2 u") {
    const int n = 128;
    const double L = 8.0;
    VectorGrid u(n, L);
    // (-y, x) around the center, windowed by a band-limited envelope
    u.x.fill_with([&](const Vec2& p) {
        double wx = 0.5 * (1.0 + std::cos(kTwoPi * (p.x - L / 2) / L));
        double wy = 0.5 * (1.0 + std::cos(kTwoPi * (p.y - L / 2) / L));
        return -(p.y - L / 2) * wx * wy;
    });
    u.y.fill_with([&](const Vec2& p) {
        double wx = 0.5 * (1.0 + std::cos(kTwoPi * (p.x - L / 2) / L));
        double wy = 0.5 * (1.0 + std::cos(kTwoPi * (p.y - L / 2) / L));
        return (p.x - L / 2) * wx * wy;
    });
    MatrixGrid Du = spectral::sym_gradient(u);
    ScalarGrid kp = spectral::Kp_op(Du);
    ScalarGrid rot = spectral::rot2(u);
    double worst = 0.0;
    for (size_t i = 0; i < kp.size(); ++i) worst = std::max(worst, std::abs(kp[i] + rot[i]));
    CHECK(worst < 1e-9 * rot.max_abs());
}

namespace {

/// Brute-force O(n^4) reference for [K, a] M on small grids: direct DFT,
/// explicit convolution in mode space, K symbol, direct inverse DFT. No
/// dealiasing; callers keep products inside the resolved band.
ScalarGrid commutator_bruteforce(const ScalarGrid& a, const MatrixGrid& M, bool kprime) {
    const int n = a.n();
    const double L = a.L();
    const double k0 = kTwoPi / L;
    using cd = std::complex<double>;
    auto dft = [&](const ScalarGrid& f) {
        std::vector<cd> F(size_t(n) * n);
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx) {
                cd acc = 0.0;
                for (int j = 0; j < n; ++j)
                    for (int i = 0; i < n; ++i)
                        acc += f(i, j) *
                               std::exp(cd(0.0, -kTwoPi * (double(kx * i + ky * j)) / n));
                F[size_t(ky) * n + kx] = acc / double(n * n);
            }
        return F;
    };
    auto idft_at = [&](const std::vector<cd>& F, int i, int j) {
        cd acc = 0.0;
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx)
                acc += F[size_t(ky) * n + kx] *
                       std::exp(cd(0.0, kTwoPi * (double(kx * i + ky * j)) / n));
        return acc.real();
    };
    auto conv = [&](const std::vector<cd>& A, const std::vector<cd>& B) {
        std::vector<cd> C(size_t(n) * n, 0.0);
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx)
                for (int qy = 0; qy < n; ++qy)
                    for (int qx = 0; qx < n; ++qx) {
                        int rx = (kx - qx + n) % n, ry = (ky - qy + n) % n;
                        C[size_t(ky) * n + kx] += A[size_t(qy) * n + qx] * B[size_t(ry) * n + rx];
                    }
        return C;
    };
    auto wave = [&](int m) { return m <= n / 2 ? k0 * m : k0 * (m - n); };
    auto K_apply = [&](const std::vector<cd> comps[2][2]) {
        std::vector<cd> out(size_t(n) * n, 0.0);
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx) {
                double wx = wave(kx), wy = wave(ky);
                double k2 = wx * wx + wy * wy;
                if (k2 == 0.0) continue;
                for (int jj = 0; jj < 2; ++jj)
                    for (int kk = 0; kk < 2; ++kk) {
                        double kj = kprime ? (jj == 0 ? -wy : wx) : (jj == 0 ? wx : wy);
                        double kk_ = kk == 0 ? wx : wy;
                        out[size_t(ky) * n + kx] +=
                            comps[jj][kk][size_t(ky) * n + kx] * (-2.0 * kj * kk_ / k2);
                    }
            }
        return out;
    };

    std::vector<cd> Ah = dft(a);
    std::vector<cd> Mh[2][2] = {{dft(M.xx), dft(M.xy)}, {dft(M.yx), dft(M.yy)}};
    std::vector<cd> aMh[2][2];
    for (int jj = 0; jj < 2; ++jj)
        for (int kk = 0; kk < 2; ++kk) aMh[jj][kk] = conv(Ah, Mh[jj][kk]);
    std::vector<cd> K_aM = K_apply(aMh);
    std::vector<cd> K_M = K_apply(Mh);
    std::vector<cd> a_KM = conv(Ah, K_M);
    ScalarGrid out(n, L);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out(i, j) = idft_at(K_aM, i, j) - idft_at(a_KM, i, j);
    return out;
}

}  // namespace

TEST_CASE("commutator with a constant multiplier vanishes") {
    const int n = 64;
    const double L = 2.0;
    auto rng = make_rng(5, 5);
    VectorGrid u = random_band_limited_vec(n, L, 6, rng);
    MatrixGrid Du = spectral::sym_gradient(u);
    ScalarGrid a(n, L, 4.2);
    CHECK(spectral::commutator_K(a, Du, spectral::Kind::K).max_abs() < 1e-12);
    CHECK(spectral::commutator_K(a, Du, spectral::Kind::Kprime).max_abs() < 1e-12);

    MatrixGrid Z(n, L);
    ScalarGrid b = random_band_limited(n, L, 6, rng);
    CHECK(spectral::commutator_K(b, Z, spectral::Kind::K).max_abs() < 1e-14);
}

TEST_CASE("commutator matches brute-force convolution oracle on n=16") {
    const int n = 16;
    const double L = 2.0;
    ScalarGrid a = mode_field(n, L, 1, 2, 0.7, 0.3);
    MatrixGrid M(n, L);
    M.xx = mode_field(n, L, 2, 1, 1.1, 0.9);
    M.xy = mode_field(n, L, 1, 1, -0.4, 0.2);
    M.yx = M.xy;
    M.yy = mode_field(n, L, 0, 2, 0.8, 1.7);
    for (bool kprime : {false, true}) {
        ScalarGrid got = spectral::commutator_K(
            a, M, kprime ? spectral::Kind::Kprime : spectral::Kind::K);
        ScalarGrid want = commutator_bruteforce(a, M, kprime);
        double worst = 0.0;
        for (size_t k = 0; k < got.size(); ++k)
            worst = std::max(worst, std::abs(got[k] - want[k]));
        CHECK(worst < 1e-11);
    }
}

TEST_CASE("interpolation: constants, analytic value, Fourier-sum oracle") {
    const double L = 4.0;
    ScalarGrid c(64, L, 3.3);
    CHECK(interp::bicubic(c, 1.234, 2.345) == Approx(3.3).margin(1e-13));

    ScalarGrid f = mode_field(128, L, 1, 0);
    CHECK(std::abs(interp::bicubic(f, L / 4.0, 1.0)) < 1e-6);

    // Exact evaluation by direct Fourier summation as the oracle.
    double err[2];
    int idx = 0;
    for (int n : {32, 64}) {
        auto rng = make_rng(11, 6);
        ScalarGrid g = random_band_limited(n, L, 5, rng);
        Spectrum s = fft_forward(g);
        auto exact = [&](double x, double y) {
            std::complex<double> acc = 0.0;
            for (int jy = 0; jy < n; ++jy) {
                int my = s.my(jy);
                for (int mx = 0; mx <= n / 2; ++mx) {
                    std::complex<double> e =
                        std::exp(std::complex<double>(0.0, kTwoPi * (mx * x + my * y) / L));
                    double mult = (mx == 0 || mx == n / 2) ? 1.0 : 2.0;
                    acc += mult * (s.at(mx, jy) * e).real();
                }
            }
            return acc.real() / double(n * n);
        };
        auto prng = make_rng(12, 7);
        std::uniform_real_distribution<double> unif(0.0, L);
        double e = 0.0;
        for (int t = 0; t < 200; ++t) {
            double x = unif(prng), y = unif(prng);
            e = std::max(e, std::abs(interp::bicubic(g, x, y) - exact(x, y)));
        }
        err[idx++] = e;
    }
    CHECK(err[0] / err[1] > 10.0);  // O(h^4) between n=32 and n=64
}

TEST_CASE("interpolation exact on locally bilinear data") {
    const int n = 64;
    const double L = 1.0;
    ScalarGrid f(n, L);
    // Bilinear in a window; only probe well inside it.
    f.fill_with([&](const Vec2& p) { return 2.0 + 3.0 * p.x - p.y + 5.0 * p.x * p.y; });
    double h = f.h();
    for (double x : {0.3, 0.45, 0.5}) {
        for (double y : {0.31, 0.52}) {
            double want = 2.0 + 3.0 * x - y + 5.0 * x * y;
            CHECK(interp::bicubic(f, x, y) == Approx(want).margin(1e-12));
        }
    }
    (void)h;
}
