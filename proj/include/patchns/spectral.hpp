#pragma once

#include <complex>
#include <stdexcept>

#include "patchns/fft.hpp"
#include "patchns/grid.hpp"

namespace patchns {
namespace spectral {

// Fourier-side differential and singular operators on the torus [0,L)^2.
// All inverse/singular operators set the k=0 mode to zero (they act on
// mean-zero data). Odd derivatives zero the Nyquist mode of the
// differentiated axis so that real fields map to real fields.

namespace detail {

inline void check_finite(const ScalarGrid& f, const char* who) {
    if (!f.finite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

inline bool nyquist_x(int n, int mx) { return mx == n / 2; }
inline bool nyquist_y(int n, int my) { return my == n / 2 || my == -n / 2; }

/// d/dx in Fourier space, in place.
inline void mult_ddx(Spectrum& s) {
    const double k0 = 2.0 * M_PI / s.L;
    const int half = s.n / 2;
    for (int jy = 0; jy < s.n; ++jy)
        for (int mx = 0; mx <= half; ++mx) {
            if (nyquist_x(s.n, mx))
                s.at(mx, jy) = 0.0;
            else
                s.at(mx, jy) *= std::complex<double>(0.0, k0 * mx);
        }
}

/// d/dy in Fourier space, in place.
inline void mult_ddy(Spectrum& s) {
    const double k0 = 2.0 * M_PI / s.L;
    const int half = s.n / 2;
    for (int jy = 0; jy < s.n; ++jy) {
        int my = s.my(jy);
        for (int mx = 0; mx <= half; ++mx) {
            if (nyquist_y(s.n, my))
                s.at(mx, jy) = 0.0;
            else
                s.at(mx, jy) *= std::complex<double>(0.0, k0 * my);
        }
    }
}

}  // namespace detail

inline VectorGrid gradient(const ScalarGrid& f) {
    detail::check_finite(f, "gradient");
    Spectrum s = fft_forward(f);
    Spectrum sx = s, sy = std::move(s);
    detail::mult_ddx(sx);
    detail::mult_ddy(sy);
    return {fft_backward(sx), fft_backward(sy)};
}

inline ScalarGrid ddx(const ScalarGrid& f) {
    Spectrum s = fft_forward(f);
    detail::mult_ddx(s);
    return fft_backward(s);
}

inline ScalarGrid ddy(const ScalarGrid& f) {
    Spectrum s = fft_forward(f);
    detail::mult_ddy(s);
    return fft_backward(s);
}

inline ScalarGrid divergence(const VectorGrid& v) {
    detail::check_finite(v.x, "divergence");
    detail::check_finite(v.y, "divergence");
    Spectrum sx = fft_forward(v.x);
    Spectrum sy = fft_forward(v.y);
    detail::mult_ddx(sx);
    detail::mult_ddy(sy);
    for (size_t k = 0; k < sx.c.size(); ++k) sx.c[k] += sy.c[k];
    return fft_backward(sx);
}

/// rot2(v) = d1 v2 - d2 v1 (scalar curl in 2D).
inline ScalarGrid rot2(const VectorGrid& v) {
    detail::check_finite(v.x, "rot2");
    detail::check_finite(v.y, "rot2");
    Spectrum sx = fft_forward(v.x);
    Spectrum sy = fft_forward(v.y);
    detail::mult_ddy(sx);
    detail::mult_ddx(sy);
    for (size_t k = 0; k < sy.c.size(); ++k) sy.c[k] -= sx.c[k];
    return fft_backward(sy);
}

namespace detail {

/// Singular operators treat Nyquist wavenumbers as zero: a mixed symbol
/// like kx ky / |k|^2 is ill-defined on the self-conjugate Nyquist modes
/// of real data, so those modes are annihilated, consistently with the
/// odd-derivative convention.
inline bool nyq_to_zero(int n, int& mx, int& my) {
    bool hit = false;
    if (mx == n / 2) {
        mx = 0;
        hit = true;
    }
    if (my == n / 2 || my == -n / 2) {
        my = 0;
        hit = true;
    }
    return hit;
}

}  // namespace detail

/// Zero-mean solution of -Lap g = f - mean(f); the k=0 mode is zeroed,
/// Nyquist modes are annihilated.
inline ScalarGrid inv_laplacian(const ScalarGrid& f) {
    const int n = f.n();
    return apply_multiplier(f, [n](double kx, double ky, int mx, int my) {
        detail::nyq_to_zero(n, mx, my);
        kx = mx == 0 ? 0.0 : kx;
        ky = my == 0 ? 0.0 : ky;
        double k2 = kx * kx + ky * ky;
        return k2 == 0.0 ? 0.0 : 1.0 / k2;
    });
}

/// Second-order Riesz operator (-Lap)^{-1} dj dk with Fourier symbol
/// kj kk / |k|^2, zero mean mode, Nyquist wavenumbers treated as zero.
/// Axes are 0 (x) and 1 (y).
inline ScalarGrid riesz2(const ScalarGrid& f, int j, int k) {
    if (j < 0 || j > 1 || k < 0 || k > 1) throw std::invalid_argument("riesz2: axis out of range");
    const int n = f.n();
    return apply_multiplier(f, [j, k, n](double kx, double ky, int mx, int my) {
        detail::nyq_to_zero(n, mx, my);
        kx = mx == 0 ? 0.0 : kx;
        ky = my == 0 ? 0.0 : ky;
        double k2 = kx * kx + ky * ky;
        if (k2 == 0.0) return 0.0;
        const double kj = (j == 0) ? kx : ky;
        const double kk = (k == 0) ? kx : ky;
        return kj * kk / k2;
    });
}

/// Zero every mode with |m| above n/3 on either axis (2/3 rule).
inline void dealias23(Spectrum& s) {
    const int cut = s.n / 3;
    const int half = s.n / 2;
    for (int jy = 0; jy < s.n; ++jy) {
        int my = std::abs(s.my(jy));
        for (int mx = 0; mx <= half; ++mx)
            if (mx > cut || my > cut) s.at(mx, jy) = 0.0;
    }
}

inline ScalarGrid dealias23(const ScalarGrid& f) {
    Spectrum s = fft_forward(f);
    dealias23(s);
    return fft_backward(s);
}

/// Pointwise product with the top third of the spectrum removed.
inline ScalarGrid dealiased_product(const ScalarGrid& a, const ScalarGrid& b) {
    if (!a.same_grid(b)) throw std::invalid_argument("dealiased_product: grid mismatch");
    return dealias23(pointwise(a, b));
}

namespace detail {

inline void check_matrix(const MatrixGrid& M, const char* who) {
    if (M.max_asymmetry() > 1e-10)
        throw std::invalid_argument(std::string(who) + ": matrix argument not symmetric");
    check_finite(M.xx, who);
    check_finite(M.xy, who);
    check_finite(M.yy, who);
}

}  // namespace detail

/// K(M) = 2 (-Lap)^{-1} dj dk M^{jk}. For M = Du this equals -2 div u up
/// to the mean mode.
inline ScalarGrid K_op(const MatrixGrid& M) {
    detail::check_matrix(M, "K_op");
    Spectrum acc(M.n(), M.L());
    const double k0 = 2.0 * M_PI / M.L();
    const int half = M.n() / 2;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            Spectrum s = fft_forward(M.comp(j, k));
            for (int jy = 0; jy < s.n; ++jy) {
                int my = s.my(jy);
                double ky = (my == half || my == -half) ? 0.0 : k0 * my;
                for (int mx = 0; mx <= half; ++mx) {
                    double kx = (mx == half) ? 0.0 : k0 * mx;
                    double k2 = kx * kx + ky * ky;
                    if (k2 == 0.0) continue;
                    double kj = (j == 0) ? kx : ky;
                    double kk = (k == 0) ? kx : ky;
                    acc.at(mx, jy) += s.at(mx, jy) * (-2.0 * kj * kk / k2);
                }
            }
        }
    return fft_backward(acc);
}

/// K'(M) = 2 (-Lap)^{-1} (d1 dk M^{2k} - d2 dk M^{1k}). For M = Du this
/// equals -rot2(u) up to the mean mode.
inline ScalarGrid Kp_op(const MatrixGrid& M) {
    detail::check_matrix(M, "Kp_op");
    Spectrum acc(M.n(), M.L());
    const double k0 = 2.0 * M_PI / M.L();
    const int half = M.n() / 2;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            // Row j enters with the perpendicular sign: +d1 on row 2, -d2 on row 1.
            Spectrum s = fft_forward(M.comp(j, k));
            for (int jy = 0; jy < s.n; ++jy) {
                int my = s.my(jy);
                double ky = (my == half || my == -half) ? 0.0 : k0 * my;
                for (int mx = 0; mx <= half; ++mx) {
                    double kx = (mx == half) ? 0.0 : k0 * mx;
                    double k2 = kx * kx + ky * ky;
                    if (k2 == 0.0) continue;
                    double krot = (j == 0) ? -ky : kx;  // -d2 M^{1k}, +d1 M^{2k}
                    double kk = (k == 0) ? kx : ky;
                    acc.at(mx, jy) += s.at(mx, jy) * (-2.0 * krot * kk / k2);
                }
            }
        }
    return fft_backward(acc);
}

enum class Kind { K, Kprime };

/// Commutator [Op, a] M = Op(a M) - a Op(M), with both pointwise
/// products passed through the 2/3 rule.
inline ScalarGrid commutator_K(const ScalarGrid& a, const MatrixGrid& M, Kind which) {
    if (!a.same_grid(M.xx)) throw std::invalid_argument("commutator_K: grid mismatch");
    MatrixGrid aM(M.n(), M.L());
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) aM.comp(j, k) = dealiased_product(a, M.comp(j, k));
    ScalarGrid lhs = (which == Kind::K) ? K_op(aM) : Kp_op(aM);
    ScalarGrid rhs = dealiased_product(a, (which == Kind::K) ? K_op(M) : Kp_op(M));
    return lhs - rhs;
}

/// Velocity gradient with layout (grad u)^{jk} = dk u^j.
inline MatrixGrid gradient_of(const VectorGrid& u) {
    MatrixGrid G(u.n(), u.L());
    VectorGrid gx = gradient(u.x);
    VectorGrid gy = gradient(u.y);
    G.xx = gx.x;
    G.xy = gx.y;
    G.yx = gy.x;
    G.yy = gy.y;
    return G;
}

/// Symmetric velocity gradient D u.
inline MatrixGrid sym_gradient(const VectorGrid& u) {
    MatrixGrid G = gradient_of(u);
    ScalarGrid off = G.xy;
    for (size_t k = 0; k < off.size(); ++k) off[k] = 0.5 * (G.xy[k] + G.yx[k]);
    G.xy = off;
    G.yx = std::move(off);
    return G;
}

/// (div M)^j = dk M^{jk}.
inline VectorGrid divergence(const MatrixGrid& M) {
    VectorGrid r(M.n(), M.L());
    r.x = divergence(VectorGrid(M.xx, M.xy));
    r.y = divergence(VectorGrid(M.yx, M.yy));
    return r;
}

inline ScalarGrid laplacian(const ScalarGrid& f) {
    return apply_multiplier(
        f, [](double kx, double ky, int, int) { return -(kx * kx + ky * ky); });
}

}  // namespace spectral
}  // namespace patchns
