#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "patchns/grid.hpp"

namespace patchns {

/// Fourier coefficients of a real n x n field in FFTW r2c half-complex
/// layout: rows are the y frequency (full range, wrapped), columns the
/// x frequency 0..n/2. Unnormalized forward transform; inverse divides
/// by n^2.
struct Spectrum {
    int n = 0;
    double L = 0.0;
    std::vector<std::complex<double>> c;  // size n * (n/2 + 1)

    Spectrum() = default;
    Spectrum(int n_, double L_) : n(n_), L(L_), c(size_t(n_) * (n_ / 2 + 1)) {}

    std::complex<double>& at(int kx, int jy) { return c[size_t(jy) * (n / 2 + 1) + kx]; }
    const std::complex<double>& at(int kx, int jy) const {
        return c[size_t(jy) * (n / 2 + 1) + kx];
    }

    /// Signed integer y-mode for storage row jy.
    int my(int jy) const { return jy <= n / 2 ? jy : jy - n; }
};

namespace detail {

/// FFTW plans per grid size. Plan creation is serialized; execution uses
/// the new-array interface and is safe from concurrent callers on
/// distinct buffers. FFTW_ESTIMATE keeps planning deterministic.
class FftPlans {
  public:
    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    fftw_plan forward(int n) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = fwd_.find(n);
        if (it != fwd_.end()) return it->second;
        std::vector<double> in(size_t(n) * n);
        std::vector<std::complex<double>> out(size_t(n) * (n / 2 + 1));
        fftw_plan p = fftw_plan_dft_r2c_2d(n, n, in.data(),
                                           reinterpret_cast<fftw_complex*>(out.data()),
                                           FFTW_ESTIMATE | FFTW_UNALIGNED);
        fwd_[n] = p;
        return p;
    }

    fftw_plan backward(int n) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = bwd_.find(n);
        if (it != bwd_.end()) return it->second;
        std::vector<std::complex<double>> in(size_t(n) * (n / 2 + 1));
        std::vector<double> out(size_t(n) * n);
        fftw_plan p = fftw_plan_dft_c2r_2d(n, n, reinterpret_cast<fftw_complex*>(in.data()),
                                           out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_[n] = p;
        return p;
    }

  private:
    FftPlans() = default;
    std::mutex mu_;
    std::map<int, fftw_plan> fwd_, bwd_;
};

}  // namespace detail

inline Spectrum fft_forward(const ScalarGrid& f) {
    Spectrum s(f.n(), f.L());
    std::vector<double> in(f.data(), f.data() + f.size());
    fftw_execute_dft_r2c(detail::FftPlans::instance().forward(f.n()), in.data(),
                         reinterpret_cast<fftw_complex*>(s.c.data()));
    return s;
}

inline ScalarGrid fft_backward(const Spectrum& s) {
    ScalarGrid g(s.n, s.L);
    std::vector<std::complex<double>> in = s.c;  // c2r destroys its input
    fftw_execute_dft_c2r(detail::FftPlans::instance().backward(s.n),
                         reinterpret_cast<fftw_complex*>(in.data()), g.data());
    const double scale = 1.0 / (double(s.n) * double(s.n));
    for (size_t k = 0; k < g.size(); ++k) g[k] *= scale;
    return g;
}

/// Apply a multiplier m(kx, ky) (physical wavenumbers) in Fourier space.
/// The functor receives the x and y wavenumbers and the integer mode
/// pair, and returns a complex factor.
template <class M>
ScalarGrid apply_multiplier(const ScalarGrid& f, M&& m) {
    Spectrum s = fft_forward(f);
    const double k0 = 2.0 * M_PI / f.L();
    const int half = f.n() / 2;
    for (int jy = 0; jy < f.n(); ++jy) {
        int my = s.my(jy);
        for (int mx = 0; mx <= half; ++mx) {
            s.at(mx, jy) *= m(k0 * mx, k0 * my, mx, my);
        }
    }
    return fft_backward(s);
}

}  // namespace patchns
