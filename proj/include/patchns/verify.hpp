#pragma once

#include <string>
#include <vector>

#include "patchns/runner.hpp"

namespace patchns {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

inline nlohmann::json checks_to_json(const std::vector<CheckResult>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"pass", c.pass}});
    return arr;
}

inline bool all_pass(const std::vector<CheckResult>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

namespace verifydetail {

/// Worst relative deviation of an operator's action from its multiplier,
/// over every stored mode of a full-spectrum random field.
template <class Op, class Symbol>
double symbol_error(int n, double L, std::uint64_t seed, Op&& op, Symbol&& sym,
                    bool odd_x = false, bool odd_y = false) {
    auto rng = make_rng(seed, 0xabc);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    ScalarGrid f(n, L);
    for (size_t k = 0; k < f.size(); ++k) f[k] = unif(rng);
    ScalarGrid g = op(f);
    Spectrum fs = fft_forward(f);
    Spectrum gs = fft_forward(g);
    const double k0 = 2.0 * M_PI / L;
    const int half = n / 2;
    double worst = 0.0;
    for (int jy = 0; jy < n; ++jy) {
        int my = fs.my(jy);
        for (int mx = 0; mx <= half; ++mx) {
            bool nyq = (odd_x && mx == half) || (odd_y && (my == half || my == -half));
            std::complex<double> want =
                nyq ? std::complex<double>(0.0) : sym(k0 * mx, k0 * my, mx, my) * fs.at(mx, jy);
            double err = std::abs(gs.at(mx, jy) - want);
            double scale = std::max(std::abs(fs.at(mx, jy)), 1e-6);
            worst = std::max(worst, err / scale);
        }
    }
    return worst;
}

inline ScalarGrid random_band_limited(int n, double L, int mmax, std::uint64_t seed) {
    auto rng = make_rng(seed, 0xbee);
    std::uniform_real_distribution<double> amp(-1.0, 1.0), ph(0.0, 2.0 * M_PI);
    ScalarGrid f(n, L, 0.0);
    for (int mx = 0; mx <= mmax; ++mx)
        for (int my = -mmax; my <= mmax; ++my) {
            if (mx == 0 && my <= 0) continue;
            double a = amp(rng), p = ph(rng);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    f(i, j) += a * std::cos(2.0 * M_PI * (mx * i + my * j) / double(n) + p);
        }
    return f;
}

}  // namespace verifydetail

/// Multiplier exactness of every Fourier operator plus the contraction
/// identities on random band-limited fields.
inline std::vector<CheckResult> verify_operators(int n = 64, double L = 2.0 * M_PI,
                                                 std::uint64_t seed = 1,
                                                 int identity_trials = 100) {
    using namespace verifydetail;
    std::vector<CheckResult> out;
    auto add = [&](const std::string& name, double value, double thr) {
        out.push_back({name, value, thr, value < thr});
    };

    using C = std::complex<double>;
    add("symbol_ddx",
        symbol_error(n, L, seed, [](const ScalarGrid& f) { return spectral::ddx(f); },
                     [](double kx, double, int, int) { return C(0.0, kx); }, true, false),
        1e-11);
    add("symbol_ddy",
        symbol_error(n, L, seed, [](const ScalarGrid& f) { return spectral::ddy(f); },
                     [](double, double ky, int, int) { return C(0.0, ky); }, false, true),
        1e-11);
    // Singular operators annihilate Nyquist wavenumbers (the mixed
    // symbols are ill-defined there for real data).
    auto nyq = [n](double& kx, double& ky, int mx, int my) {
        if (mx == n / 2) kx = 0.0;
        if (my == n / 2 || my == -n / 2) ky = 0.0;
    };
    add("symbol_inv_laplacian",
        symbol_error(n, L, seed,
                     [](const ScalarGrid& f) { return spectral::inv_laplacian(f); },
                     [nyq](double kx, double ky, int mx, int my) {
                         nyq(kx, ky, mx, my);
                         double k2 = kx * kx + ky * ky;
                         return k2 == 0.0 ? C(0.0) : C(1.0 / k2);
                     }),
        1e-11);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            add("symbol_riesz2_" + std::to_string(a) + std::to_string(b),
                symbol_error(n, L, seed,
                             [a, b](const ScalarGrid& f) { return spectral::riesz2(f, a, b); },
                             [a, b, nyq](double kx, double ky, int mx, int my) {
                                 nyq(kx, ky, mx, my);
                                 double k2 = kx * kx + ky * ky;
                                 if (k2 == 0.0) return C(0.0);
                                 double ka = a == 0 ? kx : ky;
                                 double kb = b == 0 ? kx : ky;
                                 return C(ka * kb / k2);
                             }),
                1e-11);
        }

    // K(Du) = -2 div u and K'(Du) = -rot2 u on random band-limited fields.
    double worst_k = 0.0, worst_kp = 0.0, worst_comm = 0.0, worst_inv = 0.0;
    for (int trial = 0; trial < identity_trials; ++trial) {
        VectorGrid u(n, L);
        u.x = random_band_limited(n, L, n / 6, seed + 2 * trial);
        u.y = random_band_limited(n, L, n / 6, seed + 2 * trial + 1);
        MatrixGrid Du = spectral::sym_gradient(u);
        ScalarGrid divu = spectral::divergence(u);
        ScalarGrid rotu = spectral::rot2(u);
        ScalarGrid k = spectral::K_op(Du);
        ScalarGrid kp = spectral::Kp_op(Du);
        for (size_t i = 0; i < k.size(); ++i) {
            worst_k = std::max(worst_k, std::abs(k[i] + 2.0 * divu[i]));
            worst_kp = std::max(worst_kp, std::abs(kp[i] + rotu[i]));
        }
        if (trial < 5) {
            ScalarGrid a(n, L, 2.5);
            worst_comm =
                std::max(worst_comm,
                         spectral::commutator_K(a, Du, spectral::Kind::K).max_abs());
            ScalarGrid f = random_band_limited(n, L, n / 4, seed + 1000 + trial);
            ScalarGrid lap = spectral::laplacian(f);
            ScalarGrid back = spectral::inv_laplacian(-1.0 * lap);
            double fm = f.mean();
            for (size_t i = 0; i < f.size(); ++i)
                worst_inv = std::max(worst_inv, std::abs(back[i] - (f[i] - fm)));
        }
    }
    add("identity_K_divu", worst_k, 1e-10);
    add("identity_Kp_rotu", worst_kp, 1e-10);
    add("commutator_constant", worst_comm, 1e-12);
    add("inv_laplacian_roundtrip", worst_inv, 1e-11);
    return out;
}

/// Short-run identity verification on a configured scenario.
inline std::vector<CheckResult> verify_identities(const ScenarioConfig& cfg,
                                                  const std::string& out_dir, bool quiet) {
    Runner runner(cfg, out_dir, quiet);
    RunSummary s = runner.run();
    const RunHistory& h = runner.history();
    std::vector<CheckResult> out;
    if (s.status != "completed") {
        out.push_back({"run_completed", 0.0, 1.0, false});
        return out;
    }
    out.push_back({"run_completed", 1.0, 0.5, true});
    if (!h.flux_resid.empty()) {
        out.push_back({"flux_representation_residual", h.flux_resid.back(), 0.05,
                       h.flux_resid.back() < 0.05});
        out.push_back({"vorticity_representation_residual", h.vort_resid.back(), 0.05,
                       h.vort_resid.back() < 0.05});
    }
    if (!h.r1_med.empty()) {
        auto last_ok = [&](const std::vector<double>& v) {
            return std::isfinite(v.back()) ? v.back() : 1e9;
        };
        out.push_back(
            {"stress_normal_r1_median", last_ok(h.r1_med), 0.10, last_ok(h.r1_med) < 0.10});
        out.push_back(
            {"flux_jump_r3_median", last_ok(h.r3_med), 0.10, last_ok(h.r3_med) < 0.10});
        out.push_back(
            {"vorticity_jump_r4_median", last_ok(h.r4_med), 0.10, last_ok(h.r4_med) < 0.10});
    }
    if (!h.theta.empty()) {
        bool monotone = true;
        for (size_t i = 1; i < h.theta.size(); ++i)
            monotone = monotone && h.theta[i] >= h.theta[i - 1] - 1e-12;
        out.push_back({"theta_non_decreasing", monotone ? 1.0 : 0.0, 0.5, monotone});
    }
    return out;
}

/// Frozen-velocity decay study: pure pressure damping of the carried
/// f-values; fitted slope compared against the difference-quotient
/// bounds for each requested p.
inline std::vector<CheckResult> decay_study(ScenarioConfig cfg, const std::vector<double>& ps,
                                            const std::string& out_dir, bool quiet) {
    cfg.step.freeze_velocity = true;
    Runner runner(cfg, out_dir, quiet);
    RunSummary s = runner.run();
    std::vector<CheckResult> out;
    if (s.status != "completed") {
        out.push_back({"run_completed", 0.0, 1.0, false});
        return out;
    }
    auto nu = runner.laws()->nu_bounds();
    for (double p : ps) {
        auto fit = runner.decay_fit(p);
        std::string tag = std::isinf(p) ? "inf" : std::to_string(int(p));
        out.push_back({"decay_rate_p" + tag + "_vs_bound", fit.fitted_slope,
                       fit.predicted_slope + 0.1 * std::abs(fit.predicted_slope), fit.pass});
        // Zero-velocity runs must land on -nu_lo itself.
        double rel = std::abs(fit.fitted_slope + nu.lo) / nu.lo;
        out.push_back({"decay_rate_p" + tag + "_matches_nu_lo", rel, 0.02, rel < 0.02});
    }
    return out;
}

}  // namespace patchns
