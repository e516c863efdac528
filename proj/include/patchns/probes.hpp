#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "patchns/core.hpp"
#include "patchns/curve.hpp"
#include "patchns/levelset.hpp"

namespace patchns {

using FieldEval = std::function<double(const Vec2&)>;
/// Side classifier: +1 inside D, -1 outside, 0 ambiguous (too close to
/// the interface for the available resolution).
using SideClassifier = std::function<int(const Vec2&)>;

inline SideClassifier levelset_classifier(const LevelSet& ls, const VectorGrid& grad_phi,
                                          double h) {
    return [&ls, &grad_phi, h](const Vec2& p) -> int {
        double v = ls.value(p);
        double g = interp::bicubic(grad_phi, p).norm();
        if (std::abs(v) < h * std::max(g, 1e-12)) return 0;
        return v >= 0.0 ? +1 : -1;
    };
}

/// One-sided limits of a field at a single interface point.
struct JumpSample {
    int marker = -1;
    double jump = 0.0;      // g_plus - g_minus (plus = outward side)
    double average = 0.0;   // (g_plus + g_minus) / 2
    double error = 0.0;     // extrapolation error estimate
    double g_plus = 0.0;
    double g_minus = 0.0;
    bool valid = false;
};

namespace detail {

/// Richardson extrapolation to r -> 0 under the one-sided model
/// g(r) = g0 + c r^alpha, given samples at radii r and r/2.
inline double richardson(double g_r, double g_half, double alpha) {
    double w = std::pow(0.5, alpha);
    return (g_half - w * g_r) / (1.0 - w);
}

struct OneSided {
    double value = 0.0;
    double error = 0.0;
    bool valid = false;
};

inline OneSided one_sided_limit(const FieldEval& eval, const SideClassifier& classify,
                                const Vec2& base, const Vec2& dir, int expected_side, double r0,
                                double alpha, double L) {
    double radii[3] = {r0, 0.5 * r0, 0.25 * r0};
    double vals[3];
    bool ok[3];
    for (int k = 0; k < 3; ++k) {
        Vec2 p = wrap(base + radii[k] * dir, L);
        ok[k] = classify(p) == expected_side;
        vals[k] = ok[k] ? eval(p) : 0.0;
    }
    OneSided out;
    if (ok[1] && ok[2]) {
        double fine = richardson(vals[1], vals[2], alpha);
        out.value = fine;
        out.error = ok[0] ? std::abs(fine - richardson(vals[0], vals[1], alpha))
                          : std::abs(fine - vals[2]);
        out.valid = true;
    } else if (ok[0] && ok[1]) {
        out.value = richardson(vals[0], vals[1], alpha);
        out.error = std::abs(out.value - vals[1]);
        out.valid = true;
    }
    return out;
}

}  // namespace detail

/// Jump and average of a piecewise field at one marker, by one-sided
/// probing along the outward normal at radii {r0, r0/2, r0/4} and
/// Richardson extrapolation in r^alpha. Probes landing on the wrong
/// side of the interface are discarded; fewer than two usable radii on
/// either side invalidates the sample.
inline JumpSample jump_average(const FieldEval& eval, const SideClassifier& classify,
                               const Vec2& point, const Vec2& outward_normal, double r0,
                               double alpha, double L, int marker = -1) {
    JumpSample s;
    s.marker = marker;
    auto plus = detail::one_sided_limit(eval, classify, point, outward_normal, -1, r0, alpha, L);
    Vec2 inward{-outward_normal.x, -outward_normal.y};
    auto minus = detail::one_sided_limit(eval, classify, point, inward, +1, r0, alpha, L);
    if (!plus.valid || !minus.valid) return s;
    // "plus" side of the jump bracket is along +n (outside D).
    s.g_plus = plus.value;
    s.g_minus = minus.value;
    s.jump = plus.value - minus.value;
    s.average = 0.5 * (plus.value + minus.value);
    s.error = plus.error + minus.error;
    s.valid = true;
    return s;
}

struct HolderEstimate {
    double seminorm = 0.0;
    int pairs_used = 0;
    int pairs_budget = 0;
};

/// Same-side Hölder seminorm estimate: max over sampled point pairs of
/// |g(x) - g(y)| / |x - y|^alpha, pair separations stratified in
/// [4h, cutoff]. The estimate is a lower bound for the continuum norm;
/// the pair budget is reported alongside the value.
inline HolderEstimate holder_pw(const FieldEval& eval, const SideClassifier& classify, int side,
                                double alpha, double cutoff, double h, double L,
                                std::mt19937_64& rng, int pair_budget = 100000,
                                const std::function<Vec2(std::mt19937_64&)>& point_sampler = {}) {
    HolderEstimate est;
    est.pairs_budget = pair_budget;
    if (cutoff < 4.0 * h) throw std::invalid_argument("holder_pw: cutoff must be >= 4h");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double log_lo = std::log(4.0 * h), log_hi = std::log(cutoff);
    for (int k = 0; k < pair_budget; ++k) {
        Vec2 x = point_sampler ? point_sampler(rng) : Vec2{L * unif(rng), L * unif(rng)};
        if (classify(x) != side) continue;
        double d = std::exp(log_lo + (log_hi - log_lo) * unif(rng));
        double theta = 2.0 * M_PI * unif(rng);
        Vec2 y = wrap(x + d * Vec2{std::cos(theta), std::sin(theta)}, L);
        if (classify(y) != side) continue;
        double q = std::abs(eval(x) - eval(y)) / std::pow(d, alpha);
        if (q > est.seminorm) est.seminorm = q;
        ++est.pairs_used;
    }
    return est;
}

struct LevelSetMetrics {
    double grad_inf = 0.0;     // min over markers of |grad phi|
    double grad_holder = 0.0;  // Hölder seminorm of grad phi near the curve
    double ell = 0.0;          // gradient nondegeneracy length scale
    bool degenerate = false;
};

/// Level-set regularity characteristics: |grad phi|_inf over the
/// markers, the Hölder seminorm of grad phi on a band of width 0.2 L
/// around the curve, and ell = min{1, (inf/holder)^(1/alpha)}.
inline LevelSetMetrics levelset_metrics(const LevelSet& ls, const VectorGrid& grad_phi,
                                        const InterfaceCurve& curve, double alpha,
                                        std::mt19937_64& rng, int pair_budget = 20000) {
    LevelSetMetrics m;
    m.grad_inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < curve.size(); ++i)
        m.grad_inf = std::min(m.grad_inf, interp::bicubic(grad_phi, curve.pos[i]).norm());
    if (m.grad_inf < 1e-6) m.degenerate = true;

    const double h = ls.phi.h();
    const double L = ls.phi.L();
    // half-width of the sampling band (floored so coarse grids stay valid)
    const double band = std::max(0.1 * L, 4.5 * h);
    auto classify = levelset_classifier(ls, grad_phi, h);
    auto band_classify = [&](const Vec2& p) -> int {
        if (distance_proxy(ls, grad_phi, p) > band) return 0;
        return classify(p);
    };
    // Sample band points by perturbing random markers.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, curve.size() - 1);
    auto sampler = [&](std::mt19937_64& r) {
        Vec2 base = curve.pos[pick(r)];
        double rad = band * unif(r);
        double th = 2.0 * M_PI * unif(r);
        return wrap(base + rad * Vec2{std::cos(th), std::sin(th)}, L);
    };
    for (int comp = 0; comp < 2; ++comp) {
        const ScalarGrid& g = comp == 0 ? grad_phi.x : grad_phi.y;
        FieldEval eval = [&g](const Vec2& p) { return interp::bicubic(g, p); };
        for (int side : {+1, -1}) {
            auto est = holder_pw(eval, band_classify, side, alpha, band, h, L, rng,
                                 pair_budget / 4, sampler);
            m.grad_holder = std::max(m.grad_holder, est.seminorm);
        }
    }
    if (m.grad_holder <= 0.0)
        m.ell = 1.0;
    else
        m.ell = std::min(1.0, std::pow(m.grad_inf / m.grad_holder, 1.0 / alpha));
    return m;
}

}  // namespace patchns
