#pragma once

#include <cmath>
#include <vector>

#include "patchns/curve.hpp"
#include "patchns/interp.hpp"
#include "patchns/probes.hpp"

namespace patchns {

/// Jump samples of a grid-backed field at every marker of the curve.
inline std::vector<JumpSample> jumps_along_curve(const ScalarGrid& field,
                                                 const SideClassifier& classify,
                                                 const InterfaceCurve& curve, double r0,
                                                 double alpha) {
    std::vector<JumpSample> out(curve.size());
    FieldEval eval = [&field](const Vec2& p) { return interp::bicubic(field, p); };
    for (int i = 0; i < curve.size(); ++i)
        out[i] = jump_average(eval, classify, curve.pos[i], curve.normal(i), r0, alpha,
                              field.L(), i);
    return out;
}

/// Arclength-weighted L^p norm of per-marker values; p = infinity gives
/// the max over valid markers.
inline double curve_lp_norm(const InterfaceCurve& curve, const std::vector<double>& vals,
                            const std::vector<bool>& valid, double p) {
    int m = curve.size();
    if (std::isinf(p)) {
        double mx = 0.0;
        for (int i = 0; i < m; ++i)
            if (valid[i]) mx = std::max(mx, std::abs(vals[i]));
        return mx;
    }
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        if (!valid[i]) continue;
        double ds = 0.5 * (curve.chord(i, (i + 1) % m).norm() +
                           curve.chord(i, (i + m - 1) % m).norm());
        acc += std::pow(std::abs(vals[i]), p) * ds;
    }
    return std::pow(acc, 1.0 / p);
}

inline double curve_lp_norm(const InterfaceCurve& curve, const std::vector<JumpSample>& js,
                            double p) {
    std::vector<double> vals(js.size());
    std::vector<bool> valid(js.size());
    for (size_t i = 0; i < js.size(); ++i) {
        vals[i] = js[i].jump;
        valid[i] = js[i].valid;
    }
    return curve_lp_norm(curve, vals, valid, p);
}

/// Piecewise Hölder norm pieces of a grid field: sup norm plus the sum
/// of the two same-side seminorm estimates.
struct PiecewiseNorm {
    double sup = 0.0;
    double seminorm_in = 0.0;
    double seminorm_out = 0.0;
    double seminorm() const { return seminorm_in + seminorm_out; }
    double total() const { return sup + seminorm(); }
};

inline PiecewiseNorm piecewise_norm(const ScalarGrid& field, const SideClassifier& classify,
                                    double alpha, double cutoff, std::mt19937_64& rng,
                                    int pair_budget = 100000) {
    PiecewiseNorm n;
    n.sup = field.max_abs();
    FieldEval eval = [&field](const Vec2& p) { return interp::bicubic(field, p); };
    n.seminorm_in = holder_pw(eval, classify, +1, alpha, cutoff, field.h(), field.L(), rng,
                              pair_budget / 2)
                        .seminorm;
    n.seminorm_out = holder_pw(eval, classify, -1, alpha, cutoff, field.h(), field.L(), rng,
                               pair_budget / 2)
                         .seminorm;
    return n;
}

/// The viscosity-smallness composite monitored against blow-up:
///   [1 + |lam|_holder + (P_gamma + ell^-alpha) |[lam]|_inf] |mu - mu_t|_pw
///   + (P_gamma + ell^-alpha) ( |[mu]|_inf
///       + max(|[mu]|_inf, |[lam]|_inf) |1 - mu_t/<mu>|_inf ).
struct ViscosityComposite {
    double mu_pw_norm = 0.0;    // |mu(rho) - mu_t| in the piecewise norm
    double lam_seminorm = 0.0;  // piecewise seminorm of lambda(rho)
    double jump_mu_inf = 0.0;
    double jump_lam_inf = 0.0;
    double one_minus_ratio_inf = 0.0;  // sup |1 - mu_t / <mu>| on the curve
    double frak_p = 0.0;
    double ell_inv_alpha = 0.0;  // ell^{-alpha}
    double value = 0.0;
};

inline double viscosity_composite_value(const ViscosityComposite& c) {
    double geom = c.frak_p + c.ell_inv_alpha;
    return (1.0 + c.lam_seminorm + geom * c.jump_lam_inf) * c.mu_pw_norm +
           geom * (c.jump_mu_inf + std::max(c.jump_mu_inf, c.jump_lam_inf) *
                                       c.one_minus_ratio_inf);
}

}  // namespace patchns
