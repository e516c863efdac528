#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "patchns/core.hpp"
#include "patchns/quadrature.hpp"

namespace patchns {

/// Parameters for the built-in law family:
///   P(rho)      = pressure_a * rho^pressure_gamma
///   mu(rho)     = mu_base + mu_slope * (rho - rho_tilde)
///   lambda(rho) = lambda_b * rho^lambda_beta   (lambda_beta = 0 => constant)
struct LawPreset {
    double rho_tilde = 1.0;
    double pressure_a = 1.0;
    double pressure_gamma = 1.4;
    double mu_base = 1.0;   // mu at the reference density
    double mu_slope = 0.0;  // d mu / d rho
    double lambda_b = 0.0;
    double lambda_beta = 0.0;
    double band_lo = 0.0;  // 0 => default rho_tilde / 4
    double band_hi = 0.0;  // 0 => default 4 * rho_tilde
};

struct NuBounds {
    double lo = 0.0;
    double hi = 0.0;
    int resolution = 0;  // number of density samples used
};

/// Pressure and viscosity laws with the damped transported variable
///   f(rho) = int_{rho_tilde}^{rho} (2 mu(s) + lambda(s)) / s ds,
/// its inverse, the potential energies H_l, and the difference-quotient
/// bounds (nu_lo, nu_hi) controlling jump decay. Immutable after
/// construction and freely shared.
class ConstitutiveLaws {
  public:
    using Fn = std::function<double(double)>;

    static ConstitutiveLaws from_preset(const LawPreset& p) {
        ConstitutiveLaws laws;
        laws.preset_ = p;
        laws.rho_tilde_ = p.rho_tilde;
        laws.band_lo_ = p.band_lo > 0.0 ? p.band_lo : p.rho_tilde / 4.0;
        laws.band_hi_ = p.band_hi > 0.0 ? p.band_hi : 4.0 * p.rho_tilde;
        laws.P_ = [p](double r) { return p.pressure_a * std::pow(r, p.pressure_gamma); };
        laws.Pp_ = [p](double r) {
            return p.pressure_a * p.pressure_gamma * std::pow(r, p.pressure_gamma - 1.0);
        };
        laws.mu_ = [p](double r) { return p.mu_base + p.mu_slope * (r - p.rho_tilde); };
        laws.mup_ = [p](double) { return p.mu_slope; };
        laws.lam_ = [p](double r) {
            return p.lambda_beta == 0.0 ? p.lambda_b : p.lambda_b * std::pow(r, p.lambda_beta);
        };
        laws.lamp_ = [p](double r) {
            return p.lambda_beta == 0.0
                       ? 0.0
                       : p.lambda_b * p.lambda_beta * std::pow(r, p.lambda_beta - 1.0);
        };
        laws.finish_init();
        return laws;
    }

    /// Fully custom laws; f falls back to adaptive quadrature.
    static ConstitutiveLaws from_callables(Fn P, Fn Pp, Fn mu, Fn mup, Fn lam, Fn lamp,
                                           double rho_tilde, double band_lo, double band_hi) {
        ConstitutiveLaws laws;
        laws.rho_tilde_ = rho_tilde;
        laws.band_lo_ = band_lo;
        laws.band_hi_ = band_hi;
        laws.P_ = std::move(P);
        laws.Pp_ = std::move(Pp);
        laws.mu_ = std::move(mu);
        laws.mup_ = std::move(mup);
        laws.lam_ = std::move(lam);
        laws.lamp_ = std::move(lamp);
        laws.finish_init();
        return laws;
    }

    double rho_tilde() const { return rho_tilde_; }
    double band_lo() const { return band_lo_; }
    double band_hi() const { return band_hi_; }
    double P_tilde() const { return P_tilde_; }
    double mu_tilde() const { return mu_tilde_; }
    double lambda_tilde() const { return lam_tilde_; }

    double P(double rho) const { return P_(rho); }
    double Pp(double rho) const { return Pp_(rho); }
    double mu(double rho) const { return mu_(rho); }
    double mup(double rho) const { return mup_(rho); }
    double lambda(double rho) const { return lam_(rho); }
    double lambdap(double rho) const { return lamp_(rho); }

    void check_in_band(double rho, const char* who) const {
        if (!(rho >= band_lo_ && rho <= band_hi_))
            throw std::invalid_argument(std::string(who) + ": density " + std::to_string(rho) +
                                        " outside admissible band [" + std::to_string(band_lo_) +
                                        ", " + std::to_string(band_hi_) + "]");
    }

    double f(double rho) const {
        check_in_band(rho, "f");
        return f_unchecked(rho);
    }

    /// df/drho = (2 mu + lambda) / rho.
    double f_prime(double rho) const { return (2.0 * mu_(rho) + lam_(rho)) / rho; }

    double f_min() const { return f_lo_; }
    double f_max() const { return f_hi_; }

    /// Strictly monotone inverse of f on the band; |f(rho) - y| < 1e-12.
    /// A y outside f([band]) means the density left the admissible band.
    double f_inverse(double y, std::optional<double> warm_start = std::nullopt) const {
        if (y == 0.0) return rho_tilde_;
        if (y < f_lo_ - 1e-12 || y > f_hi_ + 1e-12)
            throw invalid_state("f_inverse: value " + std::to_string(y) +
                                " outside f(band); density left the admissible band");
        double lo = band_lo_, hi = band_hi_;
        double r = warm_start ? std::clamp(*warm_start, lo, hi) : 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            double fr = f_unchecked(r) - y;
            if (std::abs(fr) < 1e-12) return r;
            if (fr > 0.0)
                hi = r;
            else
                lo = r;
            double step = fr / f_prime(r);
            double next = r - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            r = next;
        }
        return r;
    }

    /// Potential energy H_l(rho) = rho int s^-2 |P - Pt|^{l-1} (P - Pt) ds,
    /// nonnegative with H_l(rho_tilde) = 0.
    double potential_energy(double rho, double l = 1.0) const {
        check_in_band(rho, "potential_energy");
        if (l < 1.0) throw std::invalid_argument("potential_energy: l must be >= 1");
        if (rho == rho_tilde_) return 0.0;
        if (l == 1.0 && preset_) return H1_closed_form(rho);
        const double Pt = P_tilde_;
        double integral = quad::integrate(
            [&](double s) {
                double d = P_(s) - Pt;
                double mag = std::pow(std::abs(d), l - 1.0);
                return (d >= 0.0 ? mag * d : -mag * -d) / (s * s);
            },
            rho_tilde_, rho, 1e-12);
        return rho * integral;
    }

    /// Infimum / supremum of the difference quotients (P(r)-P(r'))/(f(r)-f(r'))
    /// over a dense sample of band pairs; the upper bound also dominates
    /// |d mu / d f| and |d lambda / d f|. Includes the coincidence limit
    /// rho P'/(2 mu + lambda).
    NuBounds nu_bounds(int samples = 2000) const {
        std::vector<double> rs(samples), fs(samples), Ps(samples), mus(samples), lams(samples);
        for (int i = 0; i < samples; ++i) {
            double r = band_lo_ + (band_hi_ - band_lo_) * double(i) / double(samples - 1);
            rs[i] = r;
            fs[i] = f_unchecked(r);
            Ps[i] = P_(r);
            mus[i] = mu_(r);
            lams[i] = lam_(r);
        }
        for (int i = 1; i < samples; ++i)
            if (Ps[i] <= Ps[i - 1])
                throw std::invalid_argument("nu_bounds: pressure law not increasing on band");
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int i = 0; i < samples; ++i) {
            // coincidence limit of all three quotients
            double dP = rs[i] * Pp_(rs[i]) / (2.0 * mus[i] + lams[i]);
            double dmu = std::abs(rs[i] * mup_(rs[i])) / (2.0 * mus[i] + lams[i]);
            double dlam = std::abs(rs[i] * lamp_(rs[i])) / (2.0 * mus[i] + lams[i]);
            lo = std::min(lo, dP);
            hi = std::max({hi, dP, dmu, dlam});
            for (int j = i + 1; j < samples; ++j) {
                double df = fs[j] - fs[i];
                double rP = (Ps[j] - Ps[i]) / df;
                lo = std::min(lo, rP);
                hi = std::max({hi, rP, std::abs(mus[j] - mus[i]) / df,
                               std::abs(lams[j] - lams[i]) / df});
            }
        }
        return {lo, hi, samples};
    }

  private:
    std::optional<LawPreset> preset_;
    double rho_tilde_ = 1.0, band_lo_ = 0.25, band_hi_ = 4.0;
    double P_tilde_ = 0.0, mu_tilde_ = 0.0, lam_tilde_ = 0.0;
    double f_lo_ = 0.0, f_hi_ = 0.0;
    Fn P_, Pp_, mu_, mup_, lam_, lamp_;

    void finish_init() {
        if (!(rho_tilde_ > 0.0)) throw std::invalid_argument("laws: rho_tilde must be positive");
        if (!(band_lo_ > 0.0 && band_lo_ < rho_tilde_ && rho_tilde_ < band_hi_))
            throw std::invalid_argument("laws: band must satisfy 0 < lo < rho_tilde < hi");
        P_tilde_ = P_(rho_tilde_);
        mu_tilde_ = mu_(rho_tilde_);
        lam_tilde_ = lam_(rho_tilde_);
        validate_band();
        f_lo_ = f_unchecked(band_lo_);
        f_hi_ = f_unchecked(band_hi_);
    }

    void validate_band() const {
        const int N = 2048;
        double prev_f = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= N; ++i) {
            double r = band_lo_ + (band_hi_ - band_lo_) * double(i) / N;
            if (!(Pp_(r) > 0.0))
                throw std::invalid_argument("laws: P'(rho) must be positive on band");
            if (!(mu_(r) > 0.0))
                throw std::invalid_argument("laws: mu(rho) must be positive on band");
            if (lam_(r) < 0.0)
                throw std::invalid_argument("laws: lambda(rho) must be nonnegative on band");
            double fr = f_unchecked(r);
            if (fr <= prev_f) throw std::invalid_argument("laws: f not strictly increasing");
            prev_f = fr;
        }
    }

    double f_unchecked(double rho) const {
        if (rho == rho_tilde_) return 0.0;
        if (preset_) {
            const LawPreset& p = *preset_;
            double v = 2.0 * (p.mu_base - p.mu_slope * p.rho_tilde) * std::log(rho / p.rho_tilde) +
                       2.0 * p.mu_slope * (rho - p.rho_tilde);
            if (p.lambda_b != 0.0) {
                if (p.lambda_beta == 0.0)
                    v += p.lambda_b * std::log(rho / p.rho_tilde);
                else
                    v += p.lambda_b / p.lambda_beta *
                         (std::pow(rho, p.lambda_beta) - std::pow(p.rho_tilde, p.lambda_beta));
            }
            return v;
        }
        return quad::integrate(
            [&](double s) { return (2.0 * mu_(s) + lam_(s)) / s; }, rho_tilde_, rho, 1e-12);
    }

    double H1_closed_form(double rho) const {
        const LawPreset& p = *preset_;
        const double g = p.pressure_gamma, a = p.pressure_a, rt = p.rho_tilde;
        double integral;
        if (g == 1.0)
            integral = a * (std::log(rho / rt) + rt / rho - 1.0);
        else
            integral = a * (std::pow(rho, g - 1.0) - std::pow(rt, g - 1.0)) / (g - 1.0) +
                       a * std::pow(rt, g) * (1.0 / rho - 1.0 / rt);
        return rho * integral;
    }
};

}  // namespace patchns
