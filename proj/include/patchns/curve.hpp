#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "patchns/core.hpp"

namespace patchns {

/// Closed marker polyline for the transported interface. Markers carry a
/// reference parameter s_i (arclength of the initial curve), fixed under
/// transport so that the curve stays a map of the initial parameter
/// circle. Positions live in [0, L)^2; adjacent markers are assumed
/// closer than half the box.
struct InterfaceCurve {
    std::vector<Vec2> pos;
    std::vector<double> s;  // reference parameter, strictly increasing
    double s_period = 0.0;  // total parameter length of the closed curve
    double L = 0.0;         // box side

    int size() const { return int(pos.size()); }

    Vec2 at(int i) const { return pos[wrap_index(i)]; }
    double param(int i) const { return s[wrap_index(i)]; }

    int wrap_index(int i) const {
        int m = size();
        i %= m;
        return i < 0 ? i + m : i;
    }

    /// Periodic parameter distance on the reference circle.
    double param_dist(int i, int j) const {
        double d = std::abs(s[i] - s[j]);
        return std::min(d, s_period - d);
    }

    /// Chord from marker i to marker j, minimal periodic image.
    Vec2 chord(int i, int j) const { return periodic_delta(pos[j], pos[i], L); }

    /// dgamma/ds by centered differences in the reference parameter.
    Vec2 dgamma_ds(int i) const {
        int m = size();
        int ip = (i + 1) % m, im = (i + m - 1) % m;
        double ds = s_dist_forward(im, ip);
        Vec2 d = periodic_delta(pos[ip], pos[im], L);
        return d * (1.0 / ds);
    }

    Vec2 tangent(int i) const {
        Vec2 d = dgamma_ds(i);
        double nrm = d.norm();
        if (nrm == 0.0) throw invalid_state("curve: coincident markers");
        return d * (1.0 / nrm);
    }

    /// Outward normal assuming counterclockwise orientation around D.
    Vec2 normal(int i) const {
        Vec2 t = tangent(i);
        return {t.y, -t.x};
    }

    double polyline_length() const {
        double len = 0.0;
        int m = size();
        for (int i = 0; i < m; ++i) len += chord(i, (i + 1) % m).norm();
        return len;
    }

    /// Max over min of adjacent marker spacing (quasi-uniformity monitor).
    double spacing_ratio() const {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        int m = size();
        for (int i = 0; i < m; ++i) {
            double d = chord(i, (i + 1) % m).norm();
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        return hi / lo;
    }

    bool self_intersects() const {
        int m = size();
        for (int i = 0; i < m; ++i) {
            Vec2 a = pos[i];
            Vec2 b = a + chord(i, (i + 1) % m);
            for (int j = i + 1; j < m; ++j) {
                if (j == i || (j + 1) % m == i || j == (i + 1) % m) continue;
                Vec2 c = a + periodic_delta(pos[j], pos[i], L);
                Vec2 d = c + chord(j, (j + 1) % m);
                if (segments_cross(a, b, c, d)) return true;
            }
        }
        return false;
    }

  private:
    double s_dist_forward(int im, int ip) const {
        double d = s[ip] - s[im];
        if (d <= 0.0) d += s_period;
        return d;
    }

    static double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    }

    static bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
        double o1 = orient(a, b, c), o2 = orient(a, b, d);
        double o3 = orient(c, d, a), o4 = orient(c, d, b);
        return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
    }
};

struct CurveGeometry {
    double length = 0.0;        // |C|
    double grad_linf = 0.0;     // sup |dgamma/ds|
    double grad_holder = 0.0;   // Hölder seminorm of dgamma/ds in the parameter
    double c_gamma = 0.0;       // non-self-intersection constant
    double spacing_ratio = 1.0;
};

/// Exact pairwise evaluation of the curve characteristics (O(M^2), fine
/// for the marker counts used here).
inline CurveGeometry geometry(const InterfaceCurve& curve, double alpha) {
    if (curve.size() < 8) throw std::invalid_argument("geometry: too few markers");
    if (curve.self_intersects())
        throw invalid_state("geometry: interface polyline self-intersects");
    CurveGeometry g;
    g.length = curve.polyline_length();
    g.spacing_ratio = curve.spacing_ratio();
    int m = curve.size();
    std::vector<Vec2> dg(m);
    for (int i = 0; i < m; ++i) {
        dg[i] = curve.dgamma_ds(i);
        g.grad_linf = std::max(g.grad_linf, dg[i].norm());
    }
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            double ds = curve.param_dist(i, j);
            if (ds <= 0.0) continue;
            double chord = curve.chord(i, j).norm();
            if (chord > 0.0) g.c_gamma = std::max(g.c_gamma, ds / chord);
            g.grad_holder = std::max(g.grad_holder, (dg[i] - dg[j]).norm() / std::pow(ds, alpha));
        }
    }
    return g;
}

/// Curve functional (1 + |C|) * Q(grad_linf + c_gamma) * grad_holder with
/// the fixed monotone polynomial Q(x) = (1 + x)^3.
inline double frak_P(const CurveGeometry& g) {
    double x = g.grad_linf + g.c_gamma;
    double q = (1.0 + x) * (1.0 + x) * (1.0 + x);
    return (1.0 + g.length) * q * g.grad_holder;
}

/// Resample the curve to markers equally spaced in current arclength,
/// interpolating positions linearly along the polyline as a function of
/// the reference parameter. Marker count is preserved.
inline InterfaceCurve reparameterize(const InterfaceCurve& curve) {
    int m = curve.size();
    std::vector<double> arc(m + 1, 0.0);
    // Unwrapped positions: accumulate chords so interpolation is linear.
    std::vector<Vec2> unwrapped(m + 1);
    unwrapped[0] = curve.pos[0];
    for (int i = 0; i < m; ++i) {
        Vec2 step = curve.chord(i, (i + 1) % m);
        unwrapped[i + 1] = unwrapped[i] + step;
        arc[i + 1] = arc[i] + step.norm();
    }
    std::vector<double> sref(m + 1);
    for (int i = 0; i < m; ++i) sref[i] = curve.s[i];
    sref[m] = curve.s[0] + curve.s_period;

    InterfaceCurve out;
    out.L = curve.L;
    out.s_period = curve.s_period;
    out.pos.resize(m);
    out.s.resize(m);
    double total = arc[m];
    int seg = 0;
    for (int i = 0; i < m; ++i) {
        double target = total * double(i) / double(m);
        while (seg + 1 < m && arc[seg + 1] < target) ++seg;
        double w = (target - arc[seg]) / std::max(arc[seg + 1] - arc[seg], 1e-300);
        Vec2 p = unwrapped[seg] + w * (unwrapped[seg + 1] - unwrapped[seg]);
        out.pos[i] = wrap(p, curve.L);
        out.s[i] = sref[seg] + w * (sref[seg + 1] - sref[seg]);
    }
    return out;
}

}  // namespace patchns
