#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "patchns/core.hpp"

namespace patchns {

/// Periodic n x n real field sampled at x_ij = (i L/n, j L/n).
/// Storage is row-major with the x index fastest: values[j*n + i].
class ScalarGrid {
  public:
    ScalarGrid() = default;
    ScalarGrid(int n, double L, double fill = 0.0) : n_(n), L_(L), v_(size_t(n) * n, fill) {
        if (!is_power_of_two(n)) throw std::invalid_argument("grid: n must be a power of two");
        if (!(L > 0.0)) throw std::invalid_argument("grid: L must be positive");
    }

    int n() const { return n_; }
    double L() const { return L_; }
    double h() const { return L_ / n_; }
    size_t size() const { return v_.size(); }

    double& operator()(int i, int j) { return v_[size_t(j) * n_ + i]; }
    double operator()(int i, int j) const { return v_[size_t(j) * n_ + i]; }
    double& operator[](size_t k) { return v_[k]; }
    double operator[](size_t k) const { return v_[k]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    Vec2 point(int i, int j) const { return {i * h(), j * h()}; }

    bool same_grid(const ScalarGrid& o) const { return n_ == o.n_ && L_ == o.L_; }

    bool finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double min() const { return *std::min_element(v_.begin(), v_.end()); }
    double max() const { return *std::max_element(v_.begin(), v_.end()); }
    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }
    double mean() const {
        double s = 0.0;
        for (double x : v_) s += x;
        return s / double(v_.size());
    }
    /// Grid quadrature of the samples (exact trapezoid rule on the torus).
    double integral() const { return mean() * L_ * L_; }

    double l2_norm() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return std::sqrt(s * h() * h());
    }

    ScalarGrid& operator+=(const ScalarGrid& o) {
        for (size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    ScalarGrid& operator-=(const ScalarGrid& o) {
        for (size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    ScalarGrid& operator*=(double s) {
        for (double& x : v_) x *= s;
        return *this;
    }

    template <class F>
    void fill_with(F&& f) {
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) (*this)(i, j) = f(point(i, j));
    }

  private:
    int n_ = 0;
    double L_ = 0.0;
    std::vector<double> v_;
};

inline ScalarGrid operator+(ScalarGrid a, const ScalarGrid& b) { return a += b; }
inline ScalarGrid operator-(ScalarGrid a, const ScalarGrid& b) { return a -= b; }
inline ScalarGrid operator*(double s, ScalarGrid a) { return a *= s; }

inline ScalarGrid pointwise(const ScalarGrid& a, const ScalarGrid& b) {
    ScalarGrid r = a;
    for (size_t k = 0; k < r.size(); ++k) r[k] *= b[k];
    return r;
}

/// Two-component vector field (u1, u2) on a shared grid.
struct VectorGrid {
    ScalarGrid x, y;

    VectorGrid() = default;
    VectorGrid(int n, double L) : x(n, L), y(n, L) {}
    VectorGrid(ScalarGrid cx, ScalarGrid cy) : x(std::move(cx)), y(std::move(cy)) {
        if (!x.same_grid(y)) throw std::invalid_argument("VectorGrid: component grids differ");
    }

    int n() const { return x.n(); }
    double L() const { return x.L(); }
    bool finite() const { return x.finite() && y.finite(); }

    double max_norm() const {
        double m = 0.0;
        for (size_t k = 0; k < x.size(); ++k) m = std::max(m, std::hypot(x[k], y[k]));
        return m;
    }
    double l2_norm() const {
        double s = 0.0;
        for (size_t k = 0; k < x.size(); ++k) s += x[k] * x[k] + y[k] * y[k];
        return std::sqrt(s * x.h() * x.h());
    }

    VectorGrid& operator+=(const VectorGrid& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    VectorGrid& operator-=(const VectorGrid& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    VectorGrid& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }
};

inline VectorGrid operator+(VectorGrid a, const VectorGrid& b) { return a += b; }
inline VectorGrid operator-(VectorGrid a, const VectorGrid& b) { return a -= b; }
inline VectorGrid operator*(double s, VectorGrid a) { return a *= s; }

/// 2x2 tensor field; components share one grid.
struct MatrixGrid {
    ScalarGrid xx, xy, yx, yy;

    MatrixGrid() = default;
    MatrixGrid(int n, double L) : xx(n, L), xy(n, L), yx(n, L), yy(n, L) {}

    int n() const { return xx.n(); }
    double L() const { return xx.L(); }

    const ScalarGrid& comp(int j, int k) const {
        if (j == 0) return k == 0 ? xx : xy;
        return k == 0 ? yx : yy;
    }
    ScalarGrid& comp(int j, int k) {
        if (j == 0) return k == 0 ? xx : xy;
        return k == 0 ? yx : yy;
    }

    double max_asymmetry() const {
        double m = 0.0;
        for (size_t k = 0; k < xx.size(); ++k) m = std::max(m, std::abs(xy[k] - yx[k]));
        return m;
    }
};

}  // namespace patchns
