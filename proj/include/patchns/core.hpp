#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace patchns {

/// Thrown when the simulation state leaves its admissible regime
/// (density out of band, non-positive Jacobian, NaN fields, ...).
/// Callers translate this into a run summary with a failure status
/// rather than treating it as a programming error.
class invalid_state : public std::runtime_error {
  public:
    explicit invalid_state(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
    /// Counterclockwise rotation by 90 degrees.
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Wrap a coordinate into [0, L).
inline double wrap(double x, double L) {
    double y = std::fmod(x, L);
    if (y < 0.0) y += L;
    // fmod can return L for x slightly below a multiple of L
    if (y >= L) y -= L;
    return y;
}

inline Vec2 wrap(const Vec2& p, double L) { return {wrap(p.x, L), wrap(p.y, L)}; }

/// Signed difference x - y reduced to (-L/2, L/2] (minimal periodic image).
inline double periodic_delta(double x, double y, double L) {
    double d = x - y;
    d -= L * std::round(d / L);
    return d;
}

inline Vec2 periodic_delta(const Vec2& a, const Vec2& b, double L) {
    return {periodic_delta(a.x, b.x, L), periodic_delta(a.y, b.y, L)};
}

inline double periodic_dist(const Vec2& a, const Vec2& b, double L) {
    return periodic_delta(a, b, L).norm();
}

/// Deterministic RNG used by all sampling estimators. Seeded from the
/// scenario seed plus a purpose tag so independent estimators do not
/// share streams.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t purpose) {
    std::seed_seq seq{seed, purpose, std::uint64_t(0x9e3779b97f4a7c15ULL)};
    return std::mt19937_64(seq);
}

}  // namespace patchns
