#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace encnav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double norm_sq() const { return x * x + y * y; }

    Vec2 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
    Vec2 rotated(double angle) const {
        const double c = std::cos(angle), s = std::sin(angle);
        return {c * x - s * y, s * x + c * y};
    }
    Vec2 perp() const { return {-y, x}; }

    bool operator==(const Vec2& o) const = default;
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Wraps an angle into [0, 2*pi).
inline double wrap_two_pi(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;  // fmod rounding can land exactly on 2*pi
    return r;
}

/// Wraps an angle into [-pi, pi).
inline double wrap_pi(double a) {
    double r = wrap_two_pi(a + kPi) - kPi;
    if (r >= kPi) r = -kPi;
    return r;
}

/// Wraps an undirected line orientation into [0, pi).
inline double wrap_half_turn(double a) {
    double r = std::fmod(a, kPi);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r = 0.0;
    return r;
}

/// Robot pose in the plane. theta normalized to [-pi, pi).
struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2D() = default;
    Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_pi(theta_)) {
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(theta))
            throw std::invalid_argument("Pose2D: non-finite field");
    }

    Vec2 position() const { return {x, y}; }

    /// Maps a point from this pose's local frame to the global frame.
    Vec2 to_global(const Vec2& local) const { return position() + local.rotated(theta); }

    /// Maps a global point into this pose's local frame.
    Vec2 to_local(const Vec2& global) const { return (global - position()).rotated(-theta); }
};

struct Segment {
    Vec2 a;
    Vec2 b;

    Vec2 direction() const { return (b - a).normalized(); }
    double length() const { return distance(a, b); }
};

/// Distance from point p to the segment (not the infinite line).
inline double point_segment_distance(const Vec2& p, const Segment& s) {
    const Vec2 d = s.b - s.a;
    const double len2 = d.norm_sq();
    if (len2 == 0.0) return distance(p, s.a);
    double t = (p - s.a).dot(d) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, s.a + d * t);
}

/// Ray-segment intersection. Returns the ray parameter t >= 0 (distance for a
/// unit direction) or infinity when there is no hit.
inline double ray_segment_intersect(const Vec2& origin, const Vec2& dir, const Segment& s) {
    const Vec2 v1 = origin - s.a;
    const Vec2 v2 = s.b - s.a;
    const Vec2 v3 = dir.perp();
    const double denom = v2.dot(v3);
    if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
    const double t = v2.cross(v1) / denom;   // along the ray
    const double u = v1.dot(v3) / denom;     // along the segment
    if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
    return std::numeric_limits<double>::infinity();
}

/// Minimum distance between two segments.
inline double segment_segment_distance(const Segment& s1, const Segment& s2) {
    // Intersection test first.
    const Vec2 d1 = s1.b - s1.a, d2 = s2.b - s2.a;
    const double denom = d1.cross(d2);
    if (std::abs(denom) > 1e-12) {
        const Vec2 w = s2.a - s1.a;
        const double t = w.cross(d2) / denom;
        const double u = w.cross(d1) / denom;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) return 0.0;
    }
    double d = point_segment_distance(s1.a, s2);
    d = std::min(d, point_segment_distance(s1.b, s2));
    d = std::min(d, point_segment_distance(s2.a, s1));
    d = std::min(d, point_segment_distance(s2.b, s1));
    return d;
}

}  // namespace encnav
