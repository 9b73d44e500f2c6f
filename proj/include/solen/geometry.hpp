#pragma once

// Small 2D geometry kernel: vectors, sign-symmetric rotations, ray/segment
// intersection and winding-number point classification. All lengths in mm.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace solen::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr bool operator==(const Vec2&) const = default;

    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        const double n = norm();
        return {x / n, y / n};
    }
    /// 90 degree counterclockwise turn.
    constexpr Vec2 perp() const { return {-y, x}; }
    /// Mirror about the y axis.
    constexpr Vec2 mirrored_x() const { return {-x, y}; }
};

constexpr Vec2 operator*(double k, Vec2 v) { return v * k; }

inline double degrees_to_radians(double deg) { return deg * (std::numbers::pi / 180.0); }
inline double radians_to_degrees(double rad) { return rad * (180.0 / std::numbers::pi); }

/// Plane rotation. Built so that rot(-a) is the exact bitwise mirror of
/// rot(+a): cos is taken of |a| and the sine carries the sign. This keeps
/// mirrored scenes bit-symmetric.
struct Rot2 {
    double c = 1.0;
    double s = 0.0;

    static Rot2 identity() { return {1.0, 0.0}; }

    static Rot2 from_radians(double a) {
        return {std::cos(std::fabs(a)), std::copysign(std::sin(std::fabs(a)), a)};
    }

    static Rot2 from_degrees(double deg) { return from_radians(degrees_to_radians(deg)); }

    constexpr Vec2 apply(Vec2 v) const { return {v.x * c - v.y * s, v.x * s + v.y * c}; }
    constexpr Vec2 apply_inverse(Vec2 v) const { return {v.x * c + v.y * s, -v.x * s + v.y * c}; }
    constexpr Rot2 inverse() const { return {c, -s}; }
};

struct Segment {
    Vec2 a;
    Vec2 b;

    Vec2 midpoint() const { return {(a.x + b.x) * 0.5, (a.y + b.y) * 0.5}; }
    double length() const { return (b - a).norm(); }
};

struct RaySegmentHit {
    double t;    // ray parameter, origin + t * direction
    double u;    // segment parameter in [0, 1]
};

/// First intersection of the ray origin + t*dir (t > t_min) with a segment.
inline std::optional<RaySegmentHit> intersect_ray_segment(Vec2 origin, Vec2 dir,
                                                          const Segment& seg,
                                                          double t_min) {
    const Vec2 e = seg.b - seg.a;
    const double den = dir.cross(e);
    if (den == 0.0) return std::nullopt;  // parallel (grazing hits resolve on neighbours)
    const Vec2 ao = seg.a - origin;
    const double t = ao.cross(e) / den;
    const double u = ao.cross(dir) / den;
    if (t <= t_min || u < 0.0 || u > 1.0) return std::nullopt;
    return RaySegmentHit{t, u};
}

/// Winding number of a closed polyline around p. Nonzero means inside.
inline int winding_number(Vec2 p, std::span<const Vec2> poly) {
    int wn = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[(i + 1) % n];
        const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if (a.y <= p.y) {
            if (b.y > p.y && side > 0.0) ++wn;
        } else if (b.y <= p.y && side < 0.0) {
            --wn;
        }
    }
    return wn;
}

namespace detail {

inline bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        const double v = (q - p).cross(r - p);
        return (v > 0.0) - (v < 0.0);
    };
    const int o1 = orient(a, b, c);
    const int o2 = orient(a, b, d);
    const int o3 = orient(c, d, a);
    const int o4 = orient(c, d, b);
    return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

} // namespace detail

/// True when the closed polyline has no self-intersections (shared endpoints
/// between consecutive edges allowed).
inline bool polyline_is_simple(std::span<const Vec2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (detail::segments_properly_intersect(a, b, poly[j], poly[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

} // namespace solen::geom
