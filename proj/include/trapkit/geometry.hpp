// Planar geometry for the lane world: vectors, oriented rectangles,
// ray casting, and rectangle overlap tests.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace trapkit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{1.0, 0.0};
    }
    // Counter-clockwise perpendicular.
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 heading_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

struct Segment {
    Vec2 a;
    Vec2 b;
};

// Distance from `origin` along unit ray `dir` to segment [a,b]; +inf on miss.
inline double ray_segment_distance(Vec2 origin, Vec2 dir, const Segment& seg) {
    const Vec2 edge = seg.b - seg.a;
    const double denom = dir.cross(edge);
    if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
    const Vec2 rel = seg.a - origin;
    const double t = rel.cross(edge) / denom;   // distance along ray
    const double u = rel.cross(dir) / denom;    // position along segment
    if (t < 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
    return t;
}

// Axis-aligned-in-body-frame rectangle with arbitrary world heading.
struct OrientedRect {
    Vec2 center;
    Vec2 heading;  // unit vector along the long axis
    double length = 4.5;
    double width = 1.8;

    std::array<Vec2, 4> corners() const {
        const Vec2 fwd = heading * (length * 0.5);
        const Vec2 side = heading.perp() * (width * 0.5);
        return {center + fwd + side, center + fwd - side,
                center - fwd - side, center - fwd + side};
    }

    std::array<Segment, 4> edges() const {
        const auto c = corners();
        return {Segment{c[0], c[1]}, Segment{c[1], c[2]},
                Segment{c[2], c[3]}, Segment{c[3], c[0]}};
    }
};

// Separating-axis overlap test for two oriented rectangles.
inline bool rects_overlap(const OrientedRect& r1, const OrientedRect& r2) {
    const auto c1 = r1.corners();
    const auto c2 = r2.corners();
    const std::array<Vec2, 4> axes = {r1.heading, r1.heading.perp(),
                                      r2.heading, r2.heading.perp()};
    for (const Vec2& axis : axes) {
        double min1 = std::numeric_limits<double>::infinity(), max1 = -min1;
        double min2 = min1, max2 = max1;
        for (const Vec2& p : c1) {
            const double proj = p.dot(axis);
            min1 = std::min(min1, proj);
            max1 = std::max(max1, proj);
        }
        for (const Vec2& p : c2) {
            const double proj = p.dot(axis);
            min2 = std::min(min2, proj);
            max2 = std::max(max2, proj);
        }
        if (max1 < min2 || max2 < min1) return false;
    }
    return true;
}

}  // namespace trapkit
