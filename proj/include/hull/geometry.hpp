#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "hull/rational.hpp"

namespace hull {

/// Point of R^d with exact coordinates; y is zero when d = 1.
struct Vec {
    Rational x, y;

    Vec() = default;
    Vec(Rational x_, Rational y_ = 0) : x(std::move(x_)), y(std::move(y_)) {}

    friend Vec operator+(const Vec& a, const Vec& b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec operator-(const Vec& a, const Vec& b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec operator-(const Vec& a) { return {-a.x, -a.y}; }
    friend Vec operator*(const Rational& s, const Vec& a) { return {s * a.x, s * a.y}; }
    Vec& operator+=(const Vec& b) { x += b.x; y += b.y; return *this; }
    Vec& operator-=(const Vec& b) { x -= b.x; y -= b.y; return *this; }
    friend bool operator==(const Vec& a, const Vec& b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(const Vec& a, const Vec& b) { return !(a == b); }
    friend bool operator<(const Vec& a, const Vec& b) {
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    }
};

inline Rational dot(const Vec& a, const Vec& b) { return a.x * b.x + a.y * b.y; }
inline Rational cross(const Vec& a, const Vec& b) { return a.x * b.y - a.y * b.x; }
inline Rational norm2(const Vec& a) { return dot(a, a); }

/// Integer lattice point used by windows (coordinates scaled by a common denominator).
using IVec = std::array<std::int64_t, 2>;

inline IVec operator+(const IVec& a, const IVec& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline IVec operator-(const IVec& a, const IVec& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline __int128 inorm2(const IVec& a) {
    return static_cast<__int128>(a[0]) * a[0] + static_cast<__int128>(a[1]) * a[1];
}

/**
 * Support of a prototile. For d = 1 the vertices are {lo, hi} on the x axis;
 * for d = 2 they form a simple polygon in counter-clockwise order.
 */
struct Support {
    std::vector<Vec> vertices;
};

inline Support translate(const Support& s, const Vec& v) {
    Support out = s;
    for (auto& p : out.vertices) p += v;
    return out;
}

inline Support scale(const Support& s, const Rational& f) {
    Support out = s;
    for (auto& p : out.vertices) p = f * p;
    return out;
}

namespace geom_detail {

inline Rational signed_area2(const std::vector<Vec>& poly) {
    Rational a = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
    return a;
}

inline std::vector<Vec> drop_collinear(std::vector<Vec> poly) {
    bool changed = true;
    while (changed && poly.size() > 3) {
        changed = false;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec& a = poly[(i + poly.size() - 1) % poly.size()];
            const Vec& b = poly[i];
            const Vec& c = poly[(i + 1) % poly.size()];
            if (cross(b - a, c - b) == 0) {
                poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(i));
                changed = true;
                break;
            }
        }
    }
    return poly;
}

inline bool in_triangle_closed(const Vec& p, const Vec& a, const Vec& b, const Vec& c) {
    return cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0;
}

using Triangle = std::array<Vec, 3>;

/// Ear clipping on a counter-clockwise simple polygon.
inline std::vector<Triangle> triangulate(std::vector<Vec> poly) {
    poly = drop_collinear(std::move(poly));
    std::vector<Triangle> out;
    while (poly.size() > 3) {
        bool clipped = false;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            std::size_t ip = (i + poly.size() - 1) % poly.size(), in = (i + 1) % poly.size();
            const Vec &a = poly[ip], &b = poly[i], &c = poly[in];
            if (cross(b - a, c - b) <= 0) continue;
            bool ear = true;
            for (std::size_t j = 0; j < poly.size() && ear; ++j) {
                if (j == ip || j == i || j == in) continue;
                if (in_triangle_closed(poly[j], a, b, c)) ear = false;
            }
            if (!ear) continue;
            out.push_back({a, b, c});
            poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(i));
            poly = drop_collinear(std::move(poly));
            clipped = true;
            break;
        }
        if (!clipped) throw Error(ErrorKind::rule_invalid, "tiling-core", "polygon is not simple");
    }
    if (poly.size() == 3) out.push_back({poly[0], poly[1], poly[2]});
    return out;
}

/// Area of the intersection of two counter-clockwise triangles (Sutherland-Hodgman).
inline Rational triangle_overlap(const Triangle& subject, const Triangle& clip) {
    std::vector<Vec> cur(subject.begin(), subject.end());
    for (int e = 0; e < 3 && !cur.empty(); ++e) {
        const Vec& a = clip[e];
        const Vec& b = clip[(e + 1) % 3];
        std::vector<Vec> next;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const Vec& p = cur[i];
            const Vec& q = cur[(i + 1) % cur.size()];
            Rational sp = cross(b - a, p - a), sq = cross(b - a, q - a);
            if (sp >= 0) next.push_back(p);
            if ((sp > 0 && sq < 0) || (sp < 0 && sq > 0)) {
                Rational t = sp / (sp - sq);
                next.push_back(p + t * (q - p));
            }
        }
        cur = std::move(next);
    }
    if (cur.size() < 3) return 0;
    return signed_area2(cur) / 2;
}

inline Rational seg_dist2(const Vec& p, const Vec& a, const Vec& b) {
    Vec ab = b - a;
    Rational len2 = norm2(ab);
    if (len2 == 0) return norm2(p - a);
    Rational t = dot(p - a, ab) / len2;
    if (t <= 0) return norm2(p - a);
    if (t >= 1) return norm2(p - b);
    return norm2(p - (a + t * ab));
}

inline bool on_segment(const Vec& p, const Vec& a, const Vec& b) {
    if (cross(b - a, p - a) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

} // namespace geom_detail

/// Length (d = 1) or area (d = 2).
inline Rational measure(const Support& s, int dim) {
    if (dim == 1) return s.vertices.at(1).x - s.vertices.at(0).x;
    return geom_detail::signed_area2(s.vertices) / 2;
}

/// Brings a support into normal form: ordered interval or counter-clockwise polygon.
inline Support normalized(Support s, int dim) {
    if (dim == 1) {
        if (s.vertices.size() != 2) throw Error(ErrorKind::rule_invalid, "tiling-core", "interval needs 2 endpoints");
        if (s.vertices[1].x < s.vertices[0].x) std::swap(s.vertices[0], s.vertices[1]);
        return s;
    }
    if (s.vertices.size() < 3) throw Error(ErrorKind::rule_invalid, "tiling-core", "polygon needs 3 vertices");
    if (geom_detail::signed_area2(s.vertices) < 0) std::reverse(s.vertices.begin(), s.vertices.end());
    return s;
}

inline bool contains_closed(const Support& s, int dim, const Vec& p) {
    if (dim == 1) return s.vertices[0].x <= p.x && p.x <= s.vertices[1].x;
    const auto& v = s.vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if (geom_detail::on_segment(p, v[j], v[i])) return true;
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            Rational xi = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

/// Squared distance from p to the boundary of the support.
inline Rational boundary_dist2(const Support& s, int dim, const Vec& p) {
    if (dim == 1) {
        Rational a = p.x - s.vertices[0].x, b = s.vertices[1].x - p.x;
        a *= a;
        b *= b;
        return std::min(a, b);
    }
    const auto& v = s.vertices;
    Rational best = -1;
    for (std::size_t i = 0; i < v.size(); ++i) {
        Rational d = geom_detail::seg_dist2(p, v[i], v[(i + 1) % v.size()]);
        if (best < 0 || d < best) best = d;
    }
    return best;
}

/// Squared distance from p to the (closed) support; zero inside.
inline Rational dist2(const Support& s, int dim, const Vec& p) {
    if (contains_closed(s, dim, p)) return 0;
    return boundary_dist2(s, dim, p);
}

inline bool strictly_interior(const Support& s, int dim, const Vec& p) {
    return contains_closed(s, dim, p) && boundary_dist2(s, dim, p) > 0;
}

/// Whether the open ball B_r(c) meets the support.
inline bool meets_ball(const Support& s, int dim, const Vec& c, const Rational& r) {
    return dist2(s, dim, c) < r * r;
}

/// Whether the open ball B_r(c) lies inside the support.
inline bool ball_inside(const Support& s, int dim, const Vec& c, const Rational& r) {
    return contains_closed(s, dim, c) && boundary_dist2(s, dim, c) >= r * r;
}

/// Measure of the intersection of two supports.
inline Rational overlap_measure(const Support& a, const Support& b, int dim) {
    if (dim == 1) {
        Rational lo = std::max(a.vertices[0].x, b.vertices[0].x);
        Rational hi = std::min(a.vertices[1].x, b.vertices[1].x);
        return hi > lo ? Rational(hi - lo) : Rational(0);
    }
    auto ta = geom_detail::triangulate(a.vertices);
    auto tb = geom_detail::triangulate(b.vertices);
    Rational total = 0;
    for (const auto& x : ta)
        for (const auto& y : tb) total += geom_detail::triangle_overlap(x, y);
    return total;
}

inline bool interiors_disjoint(const Support& a, const Support& b, int dim) {
    return overlap_measure(a, b, dim) == 0;
}

inline bool contains_support(const Support& outer, const Support& inner, int dim) {
    return overlap_measure(inner, outer, dim) == measure(inner, dim);
}

/// Vertex average, an interior-or-boundary reference point.
inline Vec vertex_mean(const Support& s) {
    Vec m;
    for (const auto& p : s.vertices) m += p;
    return frac(1, static_cast<long>(s.vertices.size())) * m;
}

/// Area centroid of a polygon (d = 2) or midpoint of an interval.
inline Vec centroid(const Support& s, int dim) {
    if (dim == 1) return frac(1, 2) * (s.vertices[0] + s.vertices[1]);
    Rational a2 = geom_detail::signed_area2(s.vertices);
    Vec c;
    const auto& v = s.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec& p = v[i];
        const Vec& q = v[(i + 1) % v.size()];
        Rational w = cross(p, q);
        c += w * (p + q);
    }
    return Rational(1) / (3 * a2) * c;
}

/// Largest squared distance from p to a point of the support (attained at a vertex).
inline Rational reach2(const Support& s, const Vec& p) {
    Rational best = 0;
    for (const auto& v : s.vertices) best = std::max(best, Rational(norm2(v - p)));
    return best;
}

} // namespace hull
