#pragma once

#include <functional>
#include <optional>

#include "hull/window.hpp"

namespace hull {

/// Certified enclosure of d(T1, T2); width <= tol unless `certified` is false.
struct MetricBracket {
    Rational lo, hi;
    bool certified = false;
};

namespace metric_detail {

struct Candidate {
    Vec v;                          // T1 and T2 + v are compared
    std::vector<Support> differing; // known differing tiles, in T1 coordinates
};

inline bool has_tile(const TileSet& set, std::uint32_t proto, const Vec& puncture) {
    auto iv = set.to_ivec(puncture);
    if (!iv) return false;
    auto hit = set.tile_at(*iv);
    return hit && set.proto(*hit) == proto;
}

inline Candidate collect(const Window& w1, const Window& w2, const Vec& v) {
    Candidate c{v, {}};
    for (std::uint32_t i = 0; i < w1.size(); ++i) {
        if (has_tile(w2, w1.proto(i), w1.puncture(i) - v)) continue;
        Support s = w1.support(i);
        if (meets_ball(s, w1.dim(), v, w2.radius())) c.differing.push_back(std::move(s));
    }
    for (std::uint32_t j = 0; j < w2.size(); ++j) {
        if (has_tile(w1, w2.proto(j), w2.puncture(j) + v)) continue;
        Support s = translate(w2.support(j), v);
        if (meets_ball(s, w1.dim(), Vec{}, w1.radius())) c.differing.push_back(std::move(s));
    }
    return c;
}

/// Largest dyadic a in [lo, 1) with pred(a) false, given pred(lo) false and pred monotone.
template <class Pred>
std::pair<Rational, Rational> bisect(Rational lo, Pred&& pred, const Rational& tol) {
    Rational hi = 1;
    while (hi - lo > tol) {
        Rational mid = (lo + hi) / 2;
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return {lo, hi};
}

// One-dimensional exact evaluation: max over y in Y(eps) of the agreement bounds.
struct Line1D {
    std::vector<std::pair<Rational, Rational>> intervals;  // differing tiles near v/2
    Rational v, n1, n2;

    std::optional<Rational> a_hi(const Rational& y) const {
        std::optional<Rational> best;
        for (const auto& [lo, hi] : intervals) {
            Rational d = y < lo ? Rational(lo - y) : (y > hi ? Rational(y - hi) : Rational(0));
            if (!best || d < *best) best = d;
        }
        return best;
    }
    Rational r_c(const Rational& y) const {
        Rational a = n1 - abs(y), b = n2 - abs(y - v);
        return std::min(a, b);
    }
    std::vector<Rational> points(const Rational& a, const Rational& b) const {
        std::vector<Rational> inc{n1, n2 - v}, dec{n1, n2 + v};
        for (const auto& [lo, hi] : intervals) inc.push_back(-hi), dec.push_back(lo);
        std::vector<Rational> out{a, b};
        for (const auto& al : inc)
            for (const auto& be : dec) {
                Rational y = (be - al) / 2;
                if (a <= y && y <= b) out.push_back(y);
            }
        return out;
    }
    // which = 0: upper agreement bound (necessary); which = 1: lower bound (sufficient)
    bool feasible(const Rational& eps, int which) const {
        Rational a = std::max(Rational(-eps), Rational(v - eps)), b = std::min(eps, Rational(v + eps));
        if (a > b) return false;
        Rational need = 1 / eps;
        for (const auto& y : points(a, b)) {
            auto hi = a_hi(y);
            if (which == 0) {
                if (!hi || *hi >= need) return true;
            } else {
                Rational lo = r_c(y);
                if (hi && *hi < lo) lo = *hi;
                if (lo >= need) return true;
            }
        }
        return false;
    }
};

inline MetricBracket one_sided(const Window& w1, const Window& w2, const Rational& tol) {
    const int dim = w1.dim();
    // any tile of W1 whose closed support holds the origin must reappear in T2 + v
    std::optional<std::uint32_t> anchor;
    for (auto i : w1.tiles_meeting_ball(Vec{}, frac(1, 1000)))
        if (contains_closed(w1.support(i), dim, Vec{})) {
            anchor = i;
            break;
        }
    if (!anchor) throw Error(ErrorKind::insufficient_window, "tiling-core", "window does not cover the origin");

    std::vector<Candidate> candidates;
    for (auto j : w2.tiles_meeting_ball(w1.puncture(*anchor), 2)) {
        if (w2.proto(j) != w1.proto(*anchor)) continue;
        Vec v = w1.puncture(*anchor) - w2.puncture(j);
        if (norm2(v) >= 4) continue;
        candidates.push_back(collect(w1, w2, v));
    }

    MetricBracket out{1, 1, true};
    for (const auto& cand : candidates) {
        Rational v2 = norm2(cand.v);
        auto half = exact_sqrt(v2);
        Rational start_lo = half ? Rational(*half / 2) : Rational(sqrt_lower(v2) / 2);
        Rational start_hi = half ? Rational(*half / 2) : Rational(sqrt_upper(v2) / 2);
        std::function<bool(const Rational&)> nec, suf;
        Line1D line;
        Rational dmin2 = -1;
        if (dim == 1) {
            line.v = cand.v.x;
            line.n1 = w1.radius();
            line.n2 = w2.radius();
            double best = std::numeric_limits<double>::infinity();
            Rational y0 = cand.v.x / 2;
            auto dd = [&](const Support& s) {
                double lo = s.vertices[0].x.get_d(), hi = s.vertices[1].x.get_d(), y = y0.get_d();
                return std::max({lo - y, y - hi, 0.0});
            };
            for (const auto& s : cand.differing) best = std::min(best, dd(s));
            for (const auto& s : cand.differing)
                if (dd(s) <= best + 3) line.intervals.push_back({s.vertices[0].x, s.vertices[1].x});
            nec = [&](const Rational& e) { return line.feasible(e, 0); };
            suf = [&](const Rational& e) { return line.feasible(e, 1); };
        } else {
            Vec y0 = frac(1, 2) * cand.v;
            for (const auto& s : cand.differing) {
                Rational d = dist2(s, dim, y0);
                if (dmin2 < 0 || d < dmin2) dmin2 = d;
            }
            Rational margin = std::min(w1.radius(), w2.radius()) - sqrt_upper(v2) / 2;
            nec = [&, v2](const Rational& e) {
                if (v2 > 4 * e * e) return false;
                if (dmin2 < 0) return true;
                return sqrt_upper(dmin2) + sqrt_upper(e * e - v2 / 4) >= 1 / e;
            };
            suf = [&, v2, margin](const Rational& e) {
                if (v2 > 4 * e * e) return false;
                if (margin < 1 / e) return false;
                return dmin2 < 0 || dmin2 * e * e >= 1;
            };
        }
        Rational lo_v, hi_v;
        if (start_lo > 0 && nec(start_lo))
            lo_v = start_lo;
        else
            lo_v = bisect(start_lo, nec, tol).first;
        if (start_hi > 0 && suf(start_hi))
            hi_v = start_hi;
        else {
            auto [a, b] = bisect(start_hi, suf, tol);
            hi_v = (b < 1 && suf(b)) ? b : Rational(1);
        }
        out.lo = std::min(out.lo, lo_v);
        out.hi = std::min(out.hi, hi_v);
    }
    return out;
}

} // namespace metric_detail

inline Rational default_metric_tolerance() {
    Rational t(mpz_class(1), mpz_class(1) << 40);
    t.canonicalize();
    return t;
}

/**
 * Bracket for the tiling metric between the tilings sampled by two windows.
 * Identical windows are read as samples of one tiling.
 */
inline MetricBracket tiling_metric(const Window& w1, const Window& w2, const Rational& tol = default_metric_tolerance()) {
    if (w1.rule().name != w2.rule().name || w1.dim() != w2.dim())
        throw Error(ErrorKind::precondition, "tiling-core", "windows come from different rules");
    if (w1.radius() < 2 || w2.radius() < 2)
        throw Error(ErrorKind::insufficient_window, "tiling-core", "window radius below 2 cannot bound the metric");
    if (w1.radius() == w2.radius() && w1.tiles() == w2.tiles()) return {0, 0, true};
    auto a = metric_detail::one_sided(w1, w2, tol);
    auto b = metric_detail::one_sided(w2, w1, tol);
    MetricBracket out{std::max(a.lo, b.lo), std::min(a.hi, b.hi), false};
    if (out.lo > out.hi) out.lo = out.hi;
    out.certified = out.hi - out.lo <= tol;
    return out;
}

} // namespace hull
