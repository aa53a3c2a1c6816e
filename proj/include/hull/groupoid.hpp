#pragma once

#include <variant>

#include "hull/parallel.hpp"
#include "hull/window.hpp"

namespace hull {

/// Arrow of the sampled groupoid: from the unit at puncture src to the unit at puncture rng.
struct SampledArrow {
    std::uint32_t src = 0;
    std::uint32_t rng = 0;

    friend bool operator==(const SampledArrow&, const SampledArrow&) = default;
    friend auto operator<=>(const SampledArrow&, const SampledArrow&) = default;
};

inline IVec arrow_vector(const TileSet& w, const SampledArrow& a) { return w.ipuncture(a.rng) - w.ipuncture(a.src); }

inline SampledArrow invert(const SampledArrow& a) { return {a.rng, a.src}; }

/// a after b; needs src(a) = rng(b).
inline SampledArrow compose(const SampledArrow& a, const SampledArrow& b) {
    if (a.src != b.rng)
        throw Error(ErrorKind::composition, "groupoid",
                    "source " + std::to_string(a.src) + " does not match range " + std::to_string(b.rng));
    return {b.src, a.rng};
}

/// V(P, t, t'): arrows moving the copy of P pointed at t to the copy pointed at t'.
struct BisectionSet {
    PatchClass patch;
    std::uint32_t src_tile = 0;
    std::uint32_t rng_tile = 0;

    friend bool operator==(const BisectionSet&, const BisectionSet&) = default;
};

inline BisectionSet inverse(const BisectionSet& b) { return {b.patch, b.rng_tile, b.src_tile}; }

struct BallSet {
    Rational radius;
};

/// Ball(R) (translations of magnitude < R) or a finite union of bisections.
class CompactSet {
public:
    static CompactSet ball(Rational radius) {
        if (radius <= 0) throw Error(ErrorKind::precondition, "groupoid", "ball radius must be positive");
        CompactSet c;
        c.data_ = BallSet{std::move(radius)};
        return c;
    }
    static CompactSet bisections(std::vector<BisectionSet> parts) {
        CompactSet c;
        c.data_ = std::move(parts);
        return c;
    }

    bool is_ball() const { return std::holds_alternative<BallSet>(data_); }
    const Rational& ball_radius() const { return std::get<BallSet>(data_).radius; }
    const std::vector<BisectionSet>& parts() const { return std::get<std::vector<BisectionSet>>(data_); }

    CompactSet inverse() const {
        if (is_ball()) return *this;
        std::vector<BisectionSet> inv;
        for (const auto& p : parts()) inv.push_back(hull::inverse(p));
        return bisections(std::move(inv));
    }

    /// Window margin needed around a unit to evaluate this set's fibre there.
    Rational margin() const {
        if (is_ball()) return ball_radius();
        Rational best2 = 0;
        for (const auto& b : parts()) {
            const auto& pc = b.patch;
            for (std::uint32_t s : {b.src_tile, b.rng_tile})
                for (const auto& t : pc.tiles) best2 = std::max(best2, Rational(norm2(t.offset - pc.tiles[s].offset)));
        }
        return sqrt_upper(best2, 24) + 1;
    }

    std::string describe() const {
        if (is_ball()) return "Ball(" + to_string(ball_radius()) + ")";
        return "Union(" + std::to_string(parts().size()) + " bisections)";
    }

private:
    std::variant<BallSet, std::vector<BisectionSet>> data_;
};

struct SampledFibre {
    std::uint32_t unit = 0;
    std::vector<SampledArrow> arrows;
    Rational margin;  ///< every arrow at the unit of magnitude below this is present in the window
};

namespace groupoid_detail {

/// Whether P, placed with tile `at` over window tile u, occurs in the window.
inline bool placed(const TileSet& w, std::uint32_t u, const PatchClass& pc, std::uint32_t at) {
    if (w.proto(u) != pc.tiles[at].proto) return false;
    const auto& rule = w.rule();
    Vec base = rule.puncture(pc.tiles[at]);
    for (const auto& t : pc.tiles) {
        auto d = w.to_ivec(rule.puncture(t) - base);
        if (!d) return false;
        auto hit = w.tile_at(w.ipuncture(u) + *d);
        if (!hit || w.proto(*hit) != t.proto) return false;
    }
    return true;
}

inline std::optional<std::uint32_t> shifted(const TileSet& w, std::uint32_t u, const PatchClass& pc, std::uint32_t from,
                                            std::uint32_t to) {
    const auto& rule = w.rule();
    auto d = w.to_ivec(rule.puncture(pc.tiles[to]) - rule.puncture(pc.tiles[from]));
    if (!d) return std::nullopt;
    return w.tile_at(w.ipuncture(u) + *d);
}

inline Rational room(const Window& w, std::uint32_t u) {
    Rational r = w.radius() - sqrt_upper(norm2(w.puncture(u)), 24);
    return r < 0 ? Rational(0) : r;
}

} // namespace groupoid_detail

/// Exact membership of a sampled arrow in C.
inline bool membership(const SampledArrow& g, const CompactSet& c, const Window& w) {
    if (c.is_ball()) return inorm2(arrow_vector(w, g)) <= strict_ball_limit(c.ball_radius(), w.den());
    w.require_valid(g.src, c.margin(), "groupoid");
    for (const auto& b : c.parts()) {
        if (!groupoid_detail::placed(w, g.src, b.patch, b.src_tile)) continue;
        auto r = groupoid_detail::shifted(w, g.src, b.patch, b.src_tile, b.rng_tile);
        if (r && *r == g.rng) return true;
    }
    return false;
}

/// Ranges of the arrows of Cu, sorted.
inline std::vector<std::uint32_t> fibre_ranges(const Window& w, std::uint32_t u, const CompactSet& c) {
    w.require_valid(u, c.margin(), "groupoid");
    std::vector<std::uint32_t> out;
    if (c.is_ball()) {
        w.visit_ball(w.ipuncture(u), c.ball_radius(), [&](std::uint32_t v) { out.push_back(v); });
    } else {
        for (const auto& b : c.parts()) {
            if (!groupoid_detail::placed(w, u, b.patch, b.src_tile)) continue;
            if (auto r = groupoid_detail::shifted(w, u, b.patch, b.src_tile, b.rng_tile)) out.push_back(*r);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Sources of the arrows of uC, sorted.
inline std::vector<std::uint32_t> cofibre_sources(const Window& w, std::uint32_t u, const CompactSet& c) {
    return fibre_ranges(w, u, c.inverse());
}

inline SampledFibre fibre(const Window& w, std::uint32_t u, const CompactSet& c) {
    SampledFibre f{u, {}, groupoid_detail::room(w, u)};
    for (auto v : fibre_ranges(w, u, c)) f.arrows.push_back({u, v});
    return f;
}

inline SampledFibre cofibre(const Window& w, std::uint32_t u, const CompactSet& c) {
    SampledFibre f{u, {}, groupoid_detail::room(w, u)};
    for (auto v : cofibre_sources(w, u, c)) f.arrows.push_back({v, u});
    return f;
}

/// A set of arrows at the unit u, held by their ranges (sorted, unique).
struct UnitArrows {
    std::uint32_t unit = 0;
    std::vector<std::uint32_t> ranges;

    bool contains(std::uint32_t v) const { return std::binary_search(ranges.begin(), ranges.end(), v); }
    std::size_t size() const { return ranges.size(); }
};

inline UnitArrows unit_arrows(const Window& w, std::uint32_t u, const CompactSet& a) { return {u, fibre_ranges(w, u, a)}; }

/// C Au: ranges z with (r(a) -> z) in C for some a in Au.
inline UnitArrows expand(const Window& w, const UnitArrows& a, const CompactSet& c) {
    UnitArrows out{a.unit, {}};
    for (auto v : a.ranges) {
        auto f = fibre_ranges(w, v, c);
        out.ranges.insert(out.ranges.end(), f.begin(), f.end());
    }
    std::sort(out.ranges.begin(), out.ranges.end());
    out.ranges.erase(std::unique(out.ranges.begin(), out.ranges.end()), out.ranges.end());
    return out;
}

/// I_C(Au) = {a in Au : C a inside Au}.
inline UnitArrows inner_part(const Window& w, const UnitArrows& a, const CompactSet& c) {
    UnitArrows out{a.unit, {}};
    for (auto v : a.ranges) {
        auto f = fibre_ranges(w, v, c);
        if (std::all_of(f.begin(), f.end(), [&](std::uint32_t z) { return a.contains(z); })) out.ranges.push_back(v);
    }
    return out;
}

/// C-boundary of Au: arrows g at u with Cg meeting both Au and its complement.
inline UnitArrows boundary(const Window& w, const UnitArrows& a, const CompactSet& c) {
    std::vector<std::uint32_t> candidates;
    auto inv = c.inverse();
    for (auto z : a.ranges) {
        auto f = fibre_ranges(w, z, inv);
        candidates.insert(candidates.end(), f.begin(), f.end());
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    UnitArrows out{a.unit, {}};
    for (auto g : candidates) {
        auto f = fibre_ranges(w, g, c);
        bool in = false, out_of = false;
        for (auto z : f) (a.contains(z) ? in : out_of) = true;
        if (in && out_of) out.ranges.push_back(g);
    }
    return out;
}

inline std::size_t outer_count(const Window& w, const UnitArrows& a, const CompactSet& c) {
    auto ca = expand(w, a, c);
    std::size_t n = 0;
    for (auto z : ca.ranges) n += !a.contains(z);
    return n;
}

inline void require_nonempty(const UnitArrows& a) {
    if (a.ranges.empty()) throw Error(ErrorKind::precondition, "groupoid", "invariance ratio of an empty fibre is undefined");
}

/// |C Au \ Au| / |Au|.
inline Rational invariance_ratio_i(const Window& w, const UnitArrows& a, const CompactSet& c) {
    require_nonempty(a);
    return frac(static_cast<long>(outer_count(w, a, c)), static_cast<long>(a.size()));
}

/// 1 - |I_C(Au)| / |Au|.
inline Rational invariance_ratio_ii(const Window& w, const UnitArrows& a, const CompactSet& c) {
    require_nonempty(a);
    return 1 - frac(static_cast<long>(inner_part(w, a, c).size()), static_cast<long>(a.size()));
}

struct InvarianceConstants {
    std::size_t c1 = 0;          ///< sup over units w of |Cw|
    std::size_t c2 = 0;          ///< sup over units v of |vC|
    std::size_t inf_fibre = 0;   ///< inf over units w of |Cw|
    std::size_t units = 0;
};

/// Suprema over the window's units that are valid for C and its inverse.
inline InvarianceConstants invariance_constants(const CompactSet& c, const Window& w) {
    Rational need = std::max(c.margin(), c.inverse().margin());
    auto units = w.valid_units(need);
    if (units.empty()) throw Error(ErrorKind::margin, "groupoid", "no unit of the window is valid for " + c.describe());
    auto inv = c.inverse();
    auto sizes = parallel_map<std::pair<std::size_t, std::size_t>>(units.size(), [&](std::size_t i) {
        return std::make_pair(fibre_ranges(w, units[i], c).size(), fibre_ranges(w, units[i], inv).size());
    });
    InvarianceConstants k;
    k.units = units.size();
    k.inf_fibre = sizes.front().first;
    for (const auto& [f, cf] : sizes) {
        k.c1 = std::max(k.c1, f);
        k.c2 = std::max(k.c2, cf);
        k.inf_fibre = std::min(k.inf_fibre, f);
    }
    return k;
}

} // namespace hull
