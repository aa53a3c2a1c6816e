#pragma once

#include <map>
#include <set>

#include "hull/window.hpp"

namespace hull {

/// A supertile of one prototile realized as a tile set, with tile paths in tile-set order.
struct SupertileSample {
    std::uint32_t proto = 0;
    int level = 0;
    Support region;
    TileSet tiles;
    std::vector<std::vector<std::uint8_t>> paths;
};

inline SupertileSample make_supertile(std::shared_ptr<const SubstitutionRule> rule, std::uint32_t proto, int level) {
    auto pathed = inflate_with_paths(*rule, proto, level);
    Rational lam = 1;
    for (int i = 0; i < level; ++i) lam *= rule->inflation;
    SupertileSample s;
    s.proto = proto;
    s.level = level;
    s.region = scale(rule->prototiles[proto].support, lam);
    s.tiles = TileSet(rule, pathed.tiles);
    for (std::uint32_t i = 0; i < s.tiles.size(); ++i) s.paths.push_back(pathed.paths[s.tiles.source_index(i)]);
    return s;
}

/// Punctures u of the supertile with B_R(x(u)) inside its region.
inline std::vector<std::uint32_t> interior_punctures(const SupertileSample& s, const Rational& radius) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t u = 0; u < s.tiles.size(); ++u)
        if (ball_inside(s.region, s.tiles.dim(), s.tiles.puncture(u), radius)) out.push_back(u);
    return out;
}

inline std::size_t supertile_size(const SubstitutionRule& rule, std::uint32_t proto, int level) {
    std::vector<std::size_t> count(rule.prototiles.size(), 0);
    count[proto] = 1;
    for (int l = 0; l < level; ++l) {
        std::vector<std::size_t> next(count.size(), 0);
        for (std::size_t p = 0; p < count.size(); ++p)
            for (const auto& c : rule.children[p]) next[c.proto] += count[p];
        count = std::move(next);
    }
    std::size_t total = 0;
    for (auto c : count) total += c;
    return total;
}

struct PatchEnumeration {
    std::vector<PatchClass> classes;
    int level = 0;  ///< level at which the class set was seen to stabilize
};

/**
 * All R-patch classes seen inside level-j supertiles, for growing j, until two
 * consecutive levels give the same nonempty set.
 */
inline PatchEnumeration enumerate_patch_classes(std::shared_ptr<const SubstitutionRule> rule, const Rational& radius,
                                                int level_cap = 24, std::size_t tile_cap = std::size_t(1) << 21) {
    require_valid(*rule);
    std::set<PatchClass> prev;
    for (int level = 1; level <= level_cap; ++level) {
        std::size_t total = 0;
        for (std::uint32_t p = 0; p < rule->prototiles.size(); ++p) total += supertile_size(*rule, p, level);
        if (total > tile_cap) break;
        std::set<PatchClass> cur;
        for (std::uint32_t p = 0; p < rule->prototiles.size(); ++p) {
            auto s = make_supertile(rule, p, level);
            for (auto u : interior_punctures(s, radius)) cur.insert(patch_class_at(s.tiles, u, radius));
        }
        if (!cur.empty() && cur == prev) return {std::vector<PatchClass>(cur.begin(), cur.end()), level};
        prev = std::move(cur);
    }
    throw Error(ErrorKind::inconclusive, "tiling-core",
                "patch classes of radius " + to_string(radius) + " did not stabilize within the level cap");
}

/// Occurrences of P (pointed tile placed at the puncture) in a tile set.
inline std::vector<char> occurrence_mask(const TileSet& set, const PatchClass& P) {
    std::vector<char> mask(set.size(), 0);
    if (P.tiles.empty()) return mask;
    const auto& rule = set.rule();
    Vec base = rule.puncture(P.tiles[P.pointed]);
    std::vector<std::pair<std::uint32_t, IVec>> rel;
    for (const auto& t : P.tiles) {
        auto iv = set.to_ivec(rule.puncture(t) - base);
        if (!iv) return mask;
        rel.push_back({t.proto, *iv});
    }
    for (std::uint32_t u = 0; u < set.size(); ++u) {
        bool ok = true;
        for (const auto& [proto, d] : rel) {
            auto hit = set.tile_at(set.ipuncture(u) + d);
            if (!hit || set.proto(*hit) != proto) {
                ok = false;
                break;
            }
        }
        mask[u] = ok;
    }
    return mask;
}

struct RepetitivityReport {
    bool bounded = false;   ///< false: some sampled centre needs R > cap
    Rational radius2;       ///< exact squared radius when bounded
    Rational radius_upper;  ///< dyadic upper bound of the radius
    int level = 0;
    std::string semantics =
        "lower bound: centres restricted to punctures of a deep supertile, balls closed, translates contained";
};

/**
 * Least R (squared, exact) such that every closed R-ball centred at a sampled
 * puncture contains a translate of P.
 */
inline RepetitivityReport repetitivity_radius(std::shared_ptr<const SubstitutionRule> rule, const PatchClass& P,
                                              const Rational& cap) {
    require_valid(*rule);
    RepetitivityReport rep;
    bool seen = false;
    Rational worst = 0;
    Rational cap2 = cap * cap;
    for (std::uint32_t p = 0; p < rule->prototiles.size(); ++p) {
        int level = required_level(*rule, p, 4 * cap + 2);
        rep.level = std::max(rep.level, level);
        auto s = make_supertile(rule, p, level);
        auto mask = occurrence_mask(s.tiles, P);
        Vec base = rule->puncture(P.tiles[P.pointed]);
        std::vector<IVec> corners;
        Rational pr2 = 0;
        for (const auto& t : P.tiles)
            for (const auto& v : rule->tile_support(t).vertices) {
                corners.push_back(s.tiles.to_ivec(v - base).value());
                pr2 = std::max(pr2, norm2(v - base));
            }
        Rational search = cap + sqrt_upper(pr2, 20) + 1;
        __int128 cap_scaled = closed_ball_limit(cap, s.tiles.den());
        for (std::uint32_t u = 0; u < s.tiles.size(); ++u) seen = seen || mask[u];
        for (auto u : interior_punctures(s, search)) {
            const IVec& xu = s.tiles.ipuncture(u);
            __int128 best = -1;
            s.tiles.visit_ball(xu, search, [&](std::uint32_t w) {
                if (!mask[w]) return;
                IVec shift = s.tiles.ipuncture(w) - xu;
                __int128 r = 0;
                for (const auto& c : corners) r = std::max(r, inorm2(c + shift));
                if (best < 0 || r < best) best = r;
            });
            if (best < 0 || best > cap_scaled) {
                rep.bounded = false;
                rep.radius2 = cap2;
                rep.radius_upper = cap;
                if (!seen) continue;
                return rep;
            }
            Rational r2 = unscale2(best, s.tiles.den());
            if (r2 > worst) worst = r2;
        }
    }
    if (!seen) throw Error(ErrorKind::not_in_hull, "tiling-core", "patch never occurs in sampled supertiles");
    rep.bounded = true;
    rep.radius2 = worst;
    rep.radius_upper = sqrt_upper(worst);
    return rep;
}

namespace patches_detail {

inline std::vector<Tile> word_tiles(const SubstitutionRule& rule, const std::string& word, std::uint32_t pointed) {
    if (rule.dim != 1) throw Error(ErrorKind::precondition, "tiling-core", "word patches need a 1D rule");
    if (pointed >= word.size()) throw Error(ErrorKind::precondition, "tiling-core", "pointed letter out of range");
    std::vector<Tile> tiles;
    Rational x = 0;
    for (char ch : word) {
        auto p = rule.index_of(std::string(1, ch));
        const auto& sup = rule.prototiles[p].support.vertices;
        Rational lo = std::min(sup[0].x, sup[1].x), hi = std::max(sup[0].x, sup[1].x);
        tiles.push_back({p, Vec{x - lo}});
        x += hi - lo;
    }
    Vec base = rule.puncture(tiles[pointed]);
    for (auto& t : tiles) t.offset -= base;
    return tiles;
}

} // namespace patches_detail

/// 1D patch class spelled by prototile labels (single characters), pointed at letter `pointed`.
inline PatchClass word_patch(const SubstitutionRule& rule, const std::string& word, std::uint32_t pointed) {
    auto tiles = patches_detail::word_tiles(rule, word, pointed);
    Tile mark = tiles[pointed];
    std::sort(tiles.begin(), tiles.end());
    auto at = static_cast<std::uint32_t>(std::find(tiles.begin(), tiles.end(), mark) - tiles.begin());
    return PatchClass{1, std::move(tiles), at};
}

/// Index, inside word_patch(rule, word, pointed), of the tile spelled by letter i.
inline std::uint32_t word_tile(const SubstitutionRule& rule, const std::string& word, std::uint32_t pointed, std::uint32_t i) {
    auto tiles = patches_detail::word_tiles(rule, word, pointed);
    Tile mark = tiles.at(i);
    std::sort(tiles.begin(), tiles.end());
    return static_cast<std::uint32_t>(std::find(tiles.begin(), tiles.end(), mark) - tiles.begin());
}

inline nlohmann::json patch_class_to_json(const SubstitutionRule& rule, const PatchClass& pc) {
    auto tiles = nlohmann::json::array();
    for (const auto& t : pc.tiles)
        tiles.push_back({{"proto", rule.prototiles[t.proto].label}, {"offset", json_detail::point_json(t.offset, pc.dim)}});
    return {{"pointed", pc.pointed}, {"tiles", tiles}};
}

} // namespace hull
