#pragma once

#include <json.hpp>

#include "hull/calgebra.hpp"
#include "hull/quasitiling.hpp"
#include "hull/towers.hpp"

namespace hull {

struct EmbeddingConfig {
    int n = 2;
    Rational epsilon = 1;
    Rational k_radius = frac(3, 2);
    int q = 4;
    std::optional<Rational> kappa;  ///< default eps^2/64
    std::optional<Rational> beta;   ///< default eps^2/64
    std::optional<Rational> delta;  ///< default beta^2/4
    std::vector<Rational> tile_radii;
    Rational cover_radius = 1;      ///< U_m = cylinders of cover_radius-patch classes
    std::size_t cover_cap = 4096;
    std::vector<std::vector<Rational>> upsilon;
    Rational upsilon_radius = frac(1, 2);
    bool raise_parameters = true;
    bool require_invariance = false;

    Rational kappa_value() const { return kappa.value_or(epsilon * epsilon / 64); }
    Rational beta_value() const { return beta.value_or(epsilon * epsilon / 64); }
    Rational delta_value() const {
        Rational b = beta_value();
        return delta.value_or(b * b / 4);
    }

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorKind::precondition, "zstable", m); };
        if (n < 1) bad("n must be at least 1");
        if (q < 1) bad("Q must be at least 1");
        if (epsilon <= 0) bad("epsilon must be positive");
        if (k_radius <= 0) bad("K radius must be positive");
        if (kappa_value() <= 0 || kappa_value() >= 1) bad("kappa must lie in (0, 1)");
        if (beta_value() <= 0 || beta_value() >= 1) bad("beta must lie in (0, 1)");
        if (tile_radii.empty()) bad("no tiles");
        if (!std::is_sorted(tile_radii.begin(), tile_radii.end())) bad("tile radii must increase");
        if (cover_radius <= 0) bad("cover radius must be positive");
    }
};

/// T_l c inside one tower, as level indices.
struct TileCopy {
    std::uint32_t tile = 0;
    std::uint32_t centre = 0;
    std::vector<std::uint32_t> members;  ///< T_l c
    std::vector<std::uint32_t> hat;      ///< T_{k,l,c}: pairwise disjoint
    std::uint32_t cover_class = 0;
    int part = -1;                       ///< -1: remainder after splitting into n parts
    std::uint32_t slot = 0;
    std::vector<std::uint32_t> shrunk;   ///< T'_{k,l,c}
    std::map<std::uint32_t, int> shells; ///< level -> q on K^Q B_Q

    std::size_t core_size() const {
        return static_cast<std::size_t>(std::count_if(shells.begin(), shells.end(), [&](const auto& s) { return s.second == max_q; }));
    }
    int max_q = 0;
};

/// C_{k,l,m} split into n equal parts; Lambda sends slot s of part j to slot s of part i.
struct CoverGroup {
    std::uint32_t tile = 0;
    std::uint32_t cover_class = 0;
    std::vector<std::vector<std::uint32_t>> parts;  ///< copy indices
    std::vector<std::uint32_t> remainder;
};

struct TowerTiling {
    std::size_t tower = 0;
    std::vector<std::uint32_t> bases;  ///< active base punctures, window order
    std::vector<IVec> offsets;         ///< level offsets (scaled)
    std::vector<TileCopy> copies;
    std::vector<CoverGroup> groups;
    std::size_t covered = 0;           ///< |union T_l C_l u|
    Rational invariance_defect;        ///< |{c : T_L c not in S}| / |S|

    std::size_t levels() const { return offsets.size(); }
    std::uint32_t representative() const { return bases.front(); }
};

struct LevelQuasitiling {
    Castle castle;
    std::vector<Rational> radii;
    std::vector<TowerTiling> towers;  ///< towers with a base of full margin in the window
    std::size_t inactive_towers = 0;
    Rational margin;  ///< validity margin of active bases
    int stage = 0;    ///< 1 shapes, 2 parts, 3 shells

    Rational beta;
    Rational beta_needed;
    bool beta_raised = false;
    Rational delta;
    bool invariance_ok = true;
    Rational worst_invariance;

    int n = 0;
    Rational cover_radius;
    std::size_t cover_classes = 0;

    int q = 0;
    Rational k_radius;
    Rational kappa;
    Rational kappa_needed;
    bool kappa_raised = false;
    bool drift_ok = true;
    std::size_t drift_checked = 0;

    std::vector<std::string> warnings;
};

namespace zstable_detail {

inline std::vector<std::uint32_t> fibre(const Window& w, const std::vector<IVec>& offsets, std::uint32_t base) {
    std::vector<std::uint32_t> out;
    out.reserve(offsets.size());
    for (const auto& o : offsets) {
        auto p = w.tile_at(w.ipuncture(base) + o);
        if (!p) throw Error(ErrorKind::internal, "zstable", "tower level missing from an active fibre");
        out.push_back(*p);
    }
    return out;
}

/// Puncture -> level index on one fibre.
inline std::unordered_map<std::uint32_t, std::uint32_t> level_index(const std::vector<std::uint32_t>& pts) {
    std::unordered_map<std::uint32_t, std::uint32_t> out;
    for (std::uint32_t j = 0; j < pts.size(); ++j) out.emplace(pts[j], j);
    return out;
}

/// Levels within `radius` of level j; nullopt if the ball leaves the fibre.
inline std::optional<std::vector<std::uint32_t>> ball_levels(const Window& w, const std::vector<std::uint32_t>& pts,
                                                             const std::unordered_map<std::uint32_t, std::uint32_t>& index,
                                                             std::uint32_t j, const Rational& radius) {
    std::vector<std::uint32_t> out;
    bool inside = true;
    w.visit_ball(w.ipuncture(pts[j]), radius, [&](std::uint32_t v) {
        auto it = index.find(v);
        if (it == index.end()) inside = false;
        else out.push_back(it->second);
    });
    if (!inside) return std::nullopt;
    std::sort(out.begin(), out.end());
    return out;
}

/// K-neighbours of every level; -1 marks a neighbour outside the fibre.
inline std::vector<std::vector<int>> neighbours(const Window& w, const std::vector<std::uint32_t>& pts,
                                                const std::unordered_map<std::uint32_t, std::uint32_t>& index,
                                                const Rational& k_radius) {
    std::vector<std::vector<int>> out(pts.size());
    for (std::uint32_t j = 0; j < pts.size(); ++j) {
        w.visit_ball(w.ipuncture(pts[j]), k_radius, [&](std::uint32_t v) {
            auto it = index.find(v);
            out[j].push_back(it == index.end() ? -1 : static_cast<int>(it->second));
        });
        std::sort(out[j].begin(), out[j].end());
    }
    return out;
}

inline std::map<IVec, std::uint32_t> offset_index(const std::vector<IVec>& offsets) {
    std::map<IVec, std::uint32_t> out;
    for (std::uint32_t j = 0; j < offsets.size(); ++j) out.emplace(offsets[j], j);
    return out;
}

/// Level of `from`'s vector v relative to copy a, transported to copy b.
inline std::uint32_t transport(const TowerTiling& t, const std::map<IVec, std::uint32_t>& index, const TileCopy& a,
                               const TileCopy& b, std::uint32_t level) {
    IVec v = t.offsets[level] - t.offsets[a.centre] + t.offsets[b.centre];
    auto it = index.find(v);
    if (it == index.end())
        throw Error(ErrorKind::internal, "zstable", "matched tiles implement different vectors in tower " + std::to_string(t.tower));
    return it->second;
}

inline Rational ratio(std::size_t a, std::size_t b) { return b == 0 ? Rational(0) : Rational(static_cast<long>(a)) / static_cast<long>(b); }

} // namespace zstable_detail

/// Refined single-cylinder castle whose bases see `radius` around every level.
inline Castle prepare_castle(const Castle& c, const Rational& radius, const Window& w) {
    if (!c.is_decomposition) throw Error(ErrorKind::precondition, "zstable", "castle is not a tower decomposition");
    Castle out = split_for_diameter(c, 1 / radius, w).normalized();
    return out;
}

struct QuasitileOptions {
    std::optional<Rational> cover_radius;  ///< prefer centres of populous cover classes
    Rational extra_margin = 0;
    bool require_invariance = true;
    std::optional<Rational> delta;
};

/**
 * Quasitiles every tower shape once, on its level pattern: largest tile
 * first, candidates T_l c inside the part of S_k left by larger tiles, kept
 * greedily when at least (1 - beta)|T_l| of the copy is fresh. Every other
 * active base of the tower is scanned for the same balls.
 */
inline LevelQuasitiling quasitile_shapes(const Castle& castle, const TileSequence& tiles, const Rational& beta, const Window& w,
                                         const QuasitileOptions& opt = {}) {
    using namespace zstable_detail;
    if (tiles.radii.empty()) throw Error(ErrorKind::precondition, "zstable", "no tiles");
    for (const auto& t : castle.towers)
        if (t.bases.size() != 1) throw Error(ErrorKind::precondition, "zstable", "castle towers must be single cylinders; normalize first");
    LevelQuasitiling lq;
    lq.castle = castle;
    lq.radii = tiles.radii;
    lq.beta = beta;
    lq.delta = opt.delta.value_or(beta * beta / 4);
    lq.stage = 1;
    const Rational& r_top = tiles.radii.back();
    Rational reach = sqrt_upper(castle.max_offset2(), 24);
    lq.margin = castle.margin() + reach + std::max(r_top, opt.cover_radius.value_or(0)) + opt.extra_margin + 2;

    auto lookup = towers_detail::base_lookup(w, castle);
    auto offsets = towers_detail::integer_offsets(w, castle);
    auto units = w.valid_units(lq.margin);
    for (std::size_t k = 0; k < castle.towers.size(); ++k) {
        TowerTiling tt;
        tt.tower = k;
        tt.offsets = offsets[k];
        for (auto u : units)
            if (lookup[u] == static_cast<int>(k)) tt.bases.push_back(u);
        if (tt.bases.empty()) {
            ++lq.inactive_towers;
            continue;
        }
        std::sort(tt.bases.begin(), tt.bases.end());
        lq.towers.push_back(std::move(tt));
    }
    if (lq.towers.empty())
        throw Error(ErrorKind::margin, "zstable", "no tower base has margin " + to_string(lq.margin) + " in the window");

    for (auto& tt : lq.towers) {
        const std::size_t levels = tt.levels();
        auto pts = fibre(w, tt.offsets, tt.representative());
        auto index = level_index(pts);

        std::size_t outside = 0;
        for (std::uint32_t c = 0; c < levels; ++c)
            if (!ball_levels(w, pts, index, c, r_top)) ++outside;
        tt.invariance_defect = ratio(outside, levels);
        if (tt.invariance_defect > lq.worst_invariance) lq.worst_invariance = tt.invariance_defect;
        if (tt.invariance_defect > lq.delta) {
            lq.invariance_ok = false;
            if (opt.require_invariance)
                throw Error(ErrorKind::precondition, "zstable",
                            "shape of tower " + std::to_string(tt.tower) + " is not (T_L, delta)-invariant: defect " +
                                to_string(tt.invariance_defect) + " > " + to_string(lq.delta));
        }

        std::vector<char> claimed(levels, 0);
        for (std::size_t l = tiles.radii.size(); l-- > 0;) {
            struct Candidate {
                std::uint32_t centre;
                std::vector<std::uint32_t> members;
                std::size_t rank;
            };
            std::vector<Candidate> cands;
            std::map<PatchClass, std::size_t> population;
            std::vector<PatchClass> cls;
            for (std::uint32_t c = 0; c < levels; ++c) {
                auto ball = ball_levels(w, pts, index, c, tiles.radii[l]);
                if (!ball) continue;
                if (std::any_of(ball->begin(), ball->end(), [&](std::uint32_t j) { return claimed[j]; })) continue;
                cands.push_back({c, std::move(*ball), 0});
                if (opt.cover_radius) {
                    cls.push_back(patch_class_at(w, pts[c], *opt.cover_radius));
                    ++population[cls.back()];
                }
            }
            if (opt.cover_radius) {
                std::map<PatchClass, std::size_t> first;
                for (std::size_t i = 0; i < cands.size(); ++i) first.emplace(cls[i], i);
                for (std::size_t i = 0; i < cands.size(); ++i) cands[i].rank = first[cls[i]];
                std::vector<std::size_t> order(cands.size());
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    auto pa = population[cls[a]], pb = population[cls[b]];
                    if (pa != pb) return pa > pb;
                    return cands[a].rank < cands[b].rank;
                });
                std::vector<Candidate> sorted;
                for (auto i : order) sorted.push_back(std::move(cands[i]));
                cands = std::move(sorted);
            }
            std::vector<char> step(levels, 0);
            for (auto& cand : cands) {
                std::vector<std::uint32_t> fresh;
                for (auto j : cand.members)
                    if (!step[j]) fresh.push_back(j);
                if (Rational(static_cast<long>(fresh.size())) < (1 - beta) * static_cast<long>(cand.members.size())) continue;
                for (auto j : cand.members) step[j] = 1;
                TileCopy copy;
                copy.tile = static_cast<std::uint32_t>(l);
                copy.centre = cand.centre;
                copy.members = std::move(cand.members);
                copy.hat = std::move(fresh);
                tt.copies.push_back(std::move(copy));
            }
            for (std::size_t j = 0; j < levels; ++j) claimed[j] = claimed[j] || step[j];
        }
        tt.covered = static_cast<std::size_t>(std::count(claimed.begin(), claimed.end(), 1));
        lq.beta_needed = std::max<Rational>(lq.beta_needed, 1 - ratio(tt.covered, levels));
        for (const auto& c : tt.copies) lq.beta_needed = std::max<Rational>(lq.beta_needed, 1 - ratio(c.hat.size(), c.members.size()));

        // the same balls at every other base
        for (std::size_t b = 1; b < tt.bases.size(); ++b) {
            auto other = fibre(w, tt.offsets, tt.bases[b]);
            auto oindex = level_index(other);
            for (const auto& c : tt.copies) {
                auto ball = ball_levels(w, other, oindex, c.centre, tiles.radii[c.tile]);
                if (!ball || *ball != c.members)
                    throw Error(ErrorKind::internal, "zstable",
                                "tile copy differs between bases of tower " + std::to_string(tt.tower) + " (level compatibility)");
            }
        }
    }
    if (lq.beta_needed > lq.beta) lq.beta_raised = true;
    return lq;
}

/**
 * Partition of each C_{k,l} by the cover class of its centre level, n equal
 * parts per class (whole levels, remainder dropped), and the shrunken tiles
 * T' common to each Lambda-orbit.
 */
inline LevelQuasitiling partition_and_biject(LevelQuasitiling lq, const Rational& cover_radius, int n, const Window& w,
                                             std::size_t cover_cap = 4096) {
    using namespace zstable_detail;
    if (lq.stage < 1) throw Error(ErrorKind::precondition, "zstable", "quasitile the shapes first");
    if (n < 1) throw Error(ErrorKind::precondition, "zstable", "n must be at least 1");
    lq.n = n;
    lq.cover_radius = cover_radius;
    std::map<PatchClass, std::uint32_t> classes;
    for (auto& tt : lq.towers) {
        std::vector<std::vector<std::uint32_t>> fibres;
        for (auto b : tt.bases) fibres.push_back(fibre(w, tt.offsets, b));
        for (auto& c : tt.copies) {
            auto pc = patch_class_at(w, fibres[0][c.centre], cover_radius);
            for (std::size_t b = 1; b < fibres.size(); ++b)
                if (patch_class_at(w, fibres[b][c.centre], cover_radius) != pc)
                    throw Error(ErrorKind::precondition, "zstable",
                                "level " + std::to_string(c.centre) + " of tower " + std::to_string(tt.tower) +
                                    " lies in no single cover set of radius " + to_string(cover_radius) +
                                    " (Lebesgue number below the level diameter; refine the castle bases)");
            auto [it, fresh] = classes.emplace(pc, static_cast<std::uint32_t>(classes.size()));
            c.cover_class = it->second;
            if (classes.size() > cover_cap)
                throw Error(ErrorKind::inconclusive, "zstable", "cover needs more than " + std::to_string(cover_cap) + " sets");
        }
    }
    lq.cover_classes = classes.size();

    bool any_part = false;
    for (auto& tt : lq.towers) {
        auto index = offset_index(tt.offsets);
        tt.groups.clear();
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> by;
        for (std::uint32_t i = 0; i < tt.copies.size(); ++i) by[{tt.copies[i].tile, tt.copies[i].cover_class}].push_back(i);
        for (auto& [key, members] : by) {
            std::sort(members.begin(), members.end(), [&](auto a, auto b) { return tt.copies[a].centre < tt.copies[b].centre; });
            CoverGroup g;
            g.tile = key.first;
            g.cover_class = key.second;
            std::size_t per = members.size() / static_cast<std::size_t>(n);
            g.parts.assign(static_cast<std::size_t>(n), {});
            for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
                for (std::size_t s = 0; s < per; ++s) {
                    auto idx = members[i * per + s];
                    g.parts[i].push_back(idx);
                    tt.copies[idx].part = static_cast<int>(i);
                    tt.copies[idx].slot = static_cast<std::uint32_t>(s);
                }
            for (std::size_t r = per * static_cast<std::size_t>(n); r < members.size(); ++r) {
                g.remainder.push_back(members[r]);
                tt.copies[members[r]].part = -1;
            }
            if (per > 0) any_part = true;
            tt.groups.push_back(std::move(g));
        }
        for (const auto& g : tt.groups) {
            std::size_t slots = g.parts.empty() ? 0 : g.parts[0].size();
            for (std::size_t s = 0; s < slots; ++s) {
                const auto& first = tt.copies[g.parts[0][s]];
                std::vector<std::uint32_t> common = first.hat;
                for (std::size_t i = 1; i < g.parts.size(); ++i) {
                    const auto& other = tt.copies[g.parts[i][s]];
                    std::vector<std::uint32_t> moved;
                    for (auto j : other.hat) moved.push_back(transport(tt, index, other, first, j));
                    std::sort(moved.begin(), moved.end());
                    std::vector<std::uint32_t> keep;
                    std::set_intersection(common.begin(), common.end(), moved.begin(), moved.end(), std::back_inserter(keep));
                    common = std::move(keep);
                }
                for (std::size_t i = 0; i < g.parts.size(); ++i) {
                    auto& c = tt.copies[g.parts[i][s]];
                    c.shrunk.clear();
                    for (auto j : common) c.shrunk.push_back(transport(tt, index, first, c, j));
                    std::sort(c.shrunk.begin(), c.shrunk.end());
                    Rational loss = 1 - ratio(c.shrunk.size(), c.members.size());
                    lq.beta_needed = std::max<Rational>(lq.beta_needed, loss / n);
                }
            }
        }
    }
    if (!any_part) lq.warnings.push_back("n exceeds every |C_{k,l,m}u|: all parts are empty and the embedding degenerates");
    if (lq.beta_needed > lq.beta) lq.beta_raised = true;
    lq.stage = 2;
    return lq;
}

/**
 * Cores B_Q = {t in T' : K^Q t inside T'} and shells by escape time, for
 * every copy in a part. kappa is raised to the measured need when `raise`,
 * else a shortfall is an error; an empty core always is.
 */
inline LevelQuasitiling core_shell(LevelQuasitiling lq, const Rational& k_radius, int q, const Rational& kappa, const Window& w,
                                   bool raise = true) {
    using namespace zstable_detail;
    if (lq.stage < 2) throw Error(ErrorKind::precondition, "zstable", "partition the centres first");
    if (q < 1) throw Error(ErrorKind::precondition, "zstable", "Q must be at least 1");
    lq.q = q;
    lq.k_radius = k_radius;
    lq.kappa = kappa;
    lq.kappa_needed = 0;
    lq.drift_ok = true;
    lq.drift_checked = 0;
    for (auto& tt : lq.towers) {
        auto pts = fibre(w, tt.offsets, tt.representative());
        auto index = level_index(pts);
        auto nb = neighbours(w, pts, index, k_radius);
        for (std::size_t b = 1; b < tt.bases.size(); ++b) {
            auto other = fibre(w, tt.offsets, tt.bases[b]);
            if (neighbours(w, other, level_index(other), k_radius) != nb)
                throw Error(ErrorKind::internal, "zstable",
                            "K-neighbourhoods differ between bases of tower " + std::to_string(tt.tower) + " (level compatibility)");
        }
        for (auto& c : tt.copies) {
            c.shells.clear();
            c.max_q = q;
            if (c.part < 0) continue;
            std::vector<char> in(tt.levels(), 0);
            for (auto j : c.shrunk) in[j] = 1;
            auto stays = [&](std::uint32_t t) {
                std::vector<int> dist(tt.levels(), -1);
                std::vector<std::uint32_t> frontier{t};
                dist[t] = 0;
                for (int d = 0; d < q; ++d) {
                    std::vector<std::uint32_t> next;
                    for (auto x : frontier)
                        for (int y : nb[x]) {
                            if (y < 0 || !in[static_cast<std::size_t>(y)]) return false;
                            if (dist[static_cast<std::size_t>(y)] < 0) {
                                dist[static_cast<std::size_t>(y)] = d + 1;
                                next.push_back(static_cast<std::uint32_t>(y));
                            }
                        }
                    frontier = std::move(next);
                }
                return true;
            };
            std::vector<std::uint32_t> core;
            for (auto t : c.shrunk)
                if (stays(t)) core.push_back(t);
            Rational r = ratio(core.size(), c.members.size());
            if (core.empty())
                throw Error(ErrorKind::precondition, "zstable",
                            "kappa violation: core of tile " + std::to_string(c.tile) + " at level " + std::to_string(c.centre) +
                                " of tower " + std::to_string(tt.tower) + " is empty (ratio 0, Q = " + std::to_string(q) + ")");
            lq.kappa_needed = std::max<Rational>(lq.kappa_needed, 1 - r);
            if (!raise && r < 1 - kappa)
                throw Error(ErrorKind::precondition, "zstable",
                            "kappa violation: core ratio " + to_string(r) + " < 1 - kappa = " + to_string(1 - kappa));
            // escape time from the core
            std::vector<std::uint32_t> frontier = core;
            for (auto t : core) c.shells[t] = q;
            for (int d = 1; d <= q; ++d) {
                std::vector<std::uint32_t> next;
                for (auto x : frontier)
                    for (int y : nb[x]) {
                        if (y < 0 || !in[static_cast<std::size_t>(y)])
                            throw Error(ErrorKind::internal, "zstable", "K^Q B_Q leaves T'");
                        if (c.shells.emplace(static_cast<std::uint32_t>(y), q - d).second) next.push_back(static_cast<std::uint32_t>(y));
                    }
                frontier = std::move(next);
            }
            // g B_q inside B_{q-1} u B_q u B_{q+1}, with B_{Q+1} empty
            for (const auto& [t, s] : c.shells) {
                if (s < 1) continue;
                for (int y : nb[t]) {
                    ++lq.drift_checked;
                    auto it = y < 0 ? c.shells.end() : c.shells.find(static_cast<std::uint32_t>(y));
                    if (it == c.shells.end() || std::abs(it->second - s) > 1 || it->second > q) lq.drift_ok = false;
                }
            }
        }
        // matched tiles carry matched shells
        auto oindex = offset_index(tt.offsets);
        for (const auto& g : tt.groups) {
            std::size_t slots = g.parts.empty() ? 0 : g.parts[0].size();
            for (std::size_t s = 0; s < slots; ++s) {
                const auto& first = tt.copies[g.parts[0][s]];
                for (std::size_t i = 1; i < g.parts.size(); ++i) {
                    const auto& other = tt.copies[g.parts[i][s]];
                    if (other.shells.size() != first.shells.size())
                        throw Error(ErrorKind::internal, "zstable", "matched tiles have different shells");
                    for (const auto& [t, v] : first.shells) {
                        auto it = other.shells.find(transport(tt, oindex, first, other, t));
                        if (it == other.shells.end() || it->second != v)
                            throw Error(ErrorKind::internal, "zstable", "matched tiles have different shells");
                    }
                }
            }
        }
    }
    if (lq.kappa_needed > lq.kappa) {
        lq.kappa_raised = true;
        lq.kappa = lq.kappa_needed;
    }
    if (lq.beta_needed > lq.beta) {
        lq.beta_raised = true;
        lq.beta = lq.beta_needed;
    }
    lq.stage = 3;
    return lq;
}

struct MatrixEmbedding {
    int n = 0;
    int q = 0;
    std::vector<std::vector<RationalOperator>> psi;
    std::vector<std::vector<RationalOperator>> phi;
    RationalOperator h;
    std::vector<char> active;  ///< punctures in fibres of active bases
    LevelQuasitiling lq;

    RationalOperator phi_of(const std::vector<std::vector<Rational>>& b) const {
        RationalOperator out(active.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (b[i][j] != 0) out = out + phi[i][j].scaled(b[i][j]);
        return out;
    }
};

/**
 * psi(e_ij) moves the shell points of each copy in part j onto the same
 * vectors of its Lambda-partner in part i; phi weights by q/Q; h = sum phi(e_ii).
 */
inline MatrixEmbedding build_embedding(const LevelQuasitiling& lq, const Window& w) {
    using namespace zstable_detail;
    if (lq.stage < 3) throw Error(ErrorKind::precondition, "zstable", "cores and shells are missing");
    const auto n = static_cast<std::size_t>(lq.n);
    MatrixEmbedding me;
    me.n = lq.n;
    me.q = lq.q;
    me.lq = lq;
    me.psi.assign(n, std::vector<RationalOperator>(n, RationalOperator(w.size())));
    me.phi = me.psi;
    me.h = RationalOperator(w.size());
    me.active.assign(w.size(), 0);

    for (const auto& tt : lq.towers) {
        auto index = offset_index(tt.offsets);
        // each copy once, parts of equal length, supports disjoint
        std::vector<int> seen(tt.copies.size(), 0);
        std::vector<char> support(tt.levels(), 0);
        for (const auto& g : tt.groups) {
            if (g.parts.size() != n) throw Error(ErrorKind::internal, "zstable", "group has the wrong number of parts");
            for (const auto& p : g.parts) {
                if (p.size() != g.parts[0].size()) throw Error(ErrorKind::internal, "zstable", "parts of unequal size");
                for (auto idx : p) {
                    if (idx >= tt.copies.size() || seen[idx]++)
                        throw Error(ErrorKind::internal, "zstable", "Lambda is not a bijection between parts");
                    const auto& c = tt.copies[idx];
                    if (c.tile != g.tile || c.cover_class != g.cover_class)
                        throw Error(ErrorKind::internal, "zstable", "Lambda leaves its cover class");
                    for (const auto& [t, s] : c.shells) {
                        if (s < 1) continue;
                        if (support[t]++)
                            throw Error(ErrorKind::internal, "zstable",
                                        "support collision at level " + std::to_string(t) + " of tower " + std::to_string(tt.tower));
                    }
                }
            }
        }
        struct Move {
            std::size_t i, j;
            std::uint32_t src, dst;
            int q;
        };
        std::vector<Move> moves;
        for (const auto& g : tt.groups) {
            std::size_t slots = g.parts[0].size();
            for (std::size_t s = 0; s < slots; ++s)
                for (std::size_t j = 0; j < n; ++j) {
                    const auto& cj = tt.copies[g.parts[j][s]];
                    for (std::size_t i = 0; i < n; ++i) {
                        const auto& ci = tt.copies[g.parts[i][s]];
                        for (const auto& [t, qv] : cj.shells)
                            if (qv >= 1) moves.push_back({i, j, t, transport(tt, index, cj, ci, t), qv});
                    }
                }
        }
        for (auto b : tt.bases) {
            auto pts = fibre(w, tt.offsets, b);
            for (auto p : pts) me.active[p] = 1;
            for (const auto& mv : moves) {
                auto& op = me.psi[mv.i][mv.j];
                if (op.at(pts[mv.dst], pts[mv.src]) != 0) throw Error(ErrorKind::internal, "zstable", "support collision in psi");
                op.add(pts[mv.dst], pts[mv.src], 1);
                me.phi[mv.i][mv.j].add(pts[mv.dst], pts[mv.src], Rational(mv.q) / lq.q);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) me.h = me.h + me.phi[i][i];
    if (!me.h.is_diagonal()) throw Error(ErrorKind::internal, "zstable", "h is not diagonal");
    return me;
}

struct LedgerEntry {
    std::string name;
    bool pass = false;
    bool exact = true;
    bool counts = true;  ///< part of the overall verdict
    std::string measured;
    std::string bound;
    std::string detail;
};

struct EmbeddingLedger {
    std::vector<LedgerEntry> entries;
    std::optional<Witness> witness;
    std::size_t sup_k = 0;

    bool pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const LedgerEntry& e) { return !e.counts || e.pass; });
    }
    const LedgerEntry& at(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw Error(ErrorKind::internal, "zstable", "no ledger entry " + name);
    }
};

namespace zstable_detail {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

/// Levels of tower tt on which `a` is 1 at every active base; throws unless a is a level-constant 0/1 function.
inline std::vector<char> sharp_levels(const TowerTiling& tt, const std::vector<Rational>& a, const Window& w) {
    std::vector<char> out(tt.levels(), 0);
    for (std::size_t b = 0; b < tt.bases.size(); ++b) {
        auto pts = fibre(w, tt.offsets, tt.bases[b]);
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const auto& v = a[pts[j]];
            if (v != 0 && v != 1) throw Error(ErrorKind::precondition, "zstable", "a must be {0,1}-valued on tower levels");
            char one = v == 1;
            if (b == 0) out[j] = one;
            else if (out[j] != one) throw Error(ErrorKind::precondition, "zstable", "a is not constant on a tower level");
        }
    }
    return out;
}

} // namespace zstable_detail

/**
 * The ledger: (1) matrix units, (2) K-commutator against sup|uK|/Q,
 * (3) Upsilon commutators against epsilon, (4) coverage, (5) the injection
 * f_k, (6) the witness v*av = 1 - phi(I); plus order zero and shell drift.
 * Setup conditions the desk-scale data cannot meet are recorded without
 * entering the verdict.
 */
inline EmbeddingLedger verify_embedding(const MatrixEmbedding& me, const EmbeddingConfig& cfg, const std::vector<Rational>& a,
                                        const Window& w) {
    using namespace zstable_detail;
    const auto& lq = me.lq;
    const std::size_t dim = w.size();
    const auto n = static_cast<std::size_t>(me.n);
    if (a.size() != dim) throw Error(ErrorKind::precondition, "zstable", "a must be indexed by window punctures");
    EmbeddingLedger led;
    auto add = [&](LedgerEntry e) { led.entries.push_back(std::move(e)); };

    // (1)
    {
        LedgerEntry e{"matrix_units", true, true, true, "", "exact", ""};
        std::size_t products = 0;
        for (std::size_t i = 0; i < n && e.pass; ++i)
            for (std::size_t j = 0; j < n && e.pass; ++j) {
                if (!(me.psi[i][j].adjoint() == me.psi[j][i])) {
                    e.pass = false;
                    e.detail = "psi(e_" + std::to_string(i + 1) + std::to_string(j + 1) + ")* != psi(e_" + std::to_string(j + 1) +
                               std::to_string(i + 1) + ")";
                }
                for (std::size_t k = 0; k < n && e.pass; ++k)
                    for (std::size_t l = 0; l < n && e.pass; ++l) {
                        ++products;
                        auto prod = me.psi[i][j] * me.psi[k][l];
                        bool ok = j == k ? prod == me.psi[i][l] : prod.nnz() == 0;
                        if (!ok) {
                            e.pass = false;
                            e.detail = "psi(e_" + std::to_string(i + 1) + std::to_string(j + 1) + ") psi(e_" + std::to_string(k + 1) +
                                       std::to_string(l + 1) + ")";
                        }
                    }
            }
        e.measured = std::to_string(products) + " products";
        add(e);
    }
    {
        LedgerEntry e{"order_zero", true, true, true, "", "exact", ""};
        for (std::size_t i = 0; i < n && e.pass; ++i)
            for (std::size_t j = 0; j < n && e.pass; ++j) {
                const auto& p = me.phi[i][j];
                if (!(me.h * me.psi[i][j] == p) || !(me.psi[i][j] * me.h == p)) {
                    e.pass = false;
                    e.detail = "phi != h psi or psi h at e_" + std::to_string(i + 1) + std::to_string(j + 1);
                } else if (!(p.adjoint() * p).is_diagonal() || !(p * p.adjoint()).is_diagonal()) {
                    e.pass = false;
                    e.detail = "phi(e_ij)* phi(e_ij) not diagonal";
                } else {
                    for (std::size_t k = 0; k < n && e.pass; ++k)
                        if (!(p * me.phi[j][k] == me.h * me.h * me.psi[i][k])) {
                            e.pass = false;
                            e.detail = "phi(b) phi(b') != h^2 psi(b b')";
                        }
                }
            }
        add(e);
    }
    {
        LedgerEntry e{"shell_drift", lq.drift_ok, true, true, std::to_string(lq.drift_checked) + " arrows", "exact", ""};
        add(e);
    }

    // (2)
    auto kop = represent(CompactSet::ball(lq.k_radius), w).op;
    for (auto u : w.valid_units(lq.k_radius)) led.sup_k = std::max(led.sup_k, fibre_ranges(w, u, CompactSet::ball(lq.k_radius)).size());
    {
        Rational bound = Rational(static_cast<long>(led.sup_k)) / lq.q;
        double worst = 0, worst_upper = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                auto comm = kop * me.phi[i][j] - me.phi[i][j] * kop;
                auto est = operator_norm(comm);
                worst = std::max(worst, est.value);
                worst_upper = std::max(worst_upper, est.upper);
            }
        LedgerEntry e{"commutator_k", worst <= bound.get_d() + 1e-8, false, true, num(worst), to_string(bound),
                      "sup|uK| = " + std::to_string(led.sup_k) + ", row-sum upper bound " + num(worst_upper)};
        add(e);
    }

    // (3)
    {
        LedgerEntry e{"commutator_upsilon", true, false, true, "0", to_string(cfg.epsilon), ""};
        std::vector<std::vector<std::vector<Rational>>> tests;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                std::vector<std::vector<Rational>> b(n, std::vector<Rational>(n, 0));
                b[i][j] = 1;
                tests.push_back(b);
            }
        tests.push_back(std::vector<std::vector<Rational>>(n, std::vector<Rational>(n, Rational(1) / static_cast<long>(n))));
        double worst = 0;
        for (std::size_t fi = 0; fi < cfg.upsilon.size(); ++fi) {
            const auto& f = cfg.upsilon[fi];
            if (f.size() != dim) throw Error(ErrorKind::precondition, "zstable", "Upsilon functions must be indexed by window punctures");
            std::map<PatchClass, Rational> seen;
            for (auto u : w.valid_units(cfg.upsilon_radius)) {
                auto [it, fresh] = seen.emplace(patch_class_at(w, u, cfg.upsilon_radius), f[u]);
                if (!fresh && it->second != f[u])
                    throw Error(ErrorKind::precondition, "zstable",
                                "Upsilon function " + std::to_string(fi) + " is not pattern-equivariant at radius " +
                                    to_string(cfg.upsilon_radius));
            }
            auto fop = diagonal_operator(f);
            for (const auto& b : tests) {
                auto pb = me.phi_of(b);
                worst = std::max(worst, operator_norm(fop * pb - pb * fop).value);
            }
        }
        e.measured = num(worst);
        e.pass = worst < cfg.epsilon.get_d();
        e.detail = std::to_string(cfg.upsilon.size()) + " functions, " + std::to_string(tests.size()) + " elements b";
        add(e);
    }

    // (4) per active unit: |S''u| counted as fibre points with h = 1
    std::vector<std::vector<char>> uncovered(lq.towers.size());
    {
        LedgerEntry e{"coverage", true, true, true, "", "", ""};
        Rational factor = (1 - lq.kappa) * (1 - 2 * lq.beta);
        Rational worst = 2;
        std::size_t units = 0;
        for (std::size_t k = 0; k < lq.towers.size(); ++k) {
            const auto& tt = lq.towers[k];
            uncovered[k].assign(tt.levels(), 1);
            for (const auto& c : tt.copies)
                for (const auto& [t, s] : c.shells)
                    if (s == lq.q && c.part >= 0) uncovered[k][t] = 0;
            for (auto b : tt.bases) {
                ++units;
                auto pts = fibre(w, tt.offsets, b);
                std::size_t core = 0;
                for (auto p : pts)
                    if (me.h.at(p, p) == 1) ++core;
                Rational r = ratio(core, pts.size());
                worst = std::min(worst, r);
                if (r < factor) {
                    e.pass = false;
                    if (e.detail.empty()) e.detail = "tower " + std::to_string(k) + " base " + std::to_string(b);
                }
            }
        }
        e.measured = "min |S''u|/|Su| = " + to_string(worst) + " over " + std::to_string(units) + " units";
        e.bound = "(1-kappa)(1-2beta) = " + to_string(factor);
        add(e);
    }

    // (5)
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> inj(lq.towers.size());
    bool injection_ok = true;
    {
        LedgerEntry e{"injection", true, true, true, "", "", ""};
        Rational worst = 0;
        for (std::size_t k = 0; k < lq.towers.size(); ++k) {
            const auto& tt = lq.towers[k];
            auto sharp = sharp_levels(tt, a, w);
            std::vector<std::uint32_t> from, to;
            for (std::uint32_t j = 0; j < tt.levels(); ++j) {
                if (uncovered[k][j]) from.push_back(j);
                if (sharp[j]) to.push_back(j);
            }
            Rational r = to.empty() ? Rational(from.empty() ? 0 : 2) : ratio(from.size(), to.size());
            worst = std::max(worst, r);
            if (2 * from.size() > to.size()) {
                e.pass = false;
                if (e.detail.empty())
                    e.detail = "tower " + std::to_string(k) + ": " + std::to_string(from.size()) + " uncovered levels, " +
                               std::to_string(to.size()) + " levels with a = 1";
            }
            if (from.size() > to.size()) {
                injection_ok = false;
                continue;
            }
            for (std::size_t i = 0; i < from.size(); ++i) inj[k].push_back({from[i], to[i]});
        }
        e.measured = "max |(S\\S'')u| / |S#u| = " + to_string(worst);
        e.bound = "1/2";
        add(e);
    }

    // (6)
    {
        LedgerEntry e{"witness", false, true, true, "", "v*av = 1 - phi(I)", ""};
        if (!injection_ok) {
            e.detail = "no injection into the levels where a = 1";
        } else {
            std::vector<Rational> f(dim, 0);
            for (std::uint32_t x = 0; x < dim; ++x)
                if (me.active[x]) f[x] = 1 - me.h.at(x, x);
            std::vector<Route> routes;
            const auto& rule = w.rule();
            for (std::size_t k = 0; k < lq.towers.size(); ++k) {
                const auto& tt = lq.towers[k];
                const auto& tower = lq.castle.towers[tt.tower];
                const auto& base = tower.bases[0];
                for (const auto& [src, dst] : inj[k]) {
                    std::vector<Rational> weight(dim, 0);
                    for (auto b : tt.bases) weight[fibre(w, tt.offsets, b)[src]] = 1;
                    BisectionSet arrow{base, tile_at_offset(rule, base, tower.levels[src].offset - tower.levels[0].offset),
                                       tile_at_offset(rule, base, tower.levels[dst].offset - tower.levels[0].offset)};
                    routes.push_back({std::move(weight), {CompactSet::bisections({arrow})}});
                }
            }
            auto wit = subequivalence_witness(routes, f, a, w);
            e.pass = wit.exact;
            e.measured = std::to_string(wit.v.nnz()) + " entries in v, " + std::to_string(routes.size()) + " routes";
            led.witness = std::move(wit);
        }
        add(e);
    }

    // setup conditions
    {
        Rational need = Rational(static_cast<long>(n * n * led.sup_k)) / cfg.epsilon;
        add({"q_condition", Rational(lq.q) > need, true, false, "Q = " + std::to_string(lq.q), "> n^2 sup|uK|/eps = " + to_string(need), ""});
        add({"shape_invariance", lq.invariance_ok, true, false, to_string(lq.worst_invariance), "delta = " + to_string(lq.delta), ""});
        std::size_t tile_max = 0;
        std::size_t smallest = std::numeric_limits<std::size_t>::max();
        for (const auto& tt : lq.towers) smallest = std::min(smallest, tt.levels());
        for (const auto& r : lq.radii) {
            std::size_t m = 0;
            for (auto u : w.valid_units(r)) m = std::max(m, fibre_ranges(w, u, CompactSet::ball(r)).size());
            tile_max += m;
        }
        Rational lhs = lq.beta * static_cast<long>(smallest);
        Rational rhs = Rational(static_cast<long>(lq.cover_classes * n * tile_max));
        add({"mn_max", lhs >= rhs, true, false, "beta |S| = " + to_string(lhs), "M n sum max|T_l| = " + to_string(rhs), ""});
        add({"kappa", !lq.kappa_raised, true, false, to_string(lq.kappa), "configured " + to_string(cfg.kappa_value()),
             lq.kappa_raised ? "raised to the measured core deficit" : ""});
        add({"beta", !lq.beta_raised, true, false, to_string(lq.beta), "configured " + to_string(cfg.beta_value()),
             lq.beta_raised ? "raised to the measured cover and disjointness deficit" : ""});
    }
    return led;
}

struct ZstableRun {
    LevelQuasitiling lq;
    MatrixEmbedding embedding;
    EmbeddingLedger ledger;
};

/// Whole construction on a castle: refine, quasitile, partition, cores, operators, ledger.
inline ZstableRun run_zstable(const Castle& castle, const EmbeddingConfig& cfg, const std::vector<Rational>& a, const Window& w) {
    cfg.validate();
    Rational see = std::max<Rational>(cfg.cover_radius, cfg.tile_radii.back() + cfg.k_radius);
    Castle refined = prepare_castle(castle, see, w);
    auto tiles = TileSequence::from_radii(cfg.tile_radii, cfg.epsilon, 2);
    QuasitileOptions opt;
    opt.cover_radius = cfg.cover_radius;
    opt.extra_margin = cfg.k_radius;
    opt.require_invariance = cfg.require_invariance;
    opt.delta = cfg.delta_value();
    ZstableRun run;
    run.lq = quasitile_shapes(refined, tiles, cfg.beta_value(), w, opt);
    run.lq = partition_and_biject(std::move(run.lq), cfg.cover_radius, cfg.n, w, cfg.cover_cap);
    run.lq = core_shell(std::move(run.lq), cfg.k_radius, cfg.q, cfg.kappa_value(), w, cfg.raise_parameters);
    run.embedding = build_embedding(run.lq, w);
    run.ledger = verify_embedding(run.embedding, cfg, a, w);
    return run;
}

inline nlohmann::json ledger_to_json(const EmbeddingLedger& led) {
    nlohmann::json j;
    j["pass"] = led.pass();
    j["sup_uK"] = led.sup_k;
    for (const auto& e : led.entries)
        j["entries"].push_back({{"name", e.name},
                                {"pass", e.pass},
                                {"exact", e.exact},
                                {"counts", e.counts},
                                {"measured", e.measured},
                                {"bound", e.bound},
                                {"detail", e.detail}});
    return j;
}

inline nlohmann::json level_quasitiling_to_json(const LevelQuasitiling& lq) {
    nlohmann::json j;
    j["n"] = lq.n;
    j["Q"] = lq.q;
    j["K_radius"] = to_string(lq.k_radius);
    j["kappa"] = to_string(lq.kappa);
    j["beta"] = to_string(lq.beta);
    j["cover_radius"] = to_string(lq.cover_radius);
    j["cover_classes"] = lq.cover_classes;
    j["inactive_towers"] = lq.inactive_towers;
    j["warnings"] = lq.warnings;
    for (const auto& tt : lq.towers) {
        nlohmann::json t;
        t["tower"] = tt.tower;
        t["levels"] = tt.levels();
        t["bases"] = tt.bases.size();
        t["covered"] = tt.covered;
        t["invariance_defect"] = to_string(tt.invariance_defect);
        for (const auto& c : tt.copies) {
            nlohmann::json cj{{"tile", c.tile}, {"centre", c.centre}, {"class", c.cover_class}, {"part", c.part},
                              {"slot", c.slot}, {"size", c.members.size()}, {"hat", c.hat.size()}, {"shrunk", c.shrunk.size()}};
            for (const auto& [lvl, s] : c.shells) cj["shells"].push_back({lvl, s});
            t["copies"].push_back(std::move(cj));
        }
        j["towers"].push_back(std::move(t));
    }
    return j;
}

/// Sparse triplets of psi, phi and h.
inline nlohmann::json embedding_to_json(const MatrixEmbedding& me) {
    auto dump = [](const RationalOperator& op) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [r, c, v] : op.triplets()) out.push_back({r, c, to_string(v)});
        return out;
    };
    nlohmann::json j;
    j["n"] = me.n;
    j["Q"] = me.q;
    for (int i = 0; i < me.n; ++i)
        for (int k = 0; k < me.n; ++k) {
            std::string key = "e" + std::to_string(i + 1) + std::to_string(k + 1);
            j["psi"][key] = dump(me.psi[i][k]);
            j["phi"][key] = dump(me.phi[i][k]);
        }
    j["h"] = dump(me.h);
    return j;
}

} // namespace hull
