#pragma once

#include "hull/groupoid.hpp"
#include "hull/patches.hpp"

namespace hull {

/// Cylinder set U(P, t).
struct Cylinder {
    PatchClass patch;
    std::uint32_t tile = 0;

    friend bool operator==(const Cylinder&, const Cylinder&) = default;
    friend bool operator<(const Cylinder& a, const Cylinder& b) {
        if (a.tile != b.tile) return a.tile < b.tile;
        return a.patch < b.patch;
    }
};

inline bool in_cylinder(const Window& w, std::uint32_t u, const Cylinder& c) {
    return groupoid_detail::placed(w, u, c.patch, c.tile);
}

struct TowerLevel {
    Vec offset;  ///< puncture of the level tile minus the base puncture
    std::uint32_t proto = 0;
    std::vector<std::uint8_t> position;  ///< child path inside the supertile, top first

    friend bool operator==(const TowerLevel&, const TowerLevel&) = default;
};

/**
 * Tower with base the union of U(P, pointed) over `bases` and shape the
 * bisections V(P, pointed, t_j), one per level. Level 0 is the base.
 */
struct Tower {
    std::uint32_t supertile = 0;
    std::vector<PatchClass> bases;
    std::vector<TowerLevel> levels;

    Rational max_offset2() const {
        Rational m = 0;
        for (const auto& l : levels) m = std::max(m, norm2(l.offset));
        return m;
    }
};

/// Index of the tile of P sitting at `offset` from the pointed puncture.
inline std::uint32_t tile_at_offset(const SubstitutionRule& rule, const PatchClass& p, const Vec& offset) {
    Vec base = rule.puncture(p.tiles[p.pointed]);
    for (std::uint32_t i = 0; i < p.tiles.size(); ++i)
        if (rule.puncture(p.tiles[i]) - base == offset) return i;
    throw Error(ErrorKind::internal, "towers", "base patch does not contain a level tile");
}

inline CompactSet level_shape(const SubstitutionRule& rule, const Tower& t, std::size_t from, std::size_t to) {
    std::vector<BisectionSet> parts;
    for (const auto& p : t.bases)
        parts.push_back({p, tile_at_offset(rule, p, t.levels[from].offset - t.levels[0].offset),
                         tile_at_offset(rule, p, t.levels[to].offset - t.levels[0].offset)});
    return CompactSet::bisections(std::move(parts));
}

struct Castle {
    std::vector<Tower> towers;
    bool is_decomposition = false;
    Rational base_radius;
    Rational recognizability_radius;
    int level = 0;

    std::size_t level_count() const {
        std::size_t n = 0;
        for (const auto& t : towers) n += t.levels.size();
        return n;
    }
    Rational max_offset2() const {
        Rational m = 0;
        for (const auto& t : towers) m = std::max(m, t.max_offset2());
        return m;
    }
    /// Window margin needed to locate every level of a puncture.
    Rational margin() const { return base_radius + sqrt_upper(max_offset2(), 24); }

    /// Single-cylinder towers: one per base patch.
    Castle normalized() const {
        Castle out = *this;
        out.towers.clear();
        for (const auto& t : towers)
            for (const auto& b : t.bases) out.towers.push_back(Tower{t.supertile, {b}, t.levels});
        return out;
    }
};

namespace towers_detail {

/// For each window puncture, the tower whose base cylinder contains it, or -1.
inline std::vector<int> base_lookup(const Window& w, const Castle& c) {
    std::map<PatchClass, int> index;
    for (std::size_t i = 0; i < c.towers.size(); ++i)
        for (const auto& b : c.towers[i].bases) index.emplace(b, static_cast<int>(i));
    auto units = w.valid_units(c.base_radius);
    std::vector<int> out(w.size(), -1);
    parallel_for(units.size(), [&](std::size_t k) {
        auto it = index.find(patch_class_at(w, units[k], c.base_radius));
        if (it != index.end()) out[units[k]] = it->second;
    });
    return out;
}

inline std::vector<std::vector<IVec>> integer_offsets(const Window& w, const Castle& c) {
    std::vector<std::vector<IVec>> out;
    for (const auto& t : c.towers) {
        std::vector<IVec> v;
        for (const auto& l : t.levels) v.push_back(w.to_ivec(l.offset).value());
        out.push_back(std::move(v));
    }
    return out;
}

struct Membership {
    int tower = -1;
    int level = -1;
    std::uint32_t base = 0;
    int hits = 0;
};

inline std::vector<Membership> memberships(const Window& w, const Castle& c, const std::vector<std::uint32_t>& units) {
    auto base = base_lookup(w, c);
    auto off = integer_offsets(w, c);
    return parallel_map<Membership>(units.size(), [&](std::size_t k) {
        Membership m;
        std::uint32_t x = units[k];
        for (std::size_t i = 0; i < off.size(); ++i)
            for (std::size_t j = 0; j < off[i].size(); ++j) {
                auto b = w.tile_at(w.ipuncture(x) - off[i][j]);
                if (!b || base[*b] != static_cast<int>(i)) continue;
                if (++m.hits == 1) {
                    m.tower = static_cast<int>(i);
                    m.level = static_cast<int>(j);
                    m.base = *b;
                }
            }
        return m;
    });
}

} // namespace towers_detail

struct CastleCertificate {
    bool partition = false;
    std::size_t checked = 0;
    std::size_t uncovered = 0;
    std::size_t overlapped = 0;
    std::optional<std::uint32_t> witness;  ///< first failing puncture
    Rational margin;
};

/// Every puncture of the window with enough margin lies in exactly one level.
inline CastleCertificate certify_castle(const Castle& c, const Window& w) {
    CastleCertificate cert;
    cert.margin = c.margin();
    auto units = w.valid_units(cert.margin);
    if (units.empty()) throw Error(ErrorKind::margin, "towers", "no puncture has margin " + to_string(cert.margin));
    auto m = towers_detail::memberships(w, c, units);
    cert.checked = units.size();
    for (std::size_t k = 0; k < units.size(); ++k) {
        if (m[k].hits == 1) continue;
        (m[k].hits == 0 ? cert.uncovered : cert.overlapped)++;
        if (!cert.witness) cert.witness = units[k];
    }
    cert.partition = cert.uncovered == 0 && cert.overlapped == 0;
    return cert;
}

/// Level-k supertile type and position of a window tile, read off the window's hierarchy.
inline std::pair<std::uint32_t, std::vector<std::uint8_t>> supertile_position(const Window& w, std::uint32_t u, int k) {
    const auto& h = w.hierarchy();
    if (k > h.levels) throw Error(ErrorKind::precondition, "towers", "window hierarchy is shallower than level " + std::to_string(k));
    const auto* path = h.path(u);
    std::uint32_t proto = h.seed;
    for (int d = 0; d < h.levels - k; ++d) proto = w.rule().children[proto][path[d]].proto;
    return {proto, std::vector<std::uint8_t>(path + (h.levels - k), path + h.levels)};
}

/**
 * Least R on the grid step, 2 step, ... up to cap such that the R-patch class
 * of every window puncture determines its level-k supertile type and position.
 */
inline Rational recognizability_radius(const Window& w, int k, const Rational& cap, const Rational& step = frac(1, 2)) {
    for (Rational r = step; r <= cap; r += step) {
        auto units = w.valid_units(r);
        if (units.empty()) throw Error(ErrorKind::margin, "towers", "window too small for radius " + to_string(r));
        auto classes = parallel_map<PatchClass>(units.size(), [&](std::size_t i) { return patch_class_at(w, units[i], r); });
        std::map<PatchClass, std::pair<std::uint32_t, std::vector<std::uint8_t>>> seen;
        bool ok = true;
        for (std::size_t i = 0; i < units.size() && ok; ++i) {
            auto pos = supertile_position(w, units[i], k);
            auto [it, fresh] = seen.emplace(classes[i], pos);
            if (!fresh && it->second != pos) ok = false;
        }
        if (ok) return r;
    }
    throw Error(ErrorKind::inconclusive, "towers",
                "no radius up to " + to_string(cap) + " determines the level-" + std::to_string(k) + " supertile position");
}

/**
 * One tower per level-k supertile type: base = punctures at the first-child
 * position of such a supertile, levels = the supertile's tiles.
 */
inline Castle supertile_castle(const Window& w, int k, const Rational& cap) {
    const auto& rule = w.rule();
    if (k < 1) throw Error(ErrorKind::precondition, "towers", "level must be at least 1");
    Castle c;
    c.level = k;
    c.recognizability_radius = recognizability_radius(w, k, cap);
    for (std::uint32_t p = 0; p < rule.prototiles.size(); ++p) {
        auto st = inflate_with_paths(rule, p, k);
        Tower t;
        t.supertile = p;
        std::size_t base = 0;
        for (std::size_t i = 0; i < st.paths.size(); ++i)
            if (std::all_of(st.paths[i].begin(), st.paths[i].end(), [](std::uint8_t x) { return x == 0; })) base = i;
        Vec origin = rule.puncture(st.tiles[base]);
        t.levels.push_back({Vec{}, st.tiles[base].proto, st.paths[base]});
        for (std::size_t i = 0; i < st.tiles.size(); ++i)
            if (i != base) t.levels.push_back({rule.puncture(st.tiles[i]) - origin, st.tiles[i].proto, st.paths[i]});
        c.towers.push_back(std::move(t));
    }
    Rational reach = Rational(floor(sqrt_upper(c.max_offset2(), 24))) + 1;
    c.base_radius = std::max(c.recognizability_radius, reach);
    auto units = w.valid_units(c.base_radius);
    std::vector<std::set<PatchClass>> bases(c.towers.size());
    for (auto u : units) {
        auto [type, pos] = supertile_position(w, u, k);
        if (pos != c.towers[type].levels[0].position) continue;
        bases[type].insert(patch_class_at(w, u, c.base_radius));
    }
    for (std::size_t i = 0; i < c.towers.size(); ++i) {
        if (bases[i].empty())
            throw Error(ErrorKind::margin, "towers",
                        "window shows no base of supertile '" + rule.prototiles[i].label + "'");
        c.towers[i].bases.assign(bases[i].begin(), bases[i].end());
    }
    c.is_decomposition = certify_castle(c, w).partition;
    return c;
}

/// Identity castle: one single-level tower per prototile.
inline Castle identity_castle(const SubstitutionRule& rule) {
    Castle c;
    c.base_radius = frac(1, 2);
    for (std::uint32_t p = 0; p < rule.prototiles.size(); ++p) {
        PatchClass pc{rule.dim, {Tile{p, -rule.prototiles[p].puncture}}, 0};
        c.towers.push_back(Tower{p, {pc}, {{Vec{}, p, {}}}});
    }
    c.is_decomposition = true;
    return c;
}

// ---------------------------------------------------------------------------
// diameter splitting

inline Rational containment_radius(const Castle& c, const Rational& eps) {
    Rational inv = 1 / eps;
    return Rational(ceil(sqrt_upper(c.max_offset2(), 24) + inv));
}

/// B_{1/eps}(x(t_j)) inside every base patch, for every level: exact.
inline bool meets_containment(const Castle& c, const Rational& eps) {
    Rational slack = c.base_radius - 1 / eps;
    if (slack < 0) return false;
    return c.max_offset2() <= slack * slack;
}

/// Refines bases to patches of radius max|x(t_j)| + 1/eps seen in the window.
inline Castle split_for_diameter(const Castle& c, const Rational& eps, const Window& w) {
    if (eps <= 0) throw Error(ErrorKind::precondition, "towers", "eps must be positive");
    if (meets_containment(c, eps)) return c;
    Castle out = c;
    out.base_radius = containment_radius(c, eps);
    auto base = towers_detail::base_lookup(w, c);
    auto units = w.valid_units(out.base_radius);
    std::vector<std::set<PatchClass>> bases(c.towers.size());
    for (auto u : units)
        if (base[u] >= 0) bases[static_cast<std::size_t>(base[u])].insert(patch_class_at(w, u, out.base_radius));
    for (std::size_t i = 0; i < c.towers.size(); ++i) {
        if (bases[i].empty()) throw Error(ErrorKind::margin, "towers", "window shows no base of tower " + std::to_string(i));
        out.towers[i].bases.assign(bases[i].begin(), bases[i].end());
    }
    return out;
}

struct RefinementReport {
    bool same_levels = true;   ///< every puncture in the same (tower, level)
    bool same_fibres = true;   ///< shape fibres at bases coincide
    bool containment = false;
    std::size_t checked = 0;
    std::optional<std::uint32_t> witness;
};

inline RefinementReport compare_refinement(const Castle& before, const Castle& after, const Rational& eps, const Window& w) {
    RefinementReport r;
    r.containment = meets_containment(after, eps);
    Rational margin = std::max(before.margin(), after.margin());
    auto units = w.valid_units(margin);
    if (units.empty()) throw Error(ErrorKind::margin, "towers", "no puncture has margin " + to_string(margin));
    auto m0 = towers_detail::memberships(w, before, units);
    auto m1 = towers_detail::memberships(w, after, units);
    r.checked = units.size();
    const auto& rule = w.rule();
    for (std::size_t k = 0; k < units.size(); ++k) {
        bool same = m0[k].hits == m1[k].hits && m0[k].tower == m1[k].tower && m0[k].level == m1[k].level;
        if (!same) {
            r.same_levels = false;
            if (!r.witness) r.witness = units[k];
            continue;
        }
        if (m0[k].hits != 1 || m0[k].level != 0) continue;
        const auto& t0 = before.towers[static_cast<std::size_t>(m0[k].tower)];
        const auto& t1 = after.towers[static_cast<std::size_t>(m1[k].tower)];
        for (std::size_t j = 0; j < t0.levels.size(); ++j) {
            auto f0 = fibre_ranges(w, units[k], level_shape(rule, t0, 0, j));
            auto f1 = fibre_ranges(w, units[k], level_shape(rule, t1, 0, j));
            if (f0 != f1 || f0.size() != 1) {
                r.same_fibres = false;
                if (!r.witness) r.witness = units[k];
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// elementary subgroupoids

struct ElementaryBlock {
    std::uint32_t label = 0;
    std::vector<std::vector<Cylinder>> levels;   ///< F_j as unions of cylinders
    std::vector<std::vector<CompactSet>> arrows; ///< arrows[j][k] = V_{j,k}: from F_k to F_j
};

struct ElementarySubgroupoid {
    std::vector<ElementaryBlock> blocks;
    Rational patch_radius;  ///< every cylinder patch is the class of a patch_radius-ball

    std::vector<Cylinder> fundamental_domain() const {
        std::vector<Cylinder> out;
        for (const auto& b : blocks) out.insert(out.end(), b.levels[0].begin(), b.levels[0].end());
        return out;
    }
    /// K as one compact set.
    CompactSet as_compact_set() const {
        std::vector<BisectionSet> parts;
        for (const auto& b : blocks)
            for (const auto& row : b.arrows)
                for (const auto& v : row) parts.insert(parts.end(), v.parts().begin(), v.parts().end());
        return CompactSet::bisections(std::move(parts));
    }
    Rational margin() const {
        Rational m = 0;
        for (const auto& b : blocks) {
            for (const auto& row : b.arrows)
                for (const auto& v : row) m = std::max(m, v.margin());
            for (const auto& lvl : b.levels)
                for (const auto& cyl : lvl) m = std::max(m, CompactSet::bisections({{cyl.patch, cyl.tile, cyl.tile}}).margin());
        }
        return m;
    }
};

inline ElementarySubgroupoid castle_to_elementary(const Castle& c, const SubstitutionRule& rule) {
    if (!c.is_decomposition) throw Error(ErrorKind::precondition, "towers", "castle is not a tower decomposition");
    ElementarySubgroupoid k;
    k.patch_radius = c.base_radius;
    for (const auto& t : c.towers) {
        ElementaryBlock b;
        b.label = t.supertile;
        const std::size_t n = t.levels.size();
        b.levels.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            for (const auto& p : t.bases) b.levels[j].push_back({p, tile_at_offset(rule, p, t.levels[j].offset)});
        b.arrows.assign(n, std::vector<CompactSet>(n, CompactSet::bisections({})));
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) b.arrows[j][i] = level_shape(rule, t, i, j);
        k.blocks.push_back(std::move(b));
    }
    return k;
}

struct ElementaryCertificate {
    bool partition = true;       ///< the F_j partition the checked units
    bool unique_arrows = true;   ///< each V_{j,k} is a bijection F_k -> F_j on the window
    bool fibre_sizes = true;     ///< |Kx| equals the block size
    std::size_t checked = 0;
    std::optional<std::uint32_t> witness;
    std::string failure;

    bool ok() const { return partition && unique_arrows && fibre_sizes; }
};

inline ElementaryCertificate certify_elementary(const ElementarySubgroupoid& k, const Window& w) {
    ElementaryCertificate cert;
    Rational margin = k.margin();
    auto units = w.valid_units(margin);
    if (units.empty()) throw Error(ErrorKind::margin, "towers", "no puncture has margin " + to_string(margin));
    cert.checked = units.size();
    auto kset = k.as_compact_set();
    std::vector<std::string> fail(units.size());
    parallel_for(units.size(), [&](std::size_t idx) {
        std::uint32_t x = units[idx];
        int hits = 0;
        std::size_t bi = 0, lj = 0;
        for (std::size_t b = 0; b < k.blocks.size(); ++b)
            for (std::size_t j = 0; j < k.blocks[b].levels.size(); ++j)
                for (const auto& cyl : k.blocks[b].levels[j])
                    if (in_cylinder(w, x, cyl)) {
                        if (++hits == 1) bi = b, lj = j;
                        break;
                    }
        if (hits != 1) {
            fail[idx] = "partition: puncture in " + std::to_string(hits) + " blocks";
            return;
        }
        const auto& blk = k.blocks[bi];
        for (std::size_t b = 0; b < k.blocks.size(); ++b)
            for (std::size_t j = 0; j < k.blocks[b].arrows.size(); ++j)
                for (std::size_t i = 0; i < k.blocks[b].arrows[j].size(); ++i) {
                    auto f = fibre_ranges(w, x, k.blocks[b].arrows[j][i]);
                    bool source = b == bi && i == lj;
                    if (!source) {
                        if (!f.empty()) fail[idx] = "unique: arrow of V_{" + std::to_string(j) + "," + std::to_string(i) + "} leaves outside its source";
                        continue;
                    }
                    bool lands = f.size() == 1 &&
                                 std::any_of(blk.levels[j].begin(), blk.levels[j].end(),
                                             [&](const Cylinder& c) { return in_cylinder(w, f[0], c); });
                    if (!lands) fail[idx] = "unique: V_{" + std::to_string(j) + "," + std::to_string(i) + "} does not land in F_" + std::to_string(j);
                }
        if (fail[idx].empty() && fibre_ranges(w, x, kset).size() != blk.levels.size())
            fail[idx] = "fibre: |Kx| differs from the block size";
    });
    for (std::size_t idx = 0; idx < units.size(); ++idx) {
        if (fail[idx].empty()) continue;
        if (fail[idx].rfind("partition", 0) == 0) cert.partition = false;
        else if (fail[idx].rfind("unique", 0) == 0) cert.unique_arrows = false;
        else cert.fibre_sizes = false;
        if (!cert.witness) {
            cert.witness = units[idx];
            cert.failure = fail[idx];
        }
    }
    return cert;
}

/// W_i = F_1^{(i)}, S_{i,j} = V_{j,1}^{(i)}; K is certified on the window first.
inline Castle elementary_to_castle(const ElementarySubgroupoid& k, const Window& w) {
    auto cert = certify_elementary(k, w);
    if (!cert.ok())
        throw Error(ErrorKind::precondition, "towers",
                    "elementary subgroupoid fails certification at puncture " + std::to_string(*cert.witness) + ": " + cert.failure);
    const auto& rule = w.rule();
    Castle c;
    c.is_decomposition = true;
    c.base_radius = k.patch_radius;
    for (const auto& b : k.blocks) {
        Tower t;
        t.supertile = b.label;
        for (const auto& cyl : b.levels[0]) {
            PatchClass p = cyl.patch;
            p.pointed = cyl.tile;
            t.bases.push_back(std::move(p));
        }
        const auto& first = b.arrows.at(0).at(0).parts().at(0);
        Vec origin = rule.puncture(first.patch.tiles[first.src_tile]);
        for (std::size_t j = 0; j < b.arrows.size(); ++j) {
            const auto& v = b.arrows[j][0].parts().at(0);
            t.levels.push_back({rule.puncture(v.patch.tiles[v.rng_tile]) - origin, v.patch.tiles[v.rng_tile].proto, {}});
        }
        c.towers.push_back(std::move(t));
    }
    return c;
}

/// Canonical form for comparing castles up to relabelling of towers and levels.
inline std::vector<std::pair<std::vector<PatchClass>, std::vector<std::pair<Vec, std::uint32_t>>>> canonical_form(const Castle& c) {
    std::vector<std::pair<std::vector<PatchClass>, std::vector<std::pair<Vec, std::uint32_t>>>> out;
    for (const auto& t : c.towers) {
        auto bases = t.bases;
        std::sort(bases.begin(), bases.end());
        std::vector<std::pair<Vec, std::uint32_t>> lv;
        for (const auto& l : t.levels) lv.push_back({l.offset, l.proto});
        std::sort(lv.begin(), lv.end(), [](const auto& a, const auto& b) {
            if (a.first.x != b.first.x) return a.first.x < b.first.x;
            if (a.first.y != b.first.y) return a.first.y < b.first.y;
            return a.second < b.second;
        });
        out.push_back({std::move(bases), std::move(lv)});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

inline bool same_castle(const Castle& a, const Castle& b) { return canonical_form(a) == canonical_form(b); }

// ---------------------------------------------------------------------------
// invariance transfer

struct TransferReport {
    bool all_equal = true;
    std::size_t pairs = 0;
    std::optional<std::uint32_t> witness;
    Rational left, right;  ///< ratios at the witness
};

/**
 * |C S_i u \ S_i u| / |S_i u| from the castle shape at the base u against
 * |C Kx \ Kx| / |Kx| from the fibres of K at every x of the tower over u.
 */
inline TransferReport invariance_transfer_check(const Castle& c, const ElementarySubgroupoid& k, const CompactSet& cset,
                                                const Window& w) {
    Rational reach = sqrt_upper(c.max_offset2(), 24);
    Rational margin = std::max(c.margin(), k.margin()) + reach + cset.margin() + 1;
    auto units = w.valid_units(margin);
    if (units.empty()) throw Error(ErrorKind::margin, "towers", "no puncture has margin " + to_string(margin));
    auto m = towers_detail::memberships(w, c, units);
    auto off = towers_detail::integer_offsets(w, c);
    auto kset = k.as_compact_set();
    auto ratio = [&](const std::vector<std::uint32_t>& set, bool by_ball) {
        UnitArrows a{0, set};
        std::size_t outside = 0;
        if (by_ball && cset.is_ball()) {
            // translation picture: punctures within distance R of some member
            __int128 lim = strict_ball_limit(cset.ball_radius(), w.den());
            std::set<std::uint32_t> hit;
            for (auto y : set) w.visit_ball_limit(w.ipuncture(y), lim, [&](std::uint32_t z) { hit.insert(z); });
            for (auto z : hit) outside += !a.contains(z);
        } else {
            outside = outer_count(w, a, cset);
        }
        return frac(static_cast<long>(outside), static_cast<long>(set.size()));
    };
    TransferReport rep;
    std::vector<std::pair<Rational, Rational>> results(units.size());
    std::vector<char> tested(units.size(), 0);
    parallel_for(units.size(), [&](std::size_t idx) {
        if (m[idx].hits != 1) return;
        std::vector<std::uint32_t> shape;
        for (const auto& d : off[static_cast<std::size_t>(m[idx].tower)]) {
            auto y = w.tile_at(w.ipuncture(m[idx].base) + d);
            if (y) shape.push_back(*y);
        }
        std::sort(shape.begin(), shape.end());
        auto kx = fibre_ranges(w, units[idx], kset);
        if (kx.empty()) {
            results[idx] = {ratio(shape, false), Rational(-1)};
        } else {
            results[idx] = {ratio(shape, false), ratio(kx, true)};
        }
        tested[idx] = 1;
    });
    for (std::size_t idx = 0; idx < units.size(); ++idx) {
        if (!tested[idx]) continue;
        ++rep.pairs;
        if (results[idx].first != results[idx].second && rep.all_equal) {
            rep.all_equal = false;
            rep.witness = units[idx];
            rep.left = results[idx].first;
            rep.right = results[idx].second;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json castle_to_json(const Castle& c, const SubstitutionRule& rule) {
    using nlohmann::json;
    json towers = json::array();
    for (const auto& t : c.towers) {
        json base = json::array(), shape = json::array();
        for (const auto& p : t.bases) {
            base.push_back({{"patch", patch_class_to_json(rule, p)}, {"tile", p.pointed}});
            for (const auto& l : t.levels)
                shape.push_back({{"patch_index", base.size() - 1},
                                 {"tile_src", p.pointed},
                                 {"tile_rng", tile_at_offset(rule, p, l.offset)}});
        }
        towers.push_back({{"supertile", rule.prototiles[t.supertile].label}, {"levels", t.levels.size()}, {"base", base}, {"shape", shape}});
    }
    return {{"towers", towers},
            {"is_decomposition", c.is_decomposition},
            {"level", c.level},
            {"base_radius", to_string(c.base_radius)},
            {"recognizability_radius", to_string(c.recognizability_radius)}};
}

} // namespace hull
