#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hull/geometry.hpp"

namespace hull {

struct Prototile {
    std::string label;
    Support support;
    Vec puncture;
};

struct Tile {
    std::uint32_t proto = 0;
    Vec offset;

    friend bool operator==(const Tile& a, const Tile& b) { return a.proto == b.proto && a.offset == b.offset; }
    friend bool operator<(const Tile& a, const Tile& b) {
        if (a.proto != b.proto) return a.proto < b.proto;
        return a.offset < b.offset;
    }
};

struct Patch {
    int dim = 1;
    std::vector<Tile> tiles;

    void canonicalize() { std::sort(tiles.begin(), tiles.end()); }
    friend bool operator==(const Patch& a, const Patch& b) { return a.dim == b.dim && a.tiles == b.tiles; }
};

/// Substitution with children placed inside lambda * support(p).
struct SubstitutionRule {
    std::string name;
    int dim = 1;
    std::vector<Prototile> prototiles;
    Rational inflation;
    std::vector<std::vector<Tile>> children;

    std::uint32_t index_of(const std::string& label) const {
        for (std::uint32_t i = 0; i < prototiles.size(); ++i)
            if (prototiles[i].label == label) return i;
        throw Error(ErrorKind::rule_invalid, "tiling-core", "unknown prototile label '" + label + "'");
    }
    Support tile_support(const Tile& t) const { return translate(prototiles.at(t.proto).support, t.offset); }
    Vec puncture(const Tile& t) const { return prototiles.at(t.proto).puncture + t.offset; }
};

struct RuleReport {
    bool ok = true;
    std::vector<std::string> problems;
    /// Per prototile: lambda^d * measure(support) and the summed child measure.
    std::vector<std::pair<Rational, Rational>> measures;
};

inline RuleReport check_rule(const SubstitutionRule& rule) {
    RuleReport rep;
    auto fail = [&](const std::string& what) {
        rep.ok = false;
        rep.problems.push_back(what);
    };
    if (rule.dim != 1 && rule.dim != 2) fail("dimension must be 1 or 2");
    if (rule.inflation <= 1) fail("inflation must exceed 1");
    std::set<std::string> labels;
    for (const auto& p : rule.prototiles) {
        if (!labels.insert(p.label).second) fail("duplicate label '" + p.label + "'");
        if (measure(p.support, rule.dim) <= 0) fail("prototile '" + p.label + "': degenerate support");
        else if (!strictly_interior(p.support, rule.dim, p.puncture))
            fail("prototile '" + p.label + "': puncture not strictly interior");
    }
    if (rule.children.size() != rule.prototiles.size()) {
        fail("children table size mismatch");
        return rep;
    }
    Rational lam_d = rule.dim == 1 ? rule.inflation : Rational(rule.inflation * rule.inflation);
    for (std::size_t p = 0; p < rule.prototiles.size(); ++p) {
        const auto& name = rule.prototiles[p].label;
        Support parent = scale(rule.prototiles[p].support, rule.inflation);
        Rational want = lam_d * measure(rule.prototiles[p].support, rule.dim);
        Rational got = 0;
        std::vector<Support> kids;
        for (const auto& c : rule.children[p]) {
            if (c.proto >= rule.prototiles.size()) {
                fail("prototile '" + name + "': child index out of range");
                continue;
            }
            kids.push_back(rule.tile_support(c));
            got += measure(kids.back(), rule.dim);
        }
        rep.measures.emplace_back(want, got);
        if (want != got) fail("prototile '" + name + "': child measure " + to_string(got) + " != " + to_string(want));
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (!contains_support(parent, kids[i], rule.dim))
                fail("prototile '" + name + "': child " + std::to_string(i) + " not contained");
            for (std::size_t j = i + 1; j < kids.size(); ++j)
                if (!interiors_disjoint(kids[i], kids[j], rule.dim))
                    fail("prototile '" + name + "': children " + std::to_string(i) + "," + std::to_string(j) +
                         " overlap");
        }
    }
    return rep;
}

inline void require_valid(const SubstitutionRule& rule) {
    auto rep = check_rule(rule);
    if (!rep.ok) throw Error(ErrorKind::rule_invalid, "tiling-core", rep.problems.front());
}

/// One substitution step applied to every tile.
inline Patch inflate_once(const SubstitutionRule& rule, const Patch& patch) {
    Patch out{patch.dim, {}};
    for (const auto& t : patch.tiles) {
        Vec base = rule.inflation * t.offset;
        for (const auto& c : rule.children.at(t.proto)) out.tiles.push_back({c.proto, c.offset + base});
    }
    return out;
}

inline Patch inflate(const SubstitutionRule& rule, Patch patch, int k) {
    require_valid(rule);
    if (k < 0) throw Error(ErrorKind::precondition, "tiling-core", "negative inflation count");
    for (int i = 0; i < k; ++i) patch = inflate_once(rule, patch);
    patch.canonicalize();
    return patch;
}

inline Patch single_tile(const SubstitutionRule& rule, std::uint32_t proto, Vec offset = {}) {
    return Patch{rule.dim, {Tile{proto, std::move(offset)}}};
}

/// Level-k supertile of one prototile, with the child-index path of every tile (top level first).
struct PathedSupertile {
    std::vector<Tile> tiles;
    std::vector<std::vector<std::uint8_t>> paths;
};

inline PathedSupertile inflate_with_paths(const SubstitutionRule& rule, std::uint32_t proto, int k) {
    PathedSupertile cur{{Tile{proto, {}}}, {{}}};
    for (int i = 0; i < k; ++i) {
        PathedSupertile next;
        for (std::size_t t = 0; t < cur.tiles.size(); ++t) {
            Vec base = rule.inflation * cur.tiles[t].offset;
            const auto& kids = rule.children.at(cur.tiles[t].proto);
            for (std::size_t c = 0; c < kids.size(); ++c) {
                next.tiles.push_back({kids[c].proto, kids[c].offset + base});
                auto path = cur.paths[t];
                path.push_back(static_cast<std::uint8_t>(c));
                next.paths.push_back(std::move(path));
            }
        }
        cur = std::move(next);
    }
    std::vector<std::size_t> order(cur.tiles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cur.tiles[a] < cur.tiles[b]; });
    PathedSupertile out;
    for (auto i : order) {
        out.tiles.push_back(cur.tiles[i]);
        out.paths.push_back(cur.paths[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace json_detail {

inline Vec parse_point(const nlohmann::json& j, int dim) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw Error(ErrorKind::rule_invalid, "tiling-core", "point must have " + std::to_string(dim) + " coordinates");
    auto coord = [](const nlohmann::json& c) {
        return c.is_string() ? parse_rational(c.get<std::string>()) : parse_rational(c.dump());
    };
    return dim == 1 ? Vec(coord(j[0])) : Vec(coord(j[0]), coord(j[1]));
}

inline nlohmann::json point_json(const Vec& v, int dim) {
    auto j = nlohmann::json::array();
    j.push_back(to_string(v.x));
    if (dim == 2) j.push_back(to_string(v.y));
    return j;
}

} // namespace json_detail

inline SubstitutionRule rule_from_json(const nlohmann::json& j) {
    SubstitutionRule rule;
    rule.dim = j.at("dimension").get<int>();
    if (rule.dim != 1 && rule.dim != 2) throw Error(ErrorKind::rule_invalid, "tiling-core", "dimension must be 1 or 2");
    rule.name = j.value("name", "");
    for (const auto& p : j.at("prototiles")) {
        Prototile proto;
        proto.label = p.at("label").get<std::string>();
        const auto& sup = p.at("support");
        if (rule.dim == 1) {
            if (!sup.is_array() || sup.size() != 2)
                throw Error(ErrorKind::rule_invalid, "tiling-core", "interval support needs 2 endpoints");
            proto.support.vertices = {json_detail::parse_point(nlohmann::json::array({sup[0]}), 1),
                                      json_detail::parse_point(nlohmann::json::array({sup[1]}), 1)};
        } else {
            for (const auto& v : sup) proto.support.vertices.push_back(json_detail::parse_point(v, 2));
        }
        proto.support = normalized(proto.support, rule.dim);
        const auto& pu = p.at("puncture");
        proto.puncture = json_detail::parse_point(pu.is_array() ? pu : nlohmann::json::array({pu}), rule.dim);
        rule.prototiles.push_back(std::move(proto));
    }
    const auto& sub = j.at("substitution");
    const auto& infl = sub.at("inflation");
    rule.inflation = infl.is_string() ? parse_rational(infl.get<std::string>()) : parse_rational(infl.dump());
    rule.children.resize(rule.prototiles.size());
    const auto& kids = sub.at("children");
    for (std::uint32_t p = 0; p < rule.prototiles.size(); ++p) {
        const auto& label = rule.prototiles[p].label;
        if (!kids.contains(label))
            throw Error(ErrorKind::rule_invalid, "tiling-core", "prototile '" + label + "' has no children");
        for (const auto& c : kids.at(label)) {
            const auto& off = c.at("offset");
            rule.children[p].push_back(
                {rule.index_of(c.at("label").get<std::string>()),
                 json_detail::parse_point(off.is_array() ? off : nlohmann::json::array({off}), rule.dim)});
        }
    }
    return rule;
}

inline nlohmann::json rule_to_json(const SubstitutionRule& rule) {
    using nlohmann::json;
    json j;
    if (!rule.name.empty()) j["name"] = rule.name;
    j["dimension"] = rule.dim;
    j["prototiles"] = json::array();
    for (const auto& p : rule.prototiles) {
        json sup = json::array();
        if (rule.dim == 1) {
            sup.push_back(to_string(p.support.vertices[0].x));
            sup.push_back(to_string(p.support.vertices[1].x));
        } else {
            for (const auto& v : p.support.vertices) sup.push_back(json_detail::point_json(v, 2));
        }
        j["prototiles"].push_back({{"label", p.label}, {"support", sup}, {"puncture", json_detail::point_json(p.puncture, rule.dim)}});
    }
    json kids = json::object();
    for (std::size_t p = 0; p < rule.prototiles.size(); ++p) {
        json list = json::array();
        for (const auto& c : rule.children[p])
            list.push_back({{"label", rule.prototiles[c.proto].label}, {"offset", json_detail::point_json(c.offset, rule.dim)}});
        kids[rule.prototiles[p].label] = list;
    }
    j["substitution"] = {{"inflation", to_string(rule.inflation)}, {"children", kids}};
    return j;
}

inline SubstitutionRule load_rule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::precondition, "tiling-core", "cannot open fixture '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::rule_invalid, "tiling-core", std::string("malformed JSON: ") + e.what());
    }
    auto rule = rule_from_json(j);
    if (rule.name.empty()) {
        auto slash = path.find_last_of('/');
        rule.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    }
    return rule;
}

/// Extreme volumes and the largest puncture-to-support reach over all prototiles.
struct RuleGeometry {
    Rational v_min, v_max;
    Rational reach2_max;  ///< squared
};

inline RuleGeometry rule_geometry(const SubstitutionRule& rule) {
    RuleGeometry g;
    bool first = true;
    for (const auto& p : rule.prototiles) {
        Rational v = measure(p.support, rule.dim);
        Rational r = reach2(p.support, p.puncture);
        if (first) {
            g.v_min = g.v_max = v;
            g.reach2_max = r;
            first = false;
        } else {
            g.v_min = std::min(g.v_min, v);
            g.v_max = std::max(g.v_max, v);
            g.reach2_max = std::max(g.reach2_max, r);
        }
    }
    return g;
}

} // namespace hull
