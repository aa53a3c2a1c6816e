#pragma once

#include "hull/groupoid.hpp"
#include "hull/sparse.hpp"

namespace hull {

/// Kellendonk generator e(P, t, t'): indicator of V(P, t, t').
struct EFunction {
    PatchClass patch;
    std::uint32_t src = 0;
    std::uint32_t rng = 0;

    BisectionSet bisection() const { return {patch, src, rng}; }
    EFunction adjoint() const { return {patch, rng, src}; }
};

struct Represented {
    RationalOperator op;
    std::vector<std::uint32_t> dropped;  ///< columns without enough margin
    Rational margin;
};

/// pi(C) on l^2(window punctures): delta_x -> sum of delta_y over y in Cx, for columns x with margin.
inline Represented represent(const CompactSet& c, const Window& w) {
    Represented r;
    r.op = RationalOperator(w.size());
    r.margin = c.margin();
    for (std::uint32_t x = 0; x < w.size(); ++x) {
        if (!w.is_valid(x, r.margin)) {
            r.dropped.push_back(x);
            continue;
        }
        for (auto y : fibre_ranges(w, x, c)) r.op.add(y, x, 1);
    }
    return r;
}

inline Represented represent(const EFunction& e, const Window& w) {
    return represent(CompactSet::bisections({e.bisection()}), w);
}

/// Rows and columns restricted to a set of punctures.
inline RationalOperator restrict_to(const RationalOperator& a, const std::vector<char>& keep) {
    RationalOperator out(a.dim());
    for (const auto& [k, v] : a.entries())
        if (keep[k.first] && keep[k.second]) out.add(k.first, k.second, v);
    return out;
}

/**
 * P union P' glued so that tile `at` of P and tile `at2` of P' coincide;
 * nullopt if they disagree on an overlap. Pointed as P.
 */
inline std::optional<PatchClass> patch_union(const SubstitutionRule& rule, const PatchClass& p, std::uint32_t at,
                                             const PatchClass& q, std::uint32_t at2) {
    Vec shift = rule.puncture(p.tiles[at]) - rule.puncture(q.tiles[at2]);
    PatchClass out = p;
    for (const auto& t : q.tiles) {
        Tile moved{t.proto, t.offset + shift};
        Support s = rule.tile_support(moved);
        bool same = false;
        for (const auto& u : p.tiles) {
            if (u == moved) {
                same = true;
                break;
            }
            if (!interiors_disjoint(rule.tile_support(u), s, rule.dim)) return std::nullopt;
        }
        if (!same) out.tiles.push_back(moved);
    }
    Tile pointed = p.tiles[p.pointed];
    std::sort(out.tiles.begin(), out.tiles.end());
    out.pointed = static_cast<std::uint32_t>(std::find(out.tiles.begin(), out.tiles.end(), pointed) - out.tiles.begin());
    return out;
}

inline std::uint32_t index_of_tile(const PatchClass& p, const Tile& t) {
    auto it = std::find(p.tiles.begin(), p.tiles.end(), t);
    if (it == p.tiles.end()) throw Error(ErrorKind::internal, "calgebra", "tile missing from patch");
    return static_cast<std::uint32_t>(it - p.tiles.begin());
}

struct RelationReport {
    bool adjoint_ok = false;
    bool product_ok = false;
    bool compatible = false;
    bool partial_isometry = false;
};

/**
 * e(P,t,t')* = e(P,t',t) and, composing arrows, pi(e(P',t',t'')) pi(e(P,t,t'))
 * = pi(e(P u P', t, t'')), or 0 when the patches disagree. Compared on
 * columns with margin for every factor.
 */
inline RelationReport check_relations(const EFunction& e1, const EFunction& e2, const Window& w) {
    const auto& rule = w.rule();
    RelationReport rep;
    auto a = represent(e1, w), b = represent(e2, w), a_star = represent(e1.adjoint(), w);
    rep.partial_isometry = is_partial_isometry(a.op);

    auto glued = patch_union(rule, e1.patch, e1.rng, e2.patch, e2.src);
    rep.compatible = glued.has_value();
    RationalOperator expected(w.size());
    Rational margin = std::max(a.margin, b.margin);
    if (glued) {
        Vec shift = rule.puncture(e1.patch.tiles[e1.rng]) - rule.puncture(e2.patch.tiles[e2.src]);
        EFunction u{*glued, index_of_tile(*glued, e1.patch.tiles[e1.src]),
                    index_of_tile(*glued, Tile{e2.patch.tiles[e2.rng].proto, e2.patch.tiles[e2.rng].offset + shift})};
        auto c = represent(u, w);
        margin = std::max(margin, c.margin);
        expected = c.op;
    }
    // compare on columns whose images stay inside the region every factor sees
    Rational reach = margin + sqrt_upper(norm2(rule.puncture(e1.patch.tiles[e1.rng]) - rule.puncture(e1.patch.tiles[e1.src])), 24);
    std::vector<char> keep(w.size(), 0);
    for (std::uint32_t x = 0; x < w.size(); ++x) keep[x] = w.is_valid(x, reach);
    rep.adjoint_ok = restrict_to(a.op.adjoint(), keep) == restrict_to(a_star.op, keep);
    RationalOperator prod = b.op * a.op;
    RationalOperator lhs(w.size()), rhs(w.size());
    for (const auto& [k, v] : prod.entries())
        if (keep[k.second]) lhs.add(k.first, k.second, v);
    for (const auto& [k, v] : expected.entries())
        if (keep[k.second]) rhs.add(k.first, k.second, v);
    rep.product_ok = lhs == rhs;
    return rep;
}

/// E(f) = sum over units of f restricted there: the diagonal part.
template <class Scalar>
SparseOperator<Scalar> conditional_expectation(const SparseOperator<Scalar>& f) {
    return f.diagonal_part();
}

struct ExpectationReport {
    bool idempotent = false;
    bool bimodule = false;
    bool faithful = false;
    bool unital_on_diagonals = false;
};

/// Exact checks of E on x with diagonals d1, d2.
inline ExpectationReport check_expectation(const RationalOperator& x, const RationalOperator& d1, const RationalOperator& d2) {
    ExpectationReport r;
    auto ex = conditional_expectation(x);
    r.idempotent = conditional_expectation(ex) == ex;
    r.bimodule = conditional_expectation(d1 * x * d2) == d1 * ex * d2;
    r.unital_on_diagonals = conditional_expectation(d1) == d1;
    auto pos = conditional_expectation(x.adjoint() * x);
    r.faithful = (pos.nnz() == 0) == (x.nnz() == 0);
    for (const auto& [k, v] : pos.entries()) r.faithful = r.faithful && v > 0;
    return r;
}

// ---------------------------------------------------------------------------
// quasidiagonality

/// Q_n: projection onto punctures with |x(t)| < n.
inline RationalOperator qd_projection(const Window& w, const Rational& n) {
    if (n > w.radius())
        throw Error(ErrorKind::margin, "calgebra", "n = " + to_string(n) + " exceeds the window radius " + to_string(w.radius()));
    RationalOperator q(w.size());
    __int128 lim = strict_ball_limit(n, w.den());
    for (std::uint32_t x = 0; x < w.size(); ++x)
        if (inorm2(w.ipuncture(x)) <= lim) q.add(x, x, 1);
    return q;
}

struct ProfileRow {
    Rational n;
    Rational sup_norm2;          ///< sup over columns in B_m of the squared column norm
    std::size_t crossing = 0;    ///< columns in B_m with a nonzero commutator column
};

struct CommutatorProfile {
    Rational m;
    Rational shift;      ///< |x(t') - x(t)|, upper bound when irrational
    Rational safety;     ///< largest prototile diameter
    Rational threshold;  ///< m + shift + safety
    std::vector<ProfileRow> rows;
    bool zero_past_threshold = true;
};

/**
 * For each n: sup over basis vectors delta_t'' with |x(t'')| < m of
 * ||(Q_n pi(e) - pi(e) Q_n) delta_t''||.
 */
inline CommutatorProfile qd_commutator_profile(const EFunction& e, const Rational& m, const std::vector<Rational>& ns,
                                               const Window& w) {
    const auto& rule = w.rule();
    CommutatorProfile prof;
    prof.m = m;
    Rational s2 = norm2(rule.puncture(e.patch.tiles[e.rng]) - rule.puncture(e.patch.tiles[e.src]));
    prof.shift = exact_sqrt(s2).value_or(sqrt_upper(s2, 24));
    Rational diam2 = 0;
    for (const auto& p : rule.prototiles)
        for (const auto& a : p.support.vertices)
            for (const auto& b : p.support.vertices) diam2 = std::max(diam2, Rational(norm2(a - b)));
    prof.safety = exact_sqrt(diam2).value_or(sqrt_upper(diam2, 24));
    prof.threshold = m + prof.shift + prof.safety;

    auto rep = represent(e, w);
    __int128 mlim = strict_ball_limit(m, w.den());
    std::vector<std::uint32_t> columns;
    for (std::uint32_t x = 0; x < w.size(); ++x)
        if (inorm2(w.ipuncture(x)) <= mlim) {
            if (!w.is_valid(x, rep.margin))
                throw Error(ErrorKind::margin, "calgebra", "basis vectors in B_m lack margin for the generator");
            columns.push_back(x);
        }
    for (const auto& n : ns) {
        auto q = qd_projection(w, n);
        auto comm = q * rep.op - rep.op * q;
        std::map<std::uint32_t, Rational> col;
        for (const auto& [k, v] : comm.entries()) col[k.second] += v * v;
        ProfileRow row;
        row.n = n;
        row.sup_norm2 = 0;
        for (auto c : columns) {
            auto it = col.find(c);
            if (it == col.end() || it->second == 0) continue;
            ++row.crossing;
            row.sup_norm2 = std::max(row.sup_norm2, it->second);
        }
        if (n >= prof.threshold && row.sup_norm2 != 0) prof.zero_past_threshold = false;
        prof.rows.push_back(row);
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Cuntz subequivalence witness

/// One routing piece: weight h_m and arrow sets (bisections) translating its support.
struct Route {
    std::vector<Rational> weight;         ///< h_m, indexed by window puncture
    std::vector<CompactSet> translates;   ///< S_m
};

struct Witness {
    SurdOperator v;
    SurdOperator product;  ///< v* g v
    bool exact = false;
};

/**
 * v = sum_m sum_{t in S_m} U_t (f h_m)^{1/2}; requires that each point of
 * supp(f h_m) is moved by exactly one t in S_m, that all translate images are
 * disjoint and that g = 1 on them.
 */
inline Witness subequivalence_witness(const std::vector<Route>& routes, const std::vector<Rational>& f,
                                      const std::vector<Rational>& g, const Window& w) {
    const std::size_t n = w.size();
    if (f.size() != n || g.size() != n) throw Error(ErrorKind::precondition, "calgebra", "f and g must be indexed by window punctures");
    Witness out;
    out.v = SurdOperator(n);
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> owner;  // image -> (route, translate)
    for (std::size_t m = 0; m < routes.size(); ++m) {
        const auto& r = routes[m];
        for (std::uint32_t x = 0; x < n; ++x) {
            Rational fh = f[x] * r.weight.at(x);
            if (fh == 0) continue;
            if (fh < 0 || f[x] > 1) throw Error(ErrorKind::precondition, "calgebra", "weights must lie in [0, 1]");
            std::optional<std::uint32_t> image;
            std::size_t which = 0;
            for (std::size_t t = 0; t < r.translates.size(); ++t) {
                w.require_valid(x, r.translates[t].margin(), "calgebra");
                auto ys = fibre_ranges(w, x, r.translates[t]);
                if (ys.empty()) continue;
                if (ys.size() > 1 || image)
                    throw Error(ErrorKind::precondition, "calgebra",
                                "route " + std::to_string(m) + " moves puncture " + std::to_string(x) + " more than once");
                image = ys[0];
                which = t;
            }
            if (!image)
                throw Error(ErrorKind::precondition, "calgebra",
                            "route " + std::to_string(m) + " does not move puncture " + std::to_string(x));
            auto [it, fresh] = owner.emplace(*image, std::make_pair(m, which));
            if (!fresh)
                throw Error(ErrorKind::precondition, "calgebra",
                            "translate images collide at puncture " + std::to_string(*image) + ": route " +
                                std::to_string(it->second.first) + " translate " + std::to_string(it->second.second) +
                                " and route " + std::to_string(m) + " translate " + std::to_string(which));
            if (g[*image] != 1)
                throw Error(ErrorKind::precondition, "calgebra", "g is not 1 on the image puncture " + std::to_string(*image));
            out.v.add(*image, x, Surd::sqrt_of(fh));
        }
    }
    SurdOperator gop(n);
    for (std::uint32_t x = 0; x < n; ++x) gop.add(x, x, Surd(g[x]));
    out.product = out.v.adjoint() * gop * out.v;
    SurdOperator fop(n);
    for (std::uint32_t x = 0; x < n; ++x) fop.add(x, x, Surd(f[x]));
    out.exact = out.product == fop;
    return out;
}

// ---------------------------------------------------------------------------
// trace estimate

struct TraceEstimate {
    Rational value;  ///< average over the largest ball
    Rational bar;    ///< max deviation of the averages over the later half of the radii
    std::vector<std::pair<Rational, Rational>> averages;
};

/**
 * Averages of a diagonal function over B_r(0) for the given radii. f must be
 * pattern-equivariant at `radius`: equal radius-patches, equal values.
 */
inline TraceEstimate trace_estimate(const std::vector<Rational>& f, const std::vector<Rational>& radii, const Rational& radius,
                                    const Window& w) {
    if (f.size() != w.size()) throw Error(ErrorKind::precondition, "calgebra", "f must be indexed by window punctures");
    if (radii.empty()) throw Error(ErrorKind::precondition, "calgebra", "no radii");
    std::map<PatchClass, Rational> seen;
    for (auto u : w.valid_units(radius)) {
        auto [it, fresh] = seen.emplace(patch_class_at(w, u, radius), f[u]);
        if (!fresh && it->second != f[u])
            throw Error(ErrorKind::precondition, "calgebra",
                        "f is not pattern-equivariant at radius " + to_string(radius) + " (puncture " + std::to_string(u) + ")");
    }
    TraceEstimate est;
    for (const auto& r : radii) {
        if (r > w.radius()) throw Error(ErrorKind::margin, "calgebra", "radius " + to_string(r) + " exceeds the window");
        __int128 lim = strict_ball_limit(r, w.den());
        Rational sum = 0;
        long count = 0;
        for (std::uint32_t x = 0; x < w.size(); ++x)
            if (inorm2(w.ipuncture(x)) <= lim) {
                sum += f[x];
                ++count;
            }
        est.averages.push_back({r, count ? Rational(sum / count) : Rational(0)});
    }
    est.value = est.averages.back().second;
    est.bar = 0;
    for (std::size_t i = est.averages.size() / 2; i < est.averages.size(); ++i)
        est.bar = std::max(est.bar, Rational(abs(est.averages[i].second - est.value)));
    return est;
}

} // namespace hull
