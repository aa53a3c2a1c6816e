#pragma once

#include <cmath>
#include <map>

#include "hull/groupoid.hpp"

namespace hull {

/// Family of subsets of one fibre Au, each held as sorted positions into Au.ranges.
using LocalFamily = std::vector<std::vector<std::uint32_t>>;

/// Positions of `ranges` inside the host fibre; nullopt if some range falls outside it.
inline std::optional<std::vector<std::uint32_t>> localize(const UnitArrows& host, const std::vector<std::uint32_t>& ranges) {
    std::vector<std::uint32_t> out;
    out.reserve(ranges.size());
    for (auto r : ranges) {
        auto it = std::lower_bound(host.ranges.begin(), host.ranges.end(), r);
        if (it == host.ranges.end() || *it != r) return std::nullopt;
        out.push_back(static_cast<std::uint32_t>(it - host.ranges.begin()));
    }
    return out;
}

/// Whether count >= q * total, exactly.
inline bool at_least(std::size_t count, const Rational& q, std::size_t total) {
    return Rational(static_cast<long>(count)) >= q * static_cast<long>(total);
}

struct EvenCoveringReport {
    bool pass = false;
    bool members_inside = true;
    std::size_t max_multiplicity = 0;
    std::size_t total_mass = 0;
    std::size_t host_size = 0;
    std::size_t multiplicity = 0;
    Rational lambda;
};

/// Checks sum of indicators <= M pointwise and sum of sizes >= lambda * M * |Au|.
inline EvenCoveringReport check_even_covering(const LocalFamily& family, std::size_t host_size, const Rational& lambda,
                                              std::size_t multiplicity) {
    EvenCoveringReport r;
    r.host_size = host_size;
    r.multiplicity = multiplicity;
    r.lambda = lambda;
    std::vector<std::size_t> count(host_size, 0);
    for (const auto& m : family) {
        r.total_mass += m.size();
        for (auto x : m) {
            if (x >= host_size) {
                r.members_inside = false;
                continue;
            }
            r.max_multiplicity = std::max(r.max_multiplicity, ++count[x]);
        }
    }
    r.pass = r.members_inside && r.max_multiplicity <= multiplicity &&
             Rational(static_cast<long>(r.total_mass)) >= lambda * static_cast<long>(multiplicity) * static_cast<long>(host_size);
    return r;
}

struct Disjointification {
    std::vector<std::size_t> kept;               ///< indices into the family, in selection order
    std::vector<std::vector<std::uint32_t>> hats; ///< one per kept member
    std::size_t covered = 0;                     ///< size of the union of kept members
    bool disjoint_ok = false;
    bool cover_ok = false;
};

/**
 * Greedy selection over members in descending cardinality (ties by index): a
 * member is kept when the part missed by earlier kept members has at least
 * (1 - eps) of its size; that part is its hat set.
 */
inline Disjointification greedy_disjointify(const LocalFamily& family, std::size_t host_size, const Rational& eps,
                                            std::vector<char>* claimed_io = nullptr) {
    std::vector<std::size_t> order(family.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return family[a].size() > family[b].size(); });
    std::vector<char> local(claimed_io ? 0 : host_size, 0);
    std::vector<char>& claimed = claimed_io ? *claimed_io : local;
    Rational keep = 1 - eps;
    Disjointification out;
    for (auto i : order) {
        std::vector<std::uint32_t> fresh;
        for (auto x : family[i])
            if (!claimed[x]) fresh.push_back(x);
        if (!at_least(fresh.size(), keep, family[i].size())) continue;
        for (auto x : family[i]) {
            if (!claimed[x]) ++out.covered;
            claimed[x] = 1;
        }
        out.kept.push_back(i);
        out.hats.push_back(std::move(fresh));
    }
    out.disjoint_ok = true;
    return out;
}

/// Disjointification: requires a lambda-even covering with multiplicity M.
inline Disjointification disjointify(const LocalFamily& family, std::size_t host_size, const Rational& eps,
                                     const Rational& lambda, std::size_t multiplicity) {
    if (eps < 0 || eps > frac(1, 2)) throw Error(ErrorKind::precondition, "quasitiling", "disjointify needs 0 <= eps <= 1/2");
    auto even = check_even_covering(family, host_size, lambda, multiplicity);
    if (!even.pass)
        throw Error(ErrorKind::precondition, "quasitiling",
                    "even-covering violated: mass " + std::to_string(even.total_mass) + ", multiplicity " +
                        std::to_string(even.max_multiplicity) + " vs M=" + std::to_string(multiplicity));
    auto d = greedy_disjointify(family, host_size, eps);
    d.cover_ok = at_least(d.covered, eps * lambda, host_size);
    return d;
}

struct TranslateCovering {
    bool skipped = false;  ///< empty fibre
    std::uint32_t unit = 0;
    std::vector<std::uint32_t> centres;  ///< ranges of a in I_C(Au)
    LocalFamily members;                 ///< C a as positions in Au
    Rational delta;
    Rational lambda;
    std::size_t multiplicity = 0;
    EvenCoveringReport check;
};

/// {Ca : a in I_C(Au)} with lambda = 1 - delta and M = sup |wC| from the window constants.
inline TranslateCovering translate_covering(const Window& w, const UnitArrows& a, const CompactSet& c, const Rational& eps,
                                            const InvarianceConstants& k) {
    TranslateCovering out;
    out.unit = a.unit;
    if (a.ranges.empty()) {
        out.skipped = true;
        return out;
    }
    if (!membership({a.unit, a.unit}, c, w))
        throw Error(ErrorKind::precondition, "quasitiling", "C must contain the units");
    auto inner = inner_part(w, a, c);
    if (!at_least(inner.size(), 1 - eps, a.size()))
        throw Error(ErrorKind::precondition, "quasitiling",
                    "fibre at unit " + std::to_string(a.unit) + " is not (C, eps)-invariant: " +
                        std::to_string(inner.size()) + "/" + std::to_string(a.size()));
    Rational ratio = frac(static_cast<long>(k.inf_fibre), static_cast<long>(k.c2));
    out.delta = std::max(Rational(0), Rational(1 - ratio * (1 - eps)));
    out.lambda = 1 - out.delta;
    out.multiplicity = k.c2;
    for (auto v : inner.ranges) {
        out.centres.push_back(v);
        out.members.push_back(localize(a, fibre_ranges(w, v, c)).value());
    }
    out.check = check_even_covering(out.members, a.size(), out.lambda, out.multiplicity);
    return out;
}

// ---------------------------------------------------------------------------
// tile sequences

struct TileCertificate {
    Rational radius;
    std::size_t inf_fibre = 0;
    std::size_t sup_cofibre = 0;
    bool cond_i = false;
    bool cond_ii = false;
    bool cond_iii = true;
    std::size_t boundary = 0;       ///< worst |boundary of T_i w relative to T_{i-1}|
    std::size_t boundary_host = 0;  ///< matching |T_i w|
    std::optional<long> analytic_k; ///< least k with C_{n,k} <= eps^2/8
    std::size_t units = 0;
};

struct TileSequence {
    Rational epsilon;
    int m = 0;
    std::vector<Rational> radii;
    std::vector<TileCertificate> certificates;
    int stopping_length = 0;  ///< least n with (1 - eps/m)^n < eps
    bool certified = false;

    std::vector<CompactSet> tiles() const {
        std::vector<CompactSet> out;
        for (const auto& r : radii) out.push_back(CompactSet::ball(r));
        return out;
    }
    bool length_suffices() const { return static_cast<int>(radii.size()) >= stopping_length; }

    /// Uncertified sequence from explicit radii.
    static TileSequence from_radii(std::vector<Rational> radii, Rational eps, int m) {
        TileSequence s;
        s.epsilon = std::move(eps);
        s.m = m;
        s.radii = std::move(radii);
        s.stopping_length = stopping_length_for(s.epsilon, m);
        return s;
    }

    static int stopping_length_for(const Rational& eps, int m) {
        Rational q = 1 - eps / m, p = 1;
        for (int n = 1; n < 100000; ++n) {
            p *= q;
            if (p < eps) return n;
        }
        throw Error(ErrorKind::inconclusive, "quasitiling", "stopping length too large");
    }
};

inline int choose_m(const SubstitutionRule& rule) {
    Rational vmin = -1, vmax = 0;
    for (const auto& p : rule.prototiles) {
        Rational v = measure(p.support, rule.dim);
        if (vmin < 0 || v < vmin) vmin = v;
        vmax = std::max(vmax, v);
    }
    Rational bound = std::max(Rational(vmax / vmin), Rational(2));
    return static_cast<int>(to_int64(floor(bound))) + 1;
}

namespace quasitiling_detail {

inline double analytic_c(double n, double k, double dmax, double vmin, double vmax, int d) {
    double outer = std::pow(2 * n + k + dmax, d), inner = std::pow(std::max(0.0, k - dmax), d);
    double base = n + k - dmax;
    if (base <= 0) return std::numeric_limits<double>::infinity();
    return vmax * (outer - inner) / (vmin * std::pow(base, d));
}

/// For each unit w, squared distances d2(y) of punctures in a region and min/max of d2 over each T_n z.
struct BoundaryProfile {
    std::vector<__int128> dist2;          // |y - w|^2 for punctures y of the region
    std::vector<__int128> min2, max2;     // over T_n z, for z in the region
};

inline BoundaryProfile profile(const Window& w, std::uint32_t unit, const Rational& inner, const Rational& region) {
    BoundaryProfile p;
    const IVec& c = w.ipuncture(unit);
    __int128 lim = strict_ball_limit(inner, w.den());
    w.visit_ball(c, region, [&](std::uint32_t z) {
        p.dist2.push_back(inorm2(w.ipuncture(z) - c));
        __int128 lo = -1, hi = -1;
        w.visit_ball_limit(w.ipuncture(z), lim, [&](std::uint32_t y) {
            __int128 d = inorm2(w.ipuncture(y) - c);
            if (lo < 0 || d < lo) lo = d;
            if (hi < 0 || d > hi) hi = d;
        });
        p.min2.push_back(lo);
        p.max2.push_back(hi);
    });
    std::sort(p.dist2.begin(), p.dist2.end());
    std::sort(p.min2.begin(), p.min2.end());
    std::sort(p.max2.begin(), p.max2.end());
    return p;
}

inline std::size_t count_le(const std::vector<__int128>& v, __int128 x) {
    return static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
}

} // namespace quasitiling_detail

/// Conditions (i) and (ii) for Ball(radius) over the window's valid units.
inline TileCertificate certify_ratio(const Window& w, const Rational& radius, const Rational& eps, int m) {
    auto k = invariance_constants(CompactSet::ball(radius), w);
    TileCertificate c;
    c.radius = radius;
    c.inf_fibre = k.inf_fibre;
    c.sup_cofibre = k.c2;
    c.units = k.units;
    Rational ratio = frac(static_cast<long>(k.inf_fibre), static_cast<long>(k.c2));
    c.cond_i = ratio > Rational(1, m) && ratio <= 1;
    c.cond_ii = ratio * (1 - eps) >= Rational(1, m);
    return c;
}

/**
 * T_{n_1} subset T_{n_2} ... with T_n = Ball(n), n_1 the least n meeting the
 * ratio conditions and n_{i+1} = n_i + k(n_i), k(n) the least k whose
 * boundary ratio is at most eps^2/8 on every valid unit.
 */
inline TileSequence build_tile_sequence(const Window& w, const Rational& eps, int length) {
    if (!(eps > 0 && eps < frac(1, 2))) throw Error(ErrorKind::precondition, "quasitiling", "need 0 < eps < 1/2");
    if (length < 1) throw Error(ErrorKind::precondition, "quasitiling", "need at least one tile");
    const auto& rule = w.rule();
    TileSequence seq;
    seq.epsilon = eps;
    seq.m = choose_m(rule);
    seq.stopping_length = TileSequence::stopping_length_for(eps, seq.m);

    auto geom = rule_geometry(rule);
    Rational dmax2 = 0;
    for (const auto& p : rule.prototiles)
        for (const auto& a : p.support.vertices)
            for (const auto& b : p.support.vertices) dmax2 = std::max(dmax2, Rational(norm2(a - b)));
    double dmax = std::sqrt(dmax2.get_d());
    double vmin = geom.v_min.get_d(), vmax = geom.v_max.get_d();
    Rational target = eps * eps / 8;

    long n = 1;
    for (;; ++n) {
        if (Rational(n) > w.radius()) throw Error(ErrorKind::margin, "quasitiling", "no ball meets the ratio conditions in this window");
        auto c = certify_ratio(w, n, eps, seq.m);
        if (c.cond_i && c.cond_ii) {
            seq.radii.push_back(n);
            seq.certificates.push_back(c);
            break;
        }
    }
    while (static_cast<int>(seq.radii.size()) < length) {
        std::optional<long> analytic;
        for (long k = 1; k < 100000000; ++k)
            if (quasitiling_detail::analytic_c(static_cast<double>(n), static_cast<double>(k), dmax, vmin, vmax, rule.dim) <=
                target.get_d()) {
                analytic = k;
                break;
            }
        long ceiling = analytic.value_or(100000000);
        std::optional<long> found;
        TileCertificate cert;
        const long room = static_cast<long>(to_int64(floor(w.radius()))) - 3 * n;
        auto too_small = [&](long k) {
            return Error(ErrorKind::margin, "quasitiling",
                         "window too small to certify tile " + std::to_string(seq.radii.size() + 1) + "; required N >= " +
                             std::to_string(3 * n + k) + " (analytic ceiling k=" + std::to_string(ceiling) + ")");
        };
        for (long span = 16;; span *= 2) {
            long kmax = std::min({span, ceiling, room});
            if (kmax < 1) throw too_small(1);
            Rational margin = Rational(3 * n + kmax);
            auto units = w.valid_units(margin);
            if (units.empty()) throw too_small(kmax);
            auto profiles = parallel_map<quasitiling_detail::BoundaryProfile>(units.size(), [&](std::size_t i) {
                return quasitiling_detail::profile(w, units[i], n, Rational(n + kmax + n));
            });
            for (long k = 1; k <= kmax && !found; ++k) {
                __int128 lim = strict_ball_limit(Rational(n + k), w.den());
                bool ok = true;
                std::size_t worst_b = 0, worst_h = 1;
                for (const auto& p : profiles) {
                    std::size_t host = quasitiling_detail::count_le(p.dist2, lim);
                    std::size_t b = quasitiling_detail::count_le(p.min2, lim) - quasitiling_detail::count_le(p.max2, lim);
                    if (Rational(static_cast<long>(b)) > target * static_cast<long>(host)) {
                        ok = false;
                        break;
                    }
                    if (b * worst_h >= worst_b * host) worst_b = b, worst_h = host;
                }
                if (ok) {
                    found = k;
                    cert.boundary = worst_b;
                    cert.boundary_host = worst_h;
                    cert.units = units.size();
                }
            }
            if (found || kmax >= ceiling) break;
            if (kmax >= room) throw too_small(std::min(2 * span, ceiling));
        }
        if (!found)
            throw Error(ErrorKind::inconclusive, "quasitiling",
                        "no k up to the analytic ceiling meets the boundary condition after n=" + std::to_string(n));
        n += *found;
        auto ratio = certify_ratio(w, n, eps, seq.m);
        ratio.boundary = cert.boundary;
        ratio.boundary_host = cert.boundary_host;
        ratio.analytic_k = analytic;
        ratio.cond_iii = true;
        seq.radii.push_back(n);
        seq.certificates.push_back(ratio);
    }
    seq.certified = std::all_of(seq.certificates.begin(), seq.certificates.end(),
                                [](const TileCertificate& c) { return c.cond_i && c.cond_ii && c.cond_iii; });
    return seq;
}

// ---------------------------------------------------------------------------
// Ornstein-Weiss recursion

struct TranslateRef {
    std::uint32_t tile = 0;    ///< index into the tile list (0-based)
    std::uint32_t centre = 0;  ///< range puncture of the centre arrow
};

struct FibreQuasitiling {
    std::uint32_t unit = 0;
    std::size_t host_size = 0;
    std::vector<TranslateRef> translates;  ///< in construction order
    std::size_t covered = 0;
};

struct StepRecord {
    std::uint32_t tile = 0;  ///< 0-based tile index k-1
    Rational lambda;
    std::size_t units_in_z = 0;
    Rational min_cover;          ///< min over units of covered/|Au| after this step
    bool lambda_ok = true;
    bool invariance_ok = true;   ///< A_k is (T_k, eps/2)-invariant on Z_k (base step: the input precondition)
    bool even_ok = true;         ///< family is a (1/m)-even covering with M = sup|wT_k|
    bool fraction_ok = true;     ///< kept translates (eps/m)-cover A_k u
};

struct Quasitiling {
    Rational epsilon;
    int m = 0;
    std::vector<Rational> radii;
    std::vector<FibreQuasitiling> fibres;
    std::vector<StepRecord> ledger;  ///< one per tile, from the largest down
    bool precondition_ok = true;
    Rational worst_invariance;       ///< max over fibres of 1 - |I_{T_L}(Au)|/|Au|
    std::uint32_t worst_unit = 0;
};

struct OwOptions {
    bool require_invariance = true;
};

namespace quasitiling_detail {

struct FibreStep {
    bool in_z = false;
    bool invariance_ok = true;
    bool even_ok = true;
    bool fraction_ok = true;
    std::size_t covered_after = 0;
};

struct FibreRun {
    FibreQuasitiling result;
    std::vector<FibreStep> steps;  // per tile index, largest first
    Rational invariance_defect;
};

inline FibreRun run_fibre(const Window& w, const UnitArrows& a, const std::vector<CompactSet>& tiles, const Rational& eps,
                          int m, const std::vector<std::size_t>& sup_cofibre) {
    FibreRun run;
    run.result.unit = a.unit;
    run.result.host_size = a.size();
    const std::size_t host = a.size();
    std::vector<char> covered(host, 0);
    std::size_t covered_count = 0;
    const std::size_t L = tiles.size();
    // translate sets of each a in Au, per tile, computed lazily
    for (std::size_t step = 0; step < L; ++step) {
        std::size_t k = L - 1 - step;
        FibreStep fs;
        std::size_t remaining = host - covered_count;
        if (step > 0 && !at_least(remaining, eps, host)) {
            fs.covered_after = covered_count;
            run.steps.push_back(fs);
            continue;
        }
        fs.in_z = true;
        LocalFamily family;
        std::vector<std::uint32_t> centres;
        std::size_t inner_remaining = 0;
        for (std::uint32_t i = 0; i < host; ++i) {
            if (covered[i]) continue;
            auto loc = localize(a, fibre_ranges(w, a.ranges[i], tiles[k]));
            if (!loc) continue;
            bool inside = std::none_of(loc->begin(), loc->end(), [&](std::uint32_t x) { return covered[x] != 0; });
            if (!inside) continue;
            ++inner_remaining;
            family.push_back(std::move(*loc));
            centres.push_back(a.ranges[i]);
        }
        if (step == 0) {
            run.invariance_defect = 1 - frac(static_cast<long>(inner_remaining), static_cast<long>(host));
            fs.invariance_ok = at_least(inner_remaining, 1 - eps * eps / 4, host);
        } else {
            fs.invariance_ok = at_least(inner_remaining, 1 - eps / 2, remaining);
        }
        // members are subsets of A_k u; index them relative to the host for the even-covering check
        fs.even_ok = check_even_covering(family, host, Rational(1, m) * remaining / static_cast<long>(host),
                                         sup_cofibre[k])
                         .pass;
        auto before = covered_count;
        auto d = greedy_disjointify(family, host, eps, &covered);
        for (auto j : d.kept) run.result.translates.push_back({static_cast<std::uint32_t>(k), centres[j]});
        covered_count += d.covered;
        fs.fraction_ok = at_least(covered_count - before, eps / m, remaining);
        fs.covered_after = covered_count;
        run.steps.push_back(fs);
    }
    run.result.covered = covered_count;
    return run;
}

} // namespace quasitiling_detail

inline Rational ow_lambda(const Rational& eps, int m, std::size_t n, std::size_t k) {
    Rational p = 1, q = 1 - eps / m;
    for (std::size_t i = 0; i < n - k + 1; ++i) p *= q;
    return std::min(Rational(1 - eps), Rational(1 - p));
}

/// A given by its fibres at the listed units.
inline Quasitiling ow_quasitile(const Window& w, const std::vector<UnitArrows>& a, const TileSequence& seq,
                                const OwOptions& options = {}) {
    const Rational& eps = seq.epsilon;
    if (!(eps > 0 && eps < frac(1, 2))) throw Error(ErrorKind::precondition, "quasitiling", "need 0 < eps < 1/2");
    auto tiles = seq.tiles();
    if (tiles.empty()) throw Error(ErrorKind::precondition, "quasitiling", "empty tile list");
    std::vector<std::size_t> sup_cofibre;
    for (const auto& t : tiles) sup_cofibre.push_back(invariance_constants(t, w).c2);

    auto runs = parallel_map<quasitiling_detail::FibreRun>(a.size(), [&](std::size_t i) {
        if (a[i].ranges.empty()) return quasitiling_detail::FibreRun{};
        return quasitiling_detail::run_fibre(w, a[i], tiles, eps, seq.m, sup_cofibre);
    });

    Quasitiling q;
    q.epsilon = eps;
    q.m = seq.m;
    q.radii = seq.radii;
    q.worst_invariance = 0;
    const std::size_t L = tiles.size();
    for (std::size_t step = 0; step < L; ++step) {
        StepRecord rec;
        rec.tile = static_cast<std::uint32_t>(L - 1 - step);
        rec.lambda = ow_lambda(eps, seq.m, L, L - step);
        rec.min_cover = 1;
        q.ledger.push_back(rec);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& run = runs[i];
        if (a[i].ranges.empty()) continue;
        if (q.fibres.empty() || run.invariance_defect > q.worst_invariance) {
            q.worst_invariance = run.invariance_defect;
            q.worst_unit = a[i].unit;
        }
        for (std::size_t step = 0; step < L; ++step) {
            const auto& fs = run.steps[step];
            auto& rec = q.ledger[step];
            rec.units_in_z += fs.in_z;
            Rational cover = frac(static_cast<long>(fs.covered_after), static_cast<long>(a[i].size()));
            rec.min_cover = std::min(rec.min_cover, cover);
            rec.lambda_ok = rec.lambda_ok && cover >= rec.lambda;
            if (fs.in_z) {
                rec.invariance_ok = rec.invariance_ok && fs.invariance_ok;
                rec.even_ok = rec.even_ok && fs.even_ok;
                rec.fraction_ok = rec.fraction_ok && fs.fraction_ok;
            }
        }
        q.fibres.push_back(run.result);
    }
    q.precondition_ok = q.ledger.empty() || q.ledger.front().invariance_ok;
    if (options.require_invariance && !q.precondition_ok)
        throw Error(ErrorKind::precondition, "quasitiling",
                    "A is not (T_L, eps^2/4)-invariant; worst fibre at unit " + std::to_string(q.worst_unit) +
                        " with defect " + to_string(q.worst_invariance));
    return q;
}

/// Fibres of Ball(R) at every unit with room for R plus the largest tile.
inline std::vector<UnitArrows> ball_fibres(const Window& w, const Rational& radius, const Rational& tile_radius) {
    std::vector<UnitArrows> out;
    auto a = CompactSet::ball(radius);
    for (auto u : w.valid_units(radius + tile_radius)) out.push_back(unit_arrows(w, u, a));
    return out;
}

struct FibreVerdict {
    std::uint32_t unit = 0;
    bool contained = true;
    bool disjoint = true;
    bool covers = true;
    Rational cover_fraction;
    Rational worst_hat;  ///< min over translates of |hat|/|T c|
};

struct QuasitilingReport {
    bool pass = true;
    std::vector<FibreVerdict> fibres;
    Rational min_cover = 1;
    Rational min_hat = 1;
    std::size_t translates = 0;
};

/// Per fibre: containment, eps-disjointness through explicit hat sets, and (1 - eps)-cover.
inline QuasitilingReport verify_quasitiling(const Quasitiling& q, const std::vector<UnitArrows>& a, const Window& w) {
    std::vector<CompactSet> tiles;
    for (const auto& r : q.radii) tiles.push_back(CompactSet::ball(r));
    QuasitilingReport rep;
    std::map<std::uint32_t, const FibreQuasitiling*> by_unit;
    for (const auto& f : q.fibres) by_unit[f.unit] = &f;
    auto verdicts = parallel_map<FibreVerdict>(a.size(), [&](std::size_t i) {
        FibreVerdict v;
        v.unit = a[i].unit;
        v.worst_hat = 1;
        if (a[i].ranges.empty()) {
            v.cover_fraction = 1;
            return v;
        }
        auto it = by_unit.find(a[i].unit);
        std::vector<char> claimed(a[i].size(), 0), seen(a[i].size(), 0);
        std::size_t covered = 0;
        if (it != by_unit.end()) {
            for (const auto& t : it->second->translates) {
                auto loc = localize(a[i], fibre_ranges(w, t.centre, tiles.at(t.tile)));
                if (!loc) {
                    v.contained = false;
                    continue;
                }
                std::size_t hat = 0;
                for (auto x : *loc) {
                    if (!claimed[x]) ++hat, claimed[x] = 1;
                    if (!seen[x]) ++covered, seen[x] = 1;
                }
                Rational r = frac(static_cast<long>(hat), static_cast<long>(loc->size()));
                v.worst_hat = std::min(v.worst_hat, r);
                if (r < 1 - q.epsilon) v.disjoint = false;
            }
        }
        v.cover_fraction = frac(static_cast<long>(covered), static_cast<long>(a[i].size()));
        v.covers = v.cover_fraction >= 1 - q.epsilon;
        return v;
    });
    for (auto& v : verdicts) {
        rep.pass = rep.pass && v.contained && v.disjoint && v.covers;
        rep.min_cover = std::min(rep.min_cover, v.cover_fraction);
        rep.min_hat = std::min(rep.min_hat, v.worst_hat);
        rep.fibres.push_back(std::move(v));
    }
    for (const auto& f : q.fibres) rep.translates += f.translates.size();
    return rep;
}

/**
 * Smallest radius R >= start (in steps of `step`) such that Ball(R) is
 * (C, tol)-invariant at each listed unit.
 */
inline Rational smallest_invariant_ball(const Window& w, const std::vector<std::uint32_t>& units, const CompactSet& c,
                                        const Rational& tol, Rational start, const Rational& step) {
    for (Rational r = start; r + c.margin() <= w.radius(); r += step) {
        bool ok = true;
        for (auto u : units) {
            if (!w.is_valid(u, r + c.margin())) {
                ok = false;
                break;
            }
            auto a = unit_arrows(w, u, CompactSet::ball(r));
            if (!at_least(inner_part(w, a, c).size(), 1 - tol, a.size())) {
                ok = false;
                break;
            }
        }
        if (ok) return r;
    }
    throw Error(ErrorKind::margin, "quasitiling", "window too small to find an invariant ball");
}

} // namespace hull
