#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "hull/calgebra.hpp"
#include "hull/patches.hpp"
#include "hull/quasitiling.hpp"
#include "hull/towers.hpp"
#include "hull/zstable.hpp"
#include "support.hpp"

using namespace hull;
using hull::testing::fixture;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double s) {
    std::ostringstream os;
    os.precision(3);
    os << s << "s";
    return os.str();
}

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::vector<Rational> letter_indicator(const Window& w, std::uint32_t proto) {
    std::vector<Rational> f(w.size(), 0);
    for (std::uint32_t x = 0; x < w.size(); ++x) f[x] = w.proto(x) == proto ? 1 : 0;
    return f;
}

// 1 ---------------------------------------------------------------------------

Verdict fixture_integrity() {
    Verdict v;
    std::string timings;
    for (const char* name : {"sq", "pd", "chair"}) {
        auto t0 = Clock::now();
        auto rule = fixture(name);
        auto rep = check_rule(*rule);
        double s = seconds_since(t0);
        v.require(rep.ok, std::string(name) + " fails the consistency check");
        v.require(s < 1, std::string(name) + " took " + fmt(s));
        timings += std::string(timings.empty() ? "" : ", ") + name + " " + fmt(s);
    }
    if (v.pass) v.detail = timings;
    return v;
}

// 2 ---------------------------------------------------------------------------

Verdict invariance_sandwich() {
    Verdict v;
    std::mt19937_64 rng(20240611);
    std::size_t total = 0;
    struct Case {
        const char* name;
        Rational window;
    };
    for (const auto& c : {Case{"sq", 20}, Case{"pd", 40}, Case{"chair", 24}}) {
        auto rule = fixture(c.name);
        auto w = sample_window(rule, 0, c.window);
        std::uniform_int_distribution<int> da(2, 16), dc(1, 6);
        std::map<Rational, InvarianceConstants> consts;
        for (int i = 0; i < 200; ++i) {
            Rational ra = frac(da(rng), 2), rc = frac(dc(rng), 2);
            auto units = w.valid_units(ra + rc + 1);
            std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
            auto u = units[pick(rng)];
            auto cset = CompactSet::ball(rc);
            auto it = consts.find(rc);
            if (it == consts.end()) it = consts.emplace(rc, invariance_constants(cset, w)).first;
            const auto& k = it->second;
            auto a = unit_arrows(w, u, CompactSet::ball(ra));
            std::size_t outer = outer_count(w, a, cset);
            std::size_t bad = a.size() - inner_part(w, a, cset).size();
            bool ok = Rational(static_cast<long>(outer)) / static_cast<long>(k.c1) <= static_cast<long>(bad) && bad <= k.c2 * outer;
            v.require(ok, std::string(c.name) + ": sandwich fails at R_A=" + to_string(ra) + ", R_C=" + to_string(rc));
            ++total;
        }
    }
    if (v.pass) v.detail = std::to_string(total) + " triples over sq, pd, chair";
    return v;
}

// 3 ---------------------------------------------------------------------------

Verdict translate_covering_bounds() {
    Verdict v;
    std::size_t fibres = 0;
    Rational eps = frac(1, 4);
    struct Case {
        const char* name;
        Rational window, c_radius, a_radius;
    };
    for (const auto& c : {Case{"pd", 120, frac(5, 2), 40}, Case{"chair", 40, frac(3, 2), 26}}) {
        auto rule = fixture(c.name);
        auto w = sample_window(rule, 0, c.window);
        auto cset = CompactSet::ball(c.c_radius);
        auto k = invariance_constants(cset, w);
        auto units = w.valid_units(c.a_radius + c.c_radius + 1);
        for (auto u : units) {
            auto a = unit_arrows(w, u, CompactSet::ball(c.a_radius));
            auto t = translate_covering(w, a, cset, eps, k);
            if (t.skipped) continue;
            ++fibres;
            v.require(t.check.members_inside, std::string(c.name) + ": translate leaves Au at unit " + std::to_string(u));
            v.require(t.check.max_multiplicity <= t.multiplicity,
                      std::string(c.name) + ": multiplicity " + std::to_string(t.check.max_multiplicity) + " > " +
                          std::to_string(t.multiplicity));
            v.require(t.lambda == 1 - t.delta, std::string(c.name) + ": lambda != 1 - delta");
            v.require(t.check.pass, std::string(c.name) + ": mass bound fails at unit " + std::to_string(u));
        }
    }
    v.require(fibres > 0, "no fibre tested");
    if (v.pass) v.detail = std::to_string(fibres) + " fibres over pd, chair";
    return v;
}

// 4 ---------------------------------------------------------------------------

struct OwRun {
    bool pass = false;
    Rational a_radius;
    std::size_t fibres = 0;
    Rational min_cover;
    double seconds = 0;
    std::string failure;
};

OwRun ow_end_to_end(const char* name, const Rational& eps, const Rational& window, const Rational& search_from) {
    OwRun run;
    auto t0 = Clock::now();
    try {
        auto rule = fixture(name);
        auto w = sample_window(rule, 0, window);
        auto seq = TileSequence::from_radii({Rational(1), Rational(2)}, eps, choose_m(*rule));
        auto tl = CompactSet::ball(2);
        Rational r = smallest_invariant_ball(w, {*w.origin()}, tl, eps * eps / 4, search_from, frac(1, 2));
        for (;; r += frac(1, 2)) {
            auto units = w.valid_units(r + 3);
            if (units.empty()) throw Error(ErrorKind::margin, "acceptance", "window too small for Ball(" + to_string(r) + ")");
            auto a = parallel_map<UnitArrows>(units.size(), [&](std::size_t i) { return unit_arrows(w, units[i], CompactSet::ball(r)); });
            try {
                auto q = ow_quasitile(w, a, seq);
                auto rep = verify_quasitiling(q, a, w);
                run.pass = rep.pass;
                run.fibres = a.size();
                run.min_cover = rep.min_cover;
                run.a_radius = r;
                break;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::precondition) throw;
            }
        }
    } catch (const Error& e) {
        run.failure = e.what();
    }
    run.seconds = seconds_since(t0);
    return run;
}

Verdict ow_quasitiling() {
    Verdict v;
    struct Case {
        const char* name;
        Rational eps, window, from;
    };
    std::string summary;
    for (const auto& c : {Case{"pd", frac(1, 4), 200, 2}, Case{"pd", frac(1, 8), 300, 200}, Case{"sq", frac(1, 4), 166, 150},
                          Case{"sq", frac(1, 8), 655, 640}}) {
        auto r = ow_end_to_end(c.name, c.eps, c.window, c.from);
        std::string tag = std::string(c.name) + " eps=" + to_string(c.eps);
        v.require(r.failure.empty(), tag + ": " + r.failure);
        v.require(r.pass, tag + ": verifier rejects the quasitiling");
        v.require(r.seconds < 300, tag + ": took " + fmt(r.seconds));
        summary += (summary.empty() ? "" : "; ") + tag + " A=Ball(" + to_string(r.a_radius) + ") " + std::to_string(r.fibres) +
                   " fibres cover>=" + to_string(r.min_cover) + " " + fmt(r.seconds);
    }
    if (v.pass) v.detail = summary;
    return v;
}

// 5 ---------------------------------------------------------------------------

Verdict tower_machinery() {
    Verdict v;
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto other = sample_window(pd, 1, 11, 250);
    std::size_t units = 0;
    for (int k = 1; k <= 3; ++k) {
        std::string tag = "k=" + std::to_string(k);
        auto c = supertile_castle(w, k, 12);
        auto cert = certify_castle(c, other);
        v.require(cert.partition, tag + ": partition certificate fails");
        units += cert.checked;

        Rational eps = frac(1, 4);
        auto s = split_for_diameter(c, eps, w);
        auto rep = compare_refinement(c, s, eps, w);
        v.require(rep.same_levels && rep.same_fibres, tag + ": split changes shape fibres");
        v.require(rep.containment && meets_containment(s, eps), tag + ": split misses the containment criterion");

        auto el = castle_to_elementary(c, *pd);
        v.require(certify_elementary(el, w).ok(), tag + ": elementary subgroupoid certificate fails");
        v.require(same_castle(elementary_to_castle(el, w), c), tag + ": round trip changes the castle");
        for (Rational r : {frac(1, 2), frac(3, 2), frac(5, 2)}) {
            auto t = invariance_transfer_check(c, el, CompactSet::ball(r), w);
            v.require(t.all_equal && t.pairs > 0, tag + ": transfer ratios differ for Ball(" + to_string(r) + ")");
        }
    }
    if (v.pass) v.detail = "k=1..3, " + std::to_string(units) + " units certified";
    return v;
}

// 6 ---------------------------------------------------------------------------

std::vector<EFunction> generators(const std::shared_ptr<const SubstitutionRule>& rule, const Rational& radius) {
    std::vector<EFunction> out;
    for (const auto& pc : enumerate_patch_classes(rule, radius).classes)
        for (std::uint32_t s = 0; s < pc.tiles.size(); ++s)
            for (std::uint32_t t = 0; t < pc.tiles.size(); ++t) out.push_back({pc, s, t});
    return out;
}

Verdict operator_layer() {
    Verdict v;
    std::size_t profiles = 0, pairs = 0, expectations = 0;
    std::vector<Rational> ns;
    for (int n = 1; n <= 14; ++n) ns.push_back(n);
    std::mt19937_64 rng(7);
    for (const char* name : {"pd", "chair"}) {
        auto rule = fixture(name);
        auto w = sample_window(rule, 0, Rational(name[0] == 'p' ? 40 : 24));

        for (Rational r : {Rational(1), Rational(2)}) {
            auto gens = generators(rule, r);
            for (const auto& e : gens) {
                auto prof = qd_commutator_profile(e, 3, ns, w);
                ++profiles;
                v.require(prof.zero_past_threshold, std::string(name) + ": commutator nonzero past the threshold");
                v.require(prof.rows.back().n >= prof.threshold, std::string(name) + ": profile stops before the threshold");
            }
        }

        auto gens = generators(rule, 1);
        std::uniform_int_distribution<std::size_t> pick(0, gens.size() - 1);
        for (int i = 0; i < 300; ++i) {
            const auto& e1 = gens[pick(rng)];
            const auto& e2 = gens[pick(rng)];
            auto rep = check_relations(e1, e2, w);
            ++pairs;
            v.require(rep.adjoint_ok, std::string(name) + ": adjoint relation fails");
            v.require(rep.product_ok, std::string(name) + ": product relation fails");
            v.require(rep.partial_isometry, std::string(name) + ": generator is not a partial isometry");
        }

        auto d1 = qd_projection(w, 6);
        auto d2 = diagonal_operator(letter_indicator(w, 0));
        for (int i = 0; i < 40; ++i) {
            auto x = represent(gens[pick(rng)], w).op;
            auto y = represent(gens[pick(rng)], w).op;
            for (const auto& z : {x, x + y.scaled(frac(1, 3)), x * y + y.adjoint()}) {
                auto r = check_expectation(z, d1, d2);
                ++expectations;
                v.require(r.idempotent && r.bimodule && r.faithful && r.unital_on_diagonals,
                          std::string(name) + ": conditional expectation check fails");
            }
        }
    }
    if (v.pass)
        v.detail = std::to_string(profiles) + " qd profiles, " + std::to_string(pairs) + " relation pairs, " +
                   std::to_string(expectations) + " expectation checks";
    return v;
}

// 7 ---------------------------------------------------------------------------

Verdict zstable_construction() {
    Verdict v;
    auto t0 = Clock::now();
    try {
        auto pd = fixture("pd");
        auto w = sample_window(pd, 0, 14, 900);
        auto castle = supertile_castle(w, 6, 200);
        EmbeddingConfig cfg;
        cfg.n = 2;
        cfg.q = 4;
        cfg.k_radius = frac(3, 2);
        cfg.tile_radii = {frac(27, 2)};
        cfg.cover_radius = 14;
        cfg.upsilon = {letter_indicator(w, pd->index_of("b"))};
        std::vector<Rational> a(w.size(), 1);
        auto run = run_zstable(castle, cfg, a, w);
        for (const char* entry : {"matrix_units", "order_zero", "shell_drift", "commutator_k", "coverage", "witness"}) {
            const auto& e = run.ledger.at(entry);
            v.require(e.pass, std::string(entry) + ": " + e.measured + " vs " + e.bound + " " + e.detail);
        }
        v.require(run.ledger.witness && run.ledger.witness->exact, "witness is not exact");
        double s = seconds_since(t0);
        v.require(s < 900, "pipeline took " + fmt(s));
        if (v.pass)
            v.detail = "window radius 900, ||[K, phi]|| = " + run.ledger.at("commutator_k").measured + " <= " +
                       run.ledger.at("commutator_k").bound + ", " + run.ledger.at("coverage").measured + ", " + fmt(s);
    } catch (const Error& e) {
        v.require(false, e.what());
    }
    return v;
}

// 8 ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Verdict determinism() {
    Verdict v;
    std::string fx = std::string(HULL_FIXTURES) + "/";
    std::vector<std::pair<std::string, std::string>> runs{
        {"quasitile", "quasitile " + fx + "pd.json --N 160 --eps 1/4"},
        {"invariance", "invariance " + fx + "chair.json --N 24 --samples 200"},
        {"zstable", "zstable " + fx + "pd.json --N 900 --level 14 --k 6 --upsilon b"},
    };
    for (const auto& [tag, args] : runs) {
        std::string first;
        for (int threads : {1, 4}) {
            std::string path = "acceptance_" + tag + "_" + std::to_string(threads) + ".json";
            std::string cmd = "HULL_THREADS=" + std::to_string(threads) + " " + std::string(HULL_CLI) + " " + args + " -o " + path;
            int rc = std::system(cmd.c_str());
            v.require(rc == 0, tag + ": exit status " + std::to_string(rc));
            auto text = slurp(path);
            std::remove(path.c_str());
            v.require(!text.empty(), tag + ": empty report");
            if (threads == 1) first = text;
            else v.require(text == first, tag + ": reports differ between 1 and 4 threads");
        }
    }
    if (v.pass) v.detail = "quasitile, invariance, zstable reports identical at 1 and 4 threads";
    return v;
}

} // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"fixture integrity", fixture_integrity},
        {"invariance sandwich", invariance_sandwich},
        {"translate covering", translate_covering_bounds},
        {"OW quasitiling end to end", ow_quasitiling},
        {"tower machinery", tower_machinery},
        {"operator layer", operator_layer},
        {"Z-stability construction", zstable_construction},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failed += !v.pass;
        std::cout << "criterion " << i + 1 << " [" << (v.pass ? "PASS" : "FAIL") << "] " << criteria[i].first << ": " << v.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
