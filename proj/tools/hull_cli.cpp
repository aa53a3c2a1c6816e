#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hull/calgebra.hpp"
#include "hull/metric.hpp"
#include "hull/patches.hpp"
#include "hull/quasitiling.hpp"
#include "hull/towers.hpp"
#include "hull/zstable.hpp"

using namespace hull;
using nlohmann::json;

namespace {

enum Exit : int { pass = 0, verified_fail = 1, precondition = 2 };

struct RunConfig {
    std::string rule_path;
    std::string out;
    std::string format = "csv";
    std::uint32_t seed = 0;
    int level = -1;
    std::string window_radius = "40";
};

std::shared_ptr<const SubstitutionRule> load(const RunConfig& cfg) {
    return std::make_shared<const SubstitutionRule>(load_rule(cfg.rule_path));
}

Window window_for(const std::shared_ptr<const SubstitutionRule>& rule, const RunConfig& cfg) {
    Rational r = parse_rational(cfg.window_radius);
    if (r <= 0) throw Error(ErrorKind::precondition, "cli", "window radius must be positive");
    return cfg.level >= 0 ? sample_window(rule, cfg.seed, cfg.level, r) : sample_window(rule, cfg.seed, r);
}

std::vector<Rational> parse_list(const std::string& text) {
    std::vector<Rational> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_rational(item));
    if (out.empty()) throw Error(ErrorKind::precondition, "cli", "empty list '" + text + "'");
    return out;
}

/// "a..b" (integer steps) or a comma list.
std::vector<Rational> parse_range(const std::string& text) {
    auto dots = text.find("..");
    if (dots == std::string::npos) return parse_list(text);
    Rational lo = parse_rational(text.substr(0, dots)), hi = parse_rational(text.substr(dots + 2));
    if (hi < lo) throw Error(ErrorKind::precondition, "cli", "empty range '" + text + "'");
    std::vector<Rational> out;
    for (Rational x = lo; x <= hi; x += 1) out.push_back(x);
    return out;
}

void emit(const RunConfig& cfg, const std::string& text) {
    if (cfg.out.empty() || cfg.out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw Error(ErrorKind::precondition, "cli", "cannot write " + cfg.out);
    f << text;
}

void emit(const RunConfig& cfg, const json& j) { emit(cfg, j.dump(2) + "\n"); }

json rational_list(const std::vector<Rational>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(to_string(x));
    return out;
}

// ---------------------------------------------------------------------------

int cmd_check_rule(const RunConfig& cfg) {
    auto rule = load_rule(cfg.rule_path);
    auto rep = check_rule(rule);
    json j{{"command", "check-rule"}, {"rule", rule.name}, {"pass", rep.ok}, {"problems", rep.problems}};
    j["measures"] = json::array();
    for (std::size_t p = 0; p < rep.measures.size(); ++p)
        j["measures"].push_back({{"prototile", rule.prototiles[p].label},
                                 {"inflated", to_string(rep.measures[p].first)},
                                 {"children", to_string(rep.measures[p].second)}});
    emit(cfg, j);
    return rep.ok ? pass : verified_fail;
}

int cmd_enumerate(const RunConfig& cfg, const std::string& radius) {
    auto rule = load(cfg);
    Rational r = parse_rational(radius);
    if (r < 0) throw Error(ErrorKind::precondition, "cli", "patch radius must be non-negative");
    auto en = enumerate_patch_classes(rule, r);
    json j{{"command", "enumerate"}, {"rule", rule->name}, {"radius", to_string(r)}, {"level", en.level}, {"count", en.classes.size()}};
    j["classes"] = json::array();
    for (const auto& pc : en.classes) j["classes"].push_back(patch_class_to_json(*rule, pc));
    emit(cfg, j);
    return pass;
}

int cmd_metric(const RunConfig& cfg, std::uint32_t other_seed, const std::string& shift) {
    auto rule = load(cfg);
    auto w1 = window_for(rule, cfg);
    RunConfig c2 = cfg;
    c2.seed = other_seed;
    auto w2 = window_for(rule, c2);
    auto v = parse_list(shift);
    if (!shift.empty() && !(v.size() == 1 || v.size() == 2)) throw Error(ErrorKind::precondition, "cli", "shift needs 1 or 2 coordinates");
    Vec s{v[0], v.size() > 1 ? v[1] : Rational(0)};
    if (s.x != 0 || s.y != 0) w2 = translated(w2, s);
    auto b = tiling_metric(w1, w2);
    emit(cfg, json{{"command", "metric"}, {"rule", rule->name}, {"seeds", {cfg.seed, other_seed}}, {"shift", rational_list({s.x, s.y})},
                   {"lo", to_string(b.lo)}, {"hi", to_string(b.hi)}, {"certified", b.certified}});
    return pass;
}

/// Random (Ball(R_A), Ball(R_C), u) triples against c1^-1 |CAu \ Au| <= |{a : Ca not in Au}| <= c2 |CAu \ Au|.
int cmd_invariance(const RunConfig& cfg, std::size_t samples, const std::string& max_a, const std::string& max_c) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    Rational ra_max = parse_rational(max_a), rc_max = parse_rational(max_c);
    std::mt19937_64 rng(cfg.seed);
    auto draw_half = [&](const Rational& lo, const Rational& hi) {
        Rational span = (hi - lo) * 2;
        long steps = hull::floor(span).get_si();
        std::uniform_int_distribution<long> d(0, std::max(0L, steps));
        return Rational(lo + frac(d(rng), 2));
    };
    struct Triple {
        Rational ra, rc;
        std::uint32_t unit;
    };
    std::vector<Triple> triples;
    std::map<Rational, InvarianceConstants> constants;
    for (std::size_t i = 0; i < samples; ++i) {
        Rational ra = draw_half(1, ra_max), rc = draw_half(frac(1, 2), rc_max);
        auto units = w.valid_units(ra + rc + 1);
        if (units.empty()) throw Error(ErrorKind::margin, "groupoid", "window too small for R_A = " + to_string(ra) + ", R_C = " + to_string(rc));
        std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
        triples.push_back({ra, rc, units[pick(rng)]});
        constants.emplace(rc, InvarianceConstants{});
    }
    for (auto& [rc, k] : constants) k = invariance_constants(CompactSet::ball(rc), w);
    struct Row {
        std::size_t outer = 0, bad = 0, size = 0;
        bool ok = false;
    };
    auto rows = parallel_map<Row>(triples.size(), [&](std::size_t i) {
        const auto& t = triples[i];
        auto c = CompactSet::ball(t.rc);
        auto a = unit_arrows(w, t.unit, CompactSet::ball(t.ra));
        Row r;
        r.size = a.size();
        r.outer = outer_count(w, a, c);
        r.bad = a.size() - inner_part(w, a, c).size();
        const auto& k = constants.at(t.rc);
        r.ok = Rational(static_cast<long>(r.outer)) / static_cast<long>(k.c1) <= static_cast<long>(r.bad) && r.bad <= k.c2 * r.outer;
        return r;
    });
    bool ok = true;
    json j{{"command", "invariance"}, {"rule", rule->name}, {"samples", samples}};
    j["triples"] = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ok = ok && rows[i].ok;
        const auto& k = constants.at(triples[i].rc);
        j["triples"].push_back({{"R_A", to_string(triples[i].ra)}, {"R_C", to_string(triples[i].rc)}, {"unit", triples[i].unit},
                                {"size", rows[i].size}, {"outer", rows[i].outer}, {"bad", rows[i].bad}, {"c1", k.c1}, {"c2", k.c2},
                                {"pass", rows[i].ok}});
    }
    j["pass"] = ok;
    emit(cfg, j);
    return ok ? pass : verified_fail;
}

int cmd_quasitile(const RunConfig& cfg, const std::string& eps_text, const std::string& radii_text, const std::string& a_text,
                  const std::string& a_from, std::size_t units_cap, bool no_invariance) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    Rational eps = parse_rational(eps_text);
    auto radii = parse_list(radii_text);
    auto seq = TileSequence::from_radii(radii, eps, choose_m(*rule));
    auto tl = CompactSet::ball(radii.back());
    Rational ra;
    std::vector<std::uint32_t> units;
    if (a_text == "auto") {
        auto probe = w.origin() ? std::vector<std::uint32_t>{*w.origin()} : w.valid_units(0);
        if (probe.empty()) throw Error(ErrorKind::margin, "quasitiling", "window has no origin");
        Rational start = a_from.empty() ? radii.back() : parse_rational(a_from);
        ra = smallest_invariant_ball(w, {probe.front()}, tl, eps * eps / 4, start, frac(1, 2));
    } else {
        ra = parse_rational(a_text);
    }
    units = w.valid_units(ra + radii.back() + 1);
    if (units.empty()) throw Error(ErrorKind::margin, "quasitiling", "no unit has room for Ball(" + to_string(ra) + ")");
    if (units_cap > 0 && units.size() > units_cap) {
        std::vector<std::uint32_t> spread;
        for (std::size_t i = 0; i < units_cap; ++i) spread.push_back(units[i * units.size() / units_cap]);
        units = std::move(spread);
    }
    auto a = parallel_map<UnitArrows>(units.size(), [&](std::size_t i) { return unit_arrows(w, units[i], CompactSet::ball(ra)); });
    OwOptions opt;
    opt.require_invariance = !no_invariance;
    auto q = ow_quasitile(w, a, seq, opt);
    auto rep = verify_quasitiling(q, a, w);
    json j{{"command", "quasitile"}, {"rule", rule->name}, {"epsilon", to_string(eps)}, {"m", q.m}, {"radii", rational_list(radii)},
           {"A_radius", to_string(ra)}, {"fibres", a.size()}, {"precondition_ok", q.precondition_ok},
           {"worst_invariance", to_string(q.worst_invariance)}, {"pass", rep.pass}, {"min_cover", to_string(rep.min_cover)},
           {"min_hat", to_string(rep.min_hat)}, {"translates", rep.translates}};
    j["steps"] = json::array();
    for (const auto& s : q.ledger)
        j["steps"].push_back({{"tile", s.tile}, {"lambda", to_string(s.lambda)}, {"units_in_z", s.units_in_z},
                              {"min_cover", to_string(s.min_cover)}, {"lambda_ok", s.lambda_ok}, {"invariance_ok", s.invariance_ok},
                              {"even_ok", s.even_ok}, {"fraction_ok", s.fraction_ok}});
    j["verdicts"] = json::array();
    for (const auto& v : rep.fibres)
        j["verdicts"].push_back({{"unit", v.unit}, {"contained", v.contained}, {"disjoint", v.disjoint}, {"covers", v.covers},
                                 {"cover_fraction", to_string(v.cover_fraction)}, {"worst_hat", to_string(v.worst_hat)}});
    emit(cfg, j);
    return rep.pass ? pass : verified_fail;
}

int cmd_towers(const RunConfig& cfg, int k, const std::string& cap, const std::string& eps_text) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    auto c = supertile_castle(w, k, parse_rational(cap));
    json j{{"command", "towers"}, {"rule", rule->name}, {"k", k}};
    auto cert = certify_castle(c, w);
    bool ok = cert.partition;
    j["certificate"] = {{"partition", cert.partition}, {"checked", cert.checked}, {"uncovered", cert.uncovered},
                        {"overlapped", cert.overlapped}, {"margin", to_string(cert.margin)}};
    if (!eps_text.empty()) {
        Rational eps = parse_rational(eps_text);
        auto s = split_for_diameter(c, eps, w);
        auto rep = compare_refinement(c, s, eps, w);
        ok = ok && rep.containment && rep.same_levels && rep.same_fibres;
        j["split"] = {{"epsilon", to_string(eps)}, {"base_radius", to_string(s.base_radius)}, {"containment", rep.containment},
                      {"same_levels", rep.same_levels}, {"same_fibres", rep.same_fibres}, {"checked", rep.checked}};
        c = std::move(s);
    }
    j["castle"] = castle_to_json(c, *rule);
    j["pass"] = ok;
    emit(cfg, j);
    return ok ? pass : verified_fail;
}

int cmd_suzuki(const RunConfig& cfg, int k, const std::string& cap, const std::vector<Rational>& radii) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    auto c = supertile_castle(w, k, parse_rational(cap));
    auto el = castle_to_elementary(c, *rule);
    auto cert = certify_elementary(el, w);
    auto back = elementary_to_castle(el, w);
    bool same = same_castle(back, c);
    json j{{"command", "suzuki-roundtrip"}, {"rule", rule->name}, {"k", k}, {"blocks", el.blocks.size()}, {"same_castle", same},
           {"certificate", {{"partition", cert.partition}, {"unique_arrows", cert.unique_arrows}, {"fibre_sizes", cert.fibre_sizes},
                            {"checked", cert.checked}, {"failure", cert.failure}}}};
    bool ok = same && cert.ok();
    j["transfer"] = json::array();
    for (const auto& r : radii) {
        auto t = invariance_transfer_check(c, el, CompactSet::ball(r), w);
        ok = ok && t.all_equal;
        j["transfer"].push_back({{"C_radius", to_string(r)}, {"all_equal", t.all_equal}, {"pairs", t.pairs}});
    }
    j["pass"] = ok;
    emit(cfg, j);
    return ok ? pass : verified_fail;
}

struct ZstableArgs {
    int k = 6;
    std::string cap = "200";
    int n = 2;
    int q = 4;
    std::string k_radius = "3/2";
    std::string tiles = "27/2";
    std::string cover = "14";
    std::string eps = "1";
    std::string upsilon = "";
    std::string a_letter = "";
    std::string embedding_out;
    bool strict = false;
};

ZstableRun zstable_run(const RunConfig& cfg, const ZstableArgs& z, const std::shared_ptr<const SubstitutionRule>& rule, const Window& w) {
    auto castle = z.k == 0 ? identity_castle(*rule) : supertile_castle(w, z.k, parse_rational(z.cap));
    EmbeddingConfig ec;
    ec.n = z.n;
    ec.q = z.q;
    ec.k_radius = parse_rational(z.k_radius);
    ec.tile_radii = parse_list(z.tiles);
    ec.cover_radius = parse_rational(z.cover);
    ec.epsilon = parse_rational(z.eps);
    ec.raise_parameters = !z.strict;
    auto indicator = [&](const std::string& label) {
        auto p = rule->index_of(label);
        std::vector<Rational> f(w.size(), 0);
        for (std::uint32_t x = 0; x < w.size(); ++x) f[x] = w.proto(x) == p ? 1 : 0;
        return f;
    };
    std::stringstream ss(z.upsilon);
    std::string label;
    while (std::getline(ss, label, ','))
        if (!label.empty()) ec.upsilon.push_back(indicator(label));
    auto a = z.a_letter.empty() ? std::vector<Rational>(w.size(), 1) : indicator(z.a_letter);
    (void)cfg;
    return run_zstable(castle, ec, a, w);
}

int cmd_zstable(const RunConfig& cfg, const ZstableArgs& z) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    auto run = zstable_run(cfg, z, rule, w);
    json j{{"command", "zstable"}, {"rule", rule->name}, {"k", z.k}, {"window_tiles", w.size()}};
    j["ledger"] = ledger_to_json(run.ledger);
    j["quasitiling"] = level_quasitiling_to_json(run.lq);
    j["pass"] = run.ledger.pass();
    emit(cfg, j);
    if (!z.embedding_out.empty()) {
        RunConfig e = cfg;
        e.out = z.embedding_out;
        emit(e, embedding_to_json(run.embedding));
    }
    return run.ledger.pass() ? pass : verified_fail;
}

/// e(P, src, rng) from a word (1D) or from the patch around the window origin.
EFunction generator(const Window& w, const std::string& word, std::uint32_t src, std::uint32_t rng, const Rational& patch_radius) {
    const auto& rule = w.rule();
    if (!word.empty()) {
        if (rule.dim != 1) throw Error(ErrorKind::precondition, "cli", "--word needs a one-dimensional rule");
        if (src >= word.size() || rng >= word.size()) throw Error(ErrorKind::precondition, "cli", "tile index outside the word");
        return {word_patch(rule, word, 0), word_tile(rule, word, 0, src), word_tile(rule, word, 0, rng)};
    }
    if (!w.origin()) throw Error(ErrorKind::margin, "cli", "window has no origin");
    auto p = patch_around(w, *w.origin(), patch_radius);
    if (src >= p.tiles.size() || rng >= p.tiles.size())
        throw Error(ErrorKind::precondition, "cli", "patch has " + std::to_string(p.tiles.size()) + " tiles");
    return {p, src, rng};
}

std::string default_word(const SubstitutionRule& rule) {
    if (rule.dim != 1) return "";
    std::string w;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, rule.prototiles.size()); ++i) w += rule.prototiles[i].label;
    return w;
}

int cmd_qd_profile(const RunConfig& cfg, const std::string& m_text, const std::string& ns_text, std::string word, std::uint32_t src,
                   std::uint32_t rng, const std::string& patch_radius) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    if (word.empty()) word = default_word(*rule);
    auto e = generator(w, word, src, rng, parse_rational(patch_radius));
    auto prof = qd_commutator_profile(e, parse_rational(m_text), parse_range(ns_text), w);
    if (cfg.format == "csv") {
        std::string out = "n,sup_norm2,crossing\n";
        for (const auto& r : prof.rows) out += to_string(r.n) + "," + to_string(r.sup_norm2) + "," + std::to_string(r.crossing) + "\n";
        emit(cfg, out);
    } else {
        json j{{"command", "qd-profile"}, {"rule", rule->name}, {"m", to_string(prof.m)}, {"shift", to_string(prof.shift)},
               {"safety", to_string(prof.safety)}, {"threshold", to_string(prof.threshold)},
               {"zero_past_threshold", prof.zero_past_threshold}};
        j["rows"] = json::array();
        for (const auto& r : prof.rows)
            j["rows"].push_back({{"n", to_string(r.n)}, {"sup_norm2", to_string(r.sup_norm2)}, {"crossing", r.crossing}});
        emit(cfg, j);
    }
    return prof.zero_past_threshold ? pass : verified_fail;
}

// ---------------------------------------------------------------------------
// SVG

struct Canvas {
    double scale = 24;
    double minx = 0, miny = 0, maxx = 0, maxy = 0;
    std::vector<std::string> shapes;

    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill, double opacity) {
        std::ostringstream os;
        os.precision(6);
        os << "<polygon points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            os << (i ? " " : "") << pts[i].first * scale << "," << -pts[i].second * scale;
            minx = std::min(minx, pts[i].first), maxx = std::max(maxx, pts[i].first);
            miny = std::min(miny, pts[i].second), maxy = std::max(maxy, pts[i].second);
        }
        os << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\" stroke=\"#222\" stroke-width=\"0.5\"/>";
        shapes.push_back(os.str());
    }

    std::string svg() const {
        std::ostringstream os;
        os.precision(6);
        double pad = 1;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << (minx - pad) * scale << " " << -(maxy + pad) * scale << " "
           << (maxx - minx + 2 * pad) * scale << " " << (maxy - miny + 2 * pad) * scale << "\">\n";
        for (const auto& s : shapes) os << s << "\n";
        os << "</svg>\n";
        return os.str();
    }
};

const char* palette(std::size_t i) {
    static const char* colours[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
    return colours[i % 10];
}

std::vector<std::pair<double, double>> outline(const Window& w, std::uint32_t x) {
    auto s = w.support(x);
    std::vector<std::pair<double, double>> pts;
    if (w.dim() == 1) {
        double a = s.vertices[0].x.get_d(), b = s.vertices[1].x.get_d();
        pts = {{a, 0}, {b, 0}, {b, 1}, {a, 1}};
    } else {
        for (const auto& v : s.vertices) pts.emplace_back(v.x.get_d(), v.y.get_d());
    }
    return pts;
}

int cmd_render(const RunConfig& cfg, const std::string& mode, const std::string& radius, const ZstableArgs& z) {
    auto rule = load(cfg);
    auto w = window_for(rule, cfg);
    Rational r = parse_rational(radius);
    if (!w.origin()) throw Error(ErrorKind::margin, "cli", "window has no origin");
    std::vector<std::uint32_t> shown;
    w.visit_ball(w.ipuncture(*w.origin()), r, [&](std::uint32_t x) { shown.push_back(x); });
    std::sort(shown.begin(), shown.end());
    Canvas canvas;
    if (mode == "patch") {
        for (auto x : shown) canvas.polygon(outline(w, x), palette(w.proto(x)), 1);
    } else if (mode == "towers") {
        auto c = supertile_castle(w, z.k, parse_rational(z.cap));
        auto m = towers_detail::memberships(w, c, shown);
        for (std::size_t i = 0; i < shown.size(); ++i) {
            double shade = m[i].tower < 0 ? 0.15 : 0.35 + 0.65 * (m[i].level + 1) / static_cast<double>(c.towers[m[i].tower].levels.size());
            canvas.polygon(outline(w, shown[i]), m[i].tower < 0 ? "#cccccc" : palette(static_cast<std::size_t>(m[i].tower)), shade);
        }
    } else if (mode == "shells") {
        auto run = zstable_run(cfg, z, rule, w);
        std::map<std::uint32_t, std::pair<int, int>> weight;  // puncture -> (part, q)
        for (const auto& tt : run.lq.towers)
            for (auto b : tt.bases) {
                auto pts = zstable_detail::fibre(w, tt.offsets, b);
                for (const auto& c : tt.copies)
                    if (c.part >= 0)
                        for (const auto& [t, s] : c.shells) weight[pts[t]] = {c.part, s};
            }
        for (auto x : shown) {
            auto it = weight.find(x);
            if (it == weight.end()) canvas.polygon(outline(w, x), "#ffffff", 1);
            else canvas.polygon(outline(w, x), palette(static_cast<std::size_t>(it->second.first)), static_cast<double>(it->second.second) / run.lq.q);
        }
    } else {
        throw Error(ErrorKind::precondition, "cli", "unknown render mode '" + mode + "'");
    }
    emit(cfg, canvas.svg());
    return pass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Substitution tiling hulls, groupoids, quasitilings, towers and matrix embeddings"};
    app.require_subcommand(1);
    RunConfig cfg;
    auto common = [&](CLI::App* sub, bool windowed) {
        sub->add_option("rule", cfg.rule_path, "rule JSON")->required();
        sub->add_option("-o,--out", cfg.out, "output path (default stdout)");
        if (windowed) {
            sub->add_option("--seed", cfg.seed, "seed prototile of the sampled window");
            sub->add_option("--level", cfg.level, "substitution level of the window (default: smallest covering)");
            sub->add_option("--N", cfg.window_radius, "window radius");
        }
    };

    auto* check = app.add_subcommand("check-rule", "exact substitution consistency");
    common(check, false);

    std::string enum_radius = "1";
    auto* enumerate = app.add_subcommand("enumerate", "R-patch classes and stabilization level");
    common(enumerate, false);
    enumerate->add_option("--R", enum_radius, "patch radius");

    std::uint32_t other_seed = 0;
    std::string shift = "0";
    auto* metric = app.add_subcommand("metric", "tiling metric bracket between two windows");
    common(metric, true);
    metric->add_option("--other-seed", other_seed, "seed of the second window");
    metric->add_option("--shift", shift, "translation of the second window, x[,y]");

    std::size_t samples = 200;
    std::string max_a = "8", max_c = "3";
    auto* invariance = app.add_subcommand("invariance", "sandwich inequality on random (A, C, u) triples");
    common(invariance, true);
    invariance->add_option("--samples", samples, "number of triples");
    invariance->add_option("--max-A", max_a, "largest R_A");
    invariance->add_option("--max-C", max_c, "largest R_C");

    std::string eps = "1/4", radii = "1,2", a_radius = "auto", a_from;
    std::size_t units_cap = 0;
    bool no_invariance = false;
    auto* quasitile = app.add_subcommand("quasitile", "Ornstein-Weiss quasitiling and its verifier");
    common(quasitile, true);
    quasitile->add_option("--eps", eps, "epsilon");
    quasitile->add_option("--radii", radii, "tile radii, increasing, comma separated");
    quasitile->add_option("--A", a_radius, "radius of A, or auto");
    quasitile->add_option("--A-from", a_from, "start radius of the invariant-ball search");
    quasitile->add_option("--units", units_cap, "at most this many fibres, spread over the window (0: all)");
    quasitile->add_flag("--no-invariance", no_invariance, "skip the (T_L, eps^2/4)-invariance precondition");

    int k = 1;
    std::string cap = "200", split_eps;
    auto* towers = app.add_subcommand("towers", "supertile castle, partition certificate, optional refinement");
    common(towers, true);
    towers->add_option("--k", k, "supertile level");
    towers->add_option("--cap", cap, "recognizability radius cap");
    towers->add_option("--split", split_eps, "refine bases for diameter eps");

    std::string transfer = "1/2,3/2";
    auto* suzuki = app.add_subcommand("suzuki-roundtrip", "castle to elementary subgroupoid and back");
    common(suzuki, true);
    suzuki->add_option("--k", k, "supertile level");
    suzuki->add_option("--cap", cap, "recognizability radius cap");
    suzuki->add_option("--transfer", transfer, "ball radii for the invariance transfer check");

    ZstableArgs z;
    auto zopts = [&](CLI::App* sub) {
        sub->add_option("--k", z.k, "supertile level of the castle (0: identity castle)");
        sub->add_option("--cap", z.cap, "recognizability radius cap");
        sub->add_option("--n", z.n, "matrix size");
        sub->add_option("--Q", z.q, "number of shells");
        sub->add_option("--K", z.k_radius, "radius of K");
        sub->add_option("--tiles", z.tiles, "tile radii");
        sub->add_option("--cover", z.cover, "cover patch radius");
        sub->add_option("--eps", z.eps, "epsilon");
        sub->add_option("--upsilon", z.upsilon, "prototile labels whose indicators form Upsilon");
        sub->add_option("--a", z.a_letter, "prototile label whose indicator is a (default: a = 1)");
        sub->add_flag("--strict", z.strict, "fail instead of raising kappa and beta");
    };
    auto* zstable = app.add_subcommand("zstable", "order-zero embedding of M_n with its ledger");
    common(zstable, true);
    zopts(zstable);
    zstable->add_option("--embedding", z.embedding_out, "write psi, phi and h triplets here");

    std::string m = "5", ns = "1..12", word, patch_radius = "2";
    std::uint32_t src = 0, rng = 1;
    auto* qd = app.add_subcommand("qd-profile", "quasidiagonality commutator profile");
    common(qd, true);
    qd->add_option("--m", m, "radius of B_m");
    qd->add_option("--n", ns, "projection radii, a..b or a list");
    qd->add_option("--word", word, "generator patch as a word (1D)");
    qd->add_option("--from", src, "source tile index in the patch");
    qd->add_option("--to", rng, "range tile index in the patch");
    qd->add_option("--patch-radius", patch_radius, "patch radius around the window origin (2D)");
    qd->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    std::string mode = "patch", render_radius = "10";
    auto* render = app.add_subcommand("render", "SVG of a patch, tower levels or zstable shells");
    common(render, true);
    zopts(render);
    render->add_option("--mode", mode, "patch, towers or shells")->check(CLI::IsMember({"patch", "towers", "shells"}));
    render->add_option("--R", render_radius, "radius drawn around the origin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? pass : precondition;
    }

    try {
        if (*check) return cmd_check_rule(cfg);
        if (*enumerate) return cmd_enumerate(cfg, enum_radius);
        if (*metric) return cmd_metric(cfg, other_seed, shift);
        if (*invariance) return cmd_invariance(cfg, samples, max_a, max_c);
        if (*quasitile) return cmd_quasitile(cfg, eps, radii, a_radius, a_from, units_cap, no_invariance);
        if (*towers) return cmd_towers(cfg, k, cap, split_eps);
        if (*suzuki) return cmd_suzuki(cfg, k, cap, parse_list(transfer));
        if (*zstable) return cmd_zstable(cfg, z);
        if (*qd) return cmd_qd_profile(cfg, m, ns, word, src, rng, patch_radius);
        if (*render) return cmd_render(cfg, mode, render_radius, z);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return precondition;
    } catch (const std::exception& e) {
        std::cerr << "cli: " << e.what() << "\n";
        return precondition;
    }
    return precondition;
}
