#include <catch_amalgamated.hpp>

#include <set>

#include "hull/metric.hpp"
#include "hull/patches.hpp"
#include "support.hpp"

using namespace hull;
using hull::testing::fixture;
using hull::testing::pd_word;

namespace {

Patch tile_patch(const SubstitutionRule& rule, const std::string& label) { return single_tile(rule, rule.index_of(label)); }

std::set<std::string> pd_factors(const std::string& w, std::size_t n) {
    std::set<std::string> out;
    for (std::size_t i = 0; i + n <= w.size(); ++i) out.insert(w.substr(i, n));
    return out;
}

std::string word_of(const SubstitutionRule& rule, const PatchClass& pc) {
    std::vector<std::pair<Rational, char>> byx;
    for (const auto& t : pc.tiles) byx.push_back({t.offset.x, rule.prototiles[t.proto].label[0]});
    std::sort(byx.begin(), byx.end());
    std::string s;
    for (const auto& [x, c] : byx) s += c;
    return s;
}

} // namespace

TEST_CASE("bundled rules pass the consistency check") {
    for (const char* name : {"pd", "sq", "chair"}) {
        auto rule = fixture(name);
        auto rep = check_rule(*rule);
        INFO(name);
        CHECK(rep.ok);
    }
}

TEST_CASE("overlapping children are rejected naming the prototile") {
    auto rule = *fixture("pd");
    rule.children[1][1].offset = Vec{frac(1, 2)};
    auto rep = check_rule(rule);
    CHECK_FALSE(rep.ok);
    REQUIRE_THROWS_AS(inflate(rule, tile_patch(rule, "b"), 1), Error);
    try {
        inflate(rule, tile_patch(rule, "b"), 1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::rule_invalid);
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
}

TEST_CASE("inflate: identity, period doubling and chair area") {
    auto pd = fixture("pd");
    auto a = tile_patch(*pd, "a");
    CHECK(inflate(*pd, a, 0) == a);

    auto one = inflate(*pd, a, 1);
    REQUIRE(one.tiles.size() == 2);
    CHECK(pd->prototiles[one.tiles[0].proto].label == "a");
    CHECK(one.tiles[0].offset == Vec{0});
    CHECK(pd->prototiles[one.tiles[1].proto].label == "b");
    CHECK(one.tiles[1].offset == Vec{1});

    auto chair = fixture("chair");
    auto three = inflate(*chair, single_tile(*chair, 0), 3);
    CHECK(three.tiles.size() == 64);
    Rational area = 0;
    for (const auto& t : three.tiles) area += measure(chair->tile_support(t), 2);
    CHECK(area == 64 * 3);
}

TEST_CASE("inflate composes") {
    for (const char* name : {"pd", "chair"}) {
        auto rule = fixture(name);
        auto p = single_tile(*rule, 0);
        for (int j = 0; j <= 2; ++j)
            for (int k = 0; k <= 2; ++k) CHECK(inflate(*rule, inflate(*rule, p, j), k) == inflate(*rule, p, j + k));
    }
}

TEST_CASE("inflate matches the period-doubling word") {
    auto pd = fixture("pd");
    auto p = inflate(*pd, tile_patch(*pd, "a"), 8);
    std::string w;
    std::vector<std::pair<Rational, char>> byx;
    for (const auto& t : p.tiles) byx.push_back({t.offset.x, pd->prototiles[t.proto].label[0]});
    std::sort(byx.begin(), byx.end());
    for (const auto& [x, c] : byx) w += c;
    CHECK(w == pd_word(8));
}

TEST_CASE("sample_window counts and coverage errors") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, pd->index_of("a"), 10, 100);
    CHECK(w.size() == 201);
    REQUIRE(w.origin());
    CHECK(w.puncture(*w.origin()) == Vec{});
    CHECK(w.gap2() == 1);

    try {
        sample_window(pd, pd->index_of("a"), 2, 100);
        FAIL("expected a coverage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::coverage);
        CHECK(std::string(e.what()).find("required level 8") != std::string::npos);
    }

    auto sq = fixture("sq");
    auto ws = sample_window(sq, 0, 5);
    // open-ball crop of the unit lattice: squares whose closure meets B_5(0)
    std::size_t expected = 0;
    for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j) {
            Support s = translate(sq->prototiles[0].support, Vec{Rational(i) - frac(1, 2), Rational(j) - frac(1, 2)});
            if (meets_ball(s, 2, Vec{}, 5)) ++expected;
        }
    CHECK(ws.size() == expected);
    CHECK(ws.size() == 101);
}

TEST_CASE("patch_around") {
    auto sq = fixture("sq");
    auto ws = sample_window(sq, 0, 6);
    auto single = patch_around(ws, *ws.origin(), frac(1, 4));
    CHECK(single.tiles.size() == 1);

    auto pd = fixture("pd");
    auto wp = sample_window(pd, 0, 10, 100);
    auto three = patch_around(wp, *wp.origin(), 1);
    CHECK(three.tiles.size() == 3);
    CHECK(three.tiles[three.pointed].offset == Vec{frac(-1, 2)});

    std::optional<std::uint32_t> far;
    for (std::uint32_t u = 0; u < ws.size(); ++u)
        if (norm2(ws.puncture(u)) >= 25) far = u;
    REQUIRE(far);
    try {
        patch_around(ws, *far, 1);
        FAIL("expected a margin error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::margin);
    }
}

TEST_CASE("patch_around is translation-equivariant") {
    auto chair = fixture("chair");
    auto w = sample_window(chair, 0, 12);
    auto moved = translated(w, Vec{frac(7, 3), frac(-5, 2)});
    for (std::uint32_t u = 0; u < w.size(); ++u) {
        if (!w.is_valid(u, 3) || !moved.is_valid(u, 3)) continue;
        auto shifted = moved.tile_at(moved.to_ivec(w.puncture(u) + Vec{frac(7, 3), frac(-5, 2)}).value());
        REQUIRE(shifted);
        CHECK(patch_class_at(w, u, 2) == patch_class_at(moved, *shifted, 2));
    }
}

TEST_CASE("enumerate_patch_classes") {
    auto sq = fixture("sq");
    CHECK(enumerate_patch_classes(sq, 1).classes.size() == 1);

    auto pd = fixture("pd");
    auto small = enumerate_patch_classes(pd, frac(1, 4));
    CHECK(small.classes.size() == 2);

    auto three = enumerate_patch_classes(pd, 1);
    std::set<std::string> words;
    for (const auto& pc : three.classes) words.insert(word_of(*pd, pc));
    CHECK(words == pd_factors(pd_word(12), 3));
    CHECK(three.level >= 2);

    auto chair = fixture("chair");
    auto c1 = enumerate_patch_classes(chair, frac(1, 2));
    auto c2 = enumerate_patch_classes(chair, 1);
    CHECK(c1.classes.size() <= c2.classes.size());
}

TEST_CASE("repetitivity_radius") {
    auto sq = fixture("sq");
    PatchClass square{2, {Tile{0, Vec{frac(-1, 2), frac(-1, 2)}}}, 0};
    auto rs = repetitivity_radius(sq, square, 10);
    REQUIRE(rs.bounded);
    CHECK(rs.radius2 == frac(1, 2));

    auto pd = fixture("pd");
    std::uint32_t b = pd->index_of("b");
    PatchClass bclass{1, {Tile{b, Vec{frac(-1, 2)}}}, 0};
    auto rb = repetitivity_radius(pd, bclass, 10);
    REQUIRE(rb.bounded);
    // sliding oracle on the level-12 word: from each interior cell centre, the
    // nearest b-cell measured to its far end
    std::string w = pd_word(12);
    Rational worst = 0;
    for (std::size_t i = 20; i + 20 < w.size(); ++i) {
        Rational best = -1;
        for (std::size_t j = i - 20; j <= i + 20; ++j) {
            if (w[j] != 'b') continue;
            Rational xi = Rational(static_cast<long>(i)) + frac(1, 2);
            Rational lo = abs(Rational(static_cast<long>(j)) - xi), hi = abs(Rational(static_cast<long>(j + 1)) - xi);
            Rational r = std::max(lo, hi);
            if (best < 0 || r < best) best = r;
        }
        worst = std::max(worst, best);
    }
    CHECK(rb.radius2 == worst * worst);

    Tile tb{b, Vec{frac(-3, 2)}}, tb2{b, Vec{frac(-1, 2)}}, tb3{b, Vec{frac(1, 2)}};
    PatchClass bbb{1, {tb, tb2, tb3}, 1};
    CHECK_THROWS_AS(repetitivity_radius(pd, bbb, 10), Error);
}

TEST_CASE("tiling_metric brackets") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 8);
    auto same = tiling_metric(w, w);
    CHECK(same.lo == 0);
    CHECK(same.hi == 0);

    auto shifted = translated(w, Vec{frac(1, 2), 0});
    auto half = tiling_metric(w, shifted);
    CHECK(half.lo == frac(1, 4));
    CHECK(half.hi == frac(1, 4));
    CHECK(half.certified);

    auto pd = fixture("pd");
    auto wp = sample_window(pd, 0, 10, 100);
    auto tiles = wp.tiles();
    for (auto& t : tiles)
        if (t.offset.x > 60) {
            t.proto = 1 - t.proto;
            break;
        }
    Window relabelled(pd, tiles, wp.radius(), std::nullopt);
    auto far = tiling_metric(wp, relabelled);
    CHECK(far.hi <= frac(1, 50));
    CHECK(far.lo <= far.hi);
    CHECK(far.lo > 0);
}

TEST_CASE("tiling_metric is symmetric and bounded by one") {
    auto pd = fixture("pd");
    std::vector<Window> ws;
    auto base = sample_window(pd, 0, 12, 60);
    ws.push_back(base);
    for (std::uint32_t u = 0; u < base.size() && ws.size() < 4; ++u) {
        if (base.is_valid(u, 20) && base.puncture(u).x > 5) ws.push_back(recentred(base, u, 20));
    }
    for (auto& x : ws) x = recentred(x, *x.origin(), 20);
    for (std::size_t i = 0; i < ws.size(); ++i)
        for (std::size_t j = 0; j < ws.size(); ++j) {
            auto dij = tiling_metric(ws[i], ws[j]);
            auto dji = tiling_metric(ws[j], ws[i]);
            CHECK(dij.lo == dji.lo);
            CHECK(dij.hi == dji.hi);
            CHECK(dij.hi <= 1);
            for (std::size_t k = 0; k < ws.size(); ++k) {
                auto dik = tiling_metric(ws[i], ws[k]);
                auto dkj = tiling_metric(ws[k], ws[j]);
                CHECK(dij.lo <= dik.hi + dkj.hi);
            }
        }
}

TEST_CASE("rule JSON round trip") {
    auto chair = fixture("chair");
    auto again = rule_from_json(rule_to_json(*chair));
    CHECK(again.prototiles.size() == chair->prototiles.size());
    CHECK(again.children.size() == chair->children.size());
    CHECK(inflate(again, single_tile(again, 0), 2) == inflate(*chair, single_tile(*chair, 0), 2));
}
