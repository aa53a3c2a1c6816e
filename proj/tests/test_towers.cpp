#include <catch_amalgamated.hpp>

#include "hull/towers.hpp"
#include "support.hpp"

using namespace hull;
using hull::testing::fixture;

namespace {

Castle pd_castle(int k) {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    return supertile_castle(w, k, 12);
}

} // namespace

TEST_CASE("period doubling supertile castles") {
    auto pd = fixture("pd");
    auto c = pd_castle(1);
    CHECK(c.towers.size() == 2);
    CHECK(c.level_count() == 4);
    CHECK(c.is_decomposition);

    auto other = sample_window(pd, 1, 11, 250);
    auto cert = certify_castle(c, other);
    CHECK(cert.partition);
    CHECK(cert.checked > 100);

    for (int k : {2, 3}) {
        auto ck = pd_castle(k);
        CHECK(ck.level_count() == 2 * (std::size_t(1) << k));
        CHECK(certify_castle(ck, other).partition);
    }
}

TEST_CASE("periodic square tiling is not recognizable") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 6, 20);
    try {
        supertile_castle(w, 1, 6);
        FAIL("expected an inconclusive error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::inconclusive);
    }
}

TEST_CASE("chair supertile castle") {
    auto chair = fixture("chair");
    auto w = sample_window(chair, 0, Rational(30));
    auto c = supertile_castle(w, 1, 10);
    CHECK(c.towers.size() == 4);
    CHECK(c.level_count() == 16);
    CHECK(c.is_decomposition);
}

TEST_CASE("a broken castle fails its partition certificate") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto c = pd_castle(1);
    c.towers[0].bases.pop_back();
    auto cert = certify_castle(c, w);
    CHECK_FALSE(cert.partition);
    CHECK(cert.uncovered > 0);
    REQUIRE(cert.witness);
}

TEST_CASE("split_for_diameter") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto c = pd_castle(1);
    Rational eps = frac(1, 4);
    REQUIRE_FALSE(meets_containment(c, eps));
    auto s = split_for_diameter(c, eps, w);
    CHECK(s.base_radius >= 5);
    CHECK(s.towers.size() == c.towers.size());
    CHECK(s.towers[0].bases.size() >= c.towers[0].bases.size());
    auto rep = compare_refinement(c, s, eps, w);
    CHECK(rep.containment);
    CHECK(rep.same_levels);
    CHECK(rep.same_fibres);
    CHECK(certify_castle(s, w).partition);

    auto again = split_for_diameter(s, frac(1, 2), w);
    CHECK(same_castle(again, s));
    CHECK(again.base_radius == s.base_radius);
}

TEST_CASE("castle to elementary subgroupoid and back") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto c = pd_castle(1);
    auto k = castle_to_elementary(c, *pd);
    REQUIRE(k.blocks.size() == 2);
    auto cert = certify_elementary(k, w);
    CHECK(cert.ok());
    auto kset = k.as_compact_set();
    for (auto x : w.valid_units(k.margin() + 2)) CHECK(fibre_ranges(w, x, kset).size() == 2);

    auto back = elementary_to_castle(k, w);
    CHECK(same_castle(back, c));

    auto chair = fixture("chair");
    auto wc = sample_window(chair, 0, Rational(30));
    auto cc = supertile_castle(wc, 1, 10);
    auto kc = castle_to_elementary(cc, *chair);
    auto kcs = kc.as_compact_set();
    std::size_t tested = 0;
    for (auto x : wc.valid_units(kc.margin())) {
        CHECK(fibre_ranges(wc, x, kcs).size() == 4);
        if (++tested > 60) break;
    }
}

TEST_CASE("units-only elementary subgroupoid") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 6, 12);
    auto c = identity_castle(*sq);
    auto k = castle_to_elementary(c, *sq);
    CHECK(k.fundamental_domain().size() == 1);
    CHECK(certify_elementary(k, w).ok());
    auto back = elementary_to_castle(k, w);
    REQUIRE(back.towers.size() == 1);
    CHECK(back.towers[0].levels.size() == 1);
    CHECK(same_castle(back, c));
}

TEST_CASE("bad elementary input is rejected") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto c = pd_castle(1);
    auto k = castle_to_elementary(c, *pd);
    k.blocks[0].arrows[1][0] = k.blocks[0].arrows[0][0];
    auto cert = certify_elementary(k, w);
    CHECK_FALSE(cert.unique_arrows);
    CHECK_THROWS_AS(elementary_to_castle(k, w), Error);

    auto loose = c;
    loose.is_decomposition = false;
    CHECK_THROWS_AS(castle_to_elementary(loose, *pd), Error);
}

TEST_CASE("invariance transfer between castle and subgroupoid") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, 12, 300);
    auto c = pd_castle(2);
    auto k = castle_to_elementary(c, *pd);

    auto units = invariance_transfer_check(c, k, CompactSet::ball(frac(1, 2)), w);
    CHECK(units.all_equal);
    CHECK(units.pairs > 50);

    auto ball = invariance_transfer_check(c, k, CompactSet::ball(frac(3, 2)), w);
    CHECK(ball.all_equal);

    auto truncated = k;
    for (auto& row : truncated.blocks[0].arrows) row.back() = CompactSet::bisections({});
    auto bad = invariance_transfer_check(c, truncated, CompactSet::ball(frac(3, 2)), w);
    CHECK_FALSE(bad.all_equal);
    REQUIRE(bad.witness);
}

TEST_CASE("castle JSON lists bases and shapes") {
    auto pd = fixture("pd");
    auto c = pd_castle(1);
    auto j = castle_to_json(c, *pd);
    REQUIRE(j["towers"].size() == 2);
    CHECK(j["is_decomposition"] == true);
    for (const auto& t : j["towers"]) CHECK(t["shape"].size() == t["base"].size() * t["levels"].get<std::size_t>());
}
