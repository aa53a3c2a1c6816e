#include <catch_amalgamated.hpp>

#include "hull/quasitiling.hpp"
#include "support.hpp"

using namespace hull;
using hull::testing::fixture;

TEST_CASE("even covering check") {
    LocalFamily fam{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    auto ok = check_even_covering(fam, 4, 1, 2);
    CHECK(ok.pass);
    CHECK(ok.max_multiplicity == 2);
    CHECK(ok.total_mass == 8);

    auto over = check_even_covering(fam, 4, 1, 1);
    CHECK_FALSE(over.pass);

    auto thin = check_even_covering({{0}}, 4, frac(1, 2), 1);
    CHECK_FALSE(thin.pass);

    auto outside = check_even_covering({{0, 7}}, 4, 0, 1);
    CHECK_FALSE(outside.members_inside);
}

TEST_CASE("disjointify keeps disjoint members and drops duplicates") {
    LocalFamily disjoint{{0, 1}, {2, 3}, {4, 5}};
    auto d = disjointify(disjoint, 6, frac(1, 4), 1, 1);
    CHECK(d.kept.size() == 3);
    CHECK(d.covered == 6);
    CHECK(d.cover_ok);

    LocalFamily twice{{0, 1, 2}, {0, 1, 2}};
    auto t = disjointify(twice, 3, frac(1, 4), 1, 2);
    REQUIRE(t.kept.size() == 1);
    CHECK(t.kept[0] == 0);
    CHECK(t.hats[0].size() == 3);

    CHECK_THROWS_AS(disjointify({{0}}, 4, frac(1, 4), 1, 1), Error);
    CHECK_THROWS_AS(disjointify(disjoint, 6, frac(3, 4), 1, 1), Error);

    // every hat keeps at least (1 - eps) of its member
    LocalFamily overlap{{0, 1, 2, 3}, {3, 4, 5, 6}, {2, 3, 4, 5}, {6, 7, 8, 9}};
    auto o = greedy_disjointify(overlap, 10, frac(1, 4));
    for (std::size_t i = 0; i < o.kept.size(); ++i)
        CHECK(Rational(static_cast<long>(o.hats[i].size())) >= frac(3, 4) * static_cast<long>(overlap[o.kept[i]].size()));
}

TEST_CASE("translate covering on the square lattice") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 30);
    auto c = CompactSet::ball(frac(6, 5));
    auto k = invariance_constants(c, w);
    auto a = unit_arrows(w, *w.origin(), CompactSet::ball(frac(101, 5)));
    auto t = translate_covering(w, a, c, frac(1, 4), k);
    CHECK(t.multiplicity == 5);
    CHECK(t.delta == frac(1, 4));
    CHECK(t.check.pass);
    CHECK(t.check.max_multiplicity <= 5);

    auto d = disjointify(t.members, a.size(), frac(1, 4), t.lambda, t.multiplicity);
    CHECK(d.cover_ok);

    UnitArrows none{*w.origin(), {}};
    CHECK(translate_covering(w, none, c, frac(1, 4), k).skipped);

    auto small = unit_arrows(w, *w.origin(), CompactSet::ball(2));
    CHECK_THROWS_AS(translate_covering(w, small, c, frac(1, 4), k), Error);
}

TEST_CASE("tile sequences") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 12);
    auto s = build_tile_sequence(w, frac(1, 4), 2);
    CHECK(s.m == 3);
    REQUIRE(s.radii.size() == 2);
    CHECK(s.radii[0] == 1);
    CHECK(s.radii[1] == 2);
    CHECK(s.certified);
    CHECK(s.stopping_length == 16);
    CHECK_FALSE(s.length_suffices());

    CHECK_THROWS_AS(build_tile_sequence(w, frac(3, 5), 2), Error);
    CHECK_THROWS_AS(build_tile_sequence(w, frac(1, 2), 2), Error);

    auto pd = fixture("pd");
    auto wp = sample_window(pd, 0, Rational(900));
    auto p = build_tile_sequence(wp, frac(1, 4), 3);
    REQUIRE(p.radii.size() == 3);
    CHECK(p.radii[0] == 1);
    CHECK(p.radii[1] == 2);
    CHECK(p.radii[2] == 257);
    for (std::size_t i = 1; i < p.radii.size(); ++i) CHECK(p.radii[i - 1] < p.radii[i]);
    const auto& last = p.certificates.back();
    CHECK(Rational(static_cast<long>(last.boundary)) <= frac(1, 128) * static_cast<long>(last.boundary_host));
    CHECK(last.cond_i);
    CHECK(last.cond_ii);
    CHECK(p.certified);

    auto tiny = sample_window(pd, 0, Rational(30));
    CHECK_THROWS_AS(build_tile_sequence(tiny, frac(1, 4), 3), Error);
}

TEST_CASE("single-tile quasitiling by units") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 12);
    auto seq = TileSequence::from_radii({Rational(1)}, frac(1, 4), 3);
    std::vector<UnitArrows> a{unit_arrows(w, *w.origin(), CompactSet::ball(3))};
    auto q = ow_quasitile(w, a, seq);
    REQUIRE(q.fibres.size() == 1);
    CHECK(q.fibres[0].translates.size() == a[0].size());
    auto rep = verify_quasitiling(q, a, w);
    CHECK(rep.pass);
    CHECK(rep.min_cover == 1);
}

TEST_CASE("period doubling quasitiling end to end") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, Rational(160));
    Rational eps = frac(1, 4);
    auto seq = TileSequence::from_radii({Rational(1), Rational(2)}, eps, 3);
    auto units = w.valid_units(100);
    units.resize(std::min<std::size_t>(units.size(), 20));
    Rational r = smallest_invariant_ball(w, units, CompactSet::ball(2), eps * eps / 4, 2, 1);
    CHECK(r >= 60);
    CHECK(r <= 70);

    std::vector<UnitArrows> a;
    for (auto u : units) a.push_back(unit_arrows(w, u, CompactSet::ball(r)));
    auto q = ow_quasitile(w, a, seq);
    CHECK(q.precondition_ok);
    REQUIRE(q.ledger.size() == 2);
    CHECK(q.ledger[0].tile == 1);
    CHECK(q.ledger[0].lambda == frac(1, 12));
    CHECK(q.ledger[1].lambda == 1 - frac(121, 144));
    for (const auto& step : q.ledger) {
        CHECK(step.lambda_ok);
        CHECK(step.even_ok);
        CHECK(step.fraction_ok);
    }
    auto rep = verify_quasitiling(q, a, w);
    CHECK(rep.pass);
    CHECK(rep.min_cover >= 1 - eps);
    CHECK(rep.min_hat >= 1 - eps);
}

TEST_CASE("non-invariant A is rejected unless the check is disabled") {
    auto pd = fixture("pd");
    auto w = sample_window(pd, 0, Rational(60));
    auto seq = TileSequence::from_radii({Rational(1), Rational(2)}, frac(1, 4), 3);
    std::vector<UnitArrows> a{unit_arrows(w, *w.origin(), CompactSet::ball(5))};
    try {
        ow_quasitile(w, a, seq);
        FAIL("expected a precondition error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
        CHECK(std::string(e.what()).find("worst fibre") != std::string::npos);
    }
    auto q = ow_quasitile(w, a, seq, OwOptions{false});
    CHECK_FALSE(q.precondition_ok);
    CHECK(q.worst_invariance > frac(1, 64));
    auto rep = verify_quasitiling(q, a, w);
    CHECK(rep.min_hat >= frac(3, 4));
}

TEST_CASE("cover and disjointness hold as A grows") {
    auto chair = fixture("chair");
    auto w = sample_window(chair, 0, Rational(40));
    auto seq = TileSequence::from_radii({Rational(1), Rational(2)}, frac(1, 4), 4);
    auto o = *w.origin();
    for (Rational r : {Rational(8), Rational(14), Rational(20)}) {
        std::vector<UnitArrows> a{unit_arrows(w, o, CompactSet::ball(r))};
        auto q = ow_quasitile(w, a, seq, OwOptions{false});
        auto rep = verify_quasitiling(q, a, w);
        CHECK(rep.min_hat >= frac(3, 4));
        CHECK(rep.min_cover >= frac(3, 4));
    }
}
