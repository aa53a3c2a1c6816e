#include <catch_amalgamated.hpp>

#include "hull/zstable.hpp"
#include "support.hpp"

using namespace hull;
using hull::testing::fixture;

namespace {

std::vector<Rational> letter_indicator(const Window& w, std::uint32_t proto) {
    std::vector<Rational> f(w.size(), 0);
    for (std::uint32_t x = 0; x < w.size(); ++x) f[x] = w.proto(x) == proto ? 1 : 0;
    return f;
}

EmbeddingConfig pd_config(const Window& w) {
    EmbeddingConfig cfg;
    cfg.n = 2;
    cfg.epsilon = 1;
    cfg.q = 4;
    cfg.k_radius = frac(3, 2);
    cfg.tile_radii = {frac(27, 2)};
    cfg.cover_radius = 14;
    cfg.upsilon = {letter_indicator(w, w.rule().index_of("b"))};
    return cfg;
}

struct PdRun {
    std::shared_ptr<const SubstitutionRule> rule = fixture("pd");
    Window w = sample_window(rule, 0, 14, 900);
    Castle castle = supertile_castle(w, 6, 200);
    EmbeddingConfig cfg = pd_config(w);
    std::vector<Rational> a = std::vector<Rational>(w.size(), 1);
};

const PdRun& pd_run() {
    static const PdRun run;
    return run;
}

} // namespace

TEST_CASE("trivial embedding for n = 1") {
    auto sq = fixture("sq");
    auto w = sample_window(sq, 0, 6, 16);
    EmbeddingConfig cfg;
    cfg.n = 1;
    cfg.q = 1;
    cfg.k_radius = frac(1, 2);
    cfg.tile_radii = {frac(1, 2)};
    cfg.cover_radius = frac(1, 2);
    std::vector<Rational> a(w.size(), 1);
    auto run = run_zstable(identity_castle(*sq), cfg, a, w);
    const auto& psi = run.embedding.psi[0][0];
    CHECK(psi.is_diagonal());
    CHECK(psi * psi == psi);
    for (std::uint32_t x = 0; x < w.size(); ++x) CHECK(psi.at(x, x) == (run.embedding.active[x] ? 1 : 0));
    CHECK(run.embedding.h == psi);
    for (const auto& e : run.ledger.entries)
        if (e.counts) CHECK(e.pass);
    CHECK(run.ledger.pass());
}

TEST_CASE("period doubling embedding into M_2") {
    const auto& p = pd_run();
    auto run = run_zstable(p.castle, p.cfg, p.a, p.w);
    const auto& lq = run.lq;
    CHECK(lq.n == 2);
    CHECK(lq.warnings.empty());
    std::size_t matched = 0;
    for (const auto& tt : lq.towers)
        for (const auto& g : tt.groups) matched += g.parts[0].size();
    CHECK(matched > 0);
    for (const auto& e : run.ledger.entries) {
        INFO(e.name << ": " << e.measured << " vs " << e.bound << " " << e.detail);
        if (e.counts) CHECK(e.pass);
    }
    CHECK(run.ledger.pass());
    REQUIRE(run.ledger.witness);
    CHECK(run.ledger.witness->exact);
    CHECK(run.ledger.at("commutator_k").pass);
    CHECK_FALSE(run.ledger.at("q_condition").counts);

    auto j = ledger_to_json(run.ledger);
    CHECK(j["pass"] == true);
    auto e = embedding_to_json(run.embedding);
    CHECK(e["psi"].contains("e12"));
    CHECK(e["h"].size() > 0);
}

TEST_CASE("a corrupted bijection is an internal error") {
    const auto& p = pd_run();
    auto cfg = p.cfg;
    cfg.validate();
    Castle refined = prepare_castle(p.castle, std::max<Rational>(cfg.cover_radius, cfg.tile_radii.back() + cfg.k_radius), p.w);
    QuasitileOptions opt;
    opt.cover_radius = cfg.cover_radius;
    opt.extra_margin = cfg.k_radius;
    opt.require_invariance = false;
    auto lq = quasitile_shapes(refined, TileSequence::from_radii(cfg.tile_radii, cfg.epsilon, 2), cfg.beta_value(), p.w, opt);
    lq = partition_and_biject(std::move(lq), cfg.cover_radius, cfg.n, p.w);
    lq = core_shell(std::move(lq), cfg.k_radius, cfg.q, cfg.kappa_value(), p.w);
    bool corrupted = false;
    for (auto& tt : lq.towers)
        for (auto& g : tt.groups)
            if (!corrupted && g.parts[0].size() > 0) {
                g.parts[1][0] = g.parts[0][0];
                corrupted = true;
            }
    REQUIRE(corrupted);
    try {
        build_embedding(lq, p.w);
        FAIL("expected a collision");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::internal);
    }
}

TEST_CASE("a huge Q empties the cores") {
    const auto& p = pd_run();
    auto cfg = p.cfg;
    cfg.q = 40;
    try {
        run_zstable(p.castle, cfg, p.a, p.w);
        FAIL("expected a kappa violation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
        CHECK(std::string(e.what()).find("kappa") != std::string::npos);
    }

    cfg.q = 4;
    cfg.raise_parameters = false;
    CHECK_THROWS_AS(run_zstable(p.castle, cfg, p.a, p.w), Error);
}

TEST_CASE("n beyond every class degenerates with a warning") {
    const auto& p = pd_run();
    auto cfg = p.cfg;
    cfg.n = 64;
    auto run = run_zstable(p.castle, cfg, p.a, p.w);
    CHECK_FALSE(run.lq.warnings.empty());
    CHECK(run.embedding.h.nnz() == 0);
    CHECK_FALSE(run.ledger.at("injection").pass);
}

TEST_CASE("unrefined bases fail the Lebesgue check") {
    const auto& p = pd_run();
    auto normal = supertile_castle(p.w, 3, 200).normalized();
    QuasitileOptions opt;
    opt.require_invariance = false;
    auto lq = quasitile_shapes(normal, TileSequence::from_radii({frac(3, 2)}, 1, 2), frac(1, 64), p.w, opt);
    try {
        partition_and_biject(std::move(lq), 40, 2, p.w);
        FAIL("expected a Lebesgue failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
        CHECK(std::string(e.what()).find("Lebesgue") != std::string::npos);
    }
}

TEST_CASE("units-only K gives a single shell") {
    const auto& p = pd_run();
    auto cfg = p.cfg;
    cfg.k_radius = frac(1, 2);
    cfg.q = 1;
    auto run = run_zstable(p.castle, cfg, p.a, p.w);
    for (const auto& tt : run.lq.towers)
        for (const auto& c : tt.copies)
            for (const auto& [t, s] : c.shells) CHECK(s == 1);
    CHECK(run.ledger.at("commutator_k").measured == "0");
    CHECK(run.ledger.at("matrix_units").pass);
}

TEST_CASE("configuration is validated") {
    EmbeddingConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.tile_radii = {2, 1};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.tile_radii = {1, 2};
    cfg.validate();
    cfg.n = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
