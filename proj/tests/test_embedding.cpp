#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "reco/embedding/composer.hpp"

using namespace reco;
using namespace reco::data;
using namespace reco::embed;
using reco::num::Tape;
using reco::num::Tensor;

namespace {

Catalog fixture_catalog() {
    std::vector<Item> items;
    items.push_back({"i1", 1, 2, 3, 0, 5});
    items.push_back({"i2", 1, 4, std::nullopt, 1, 9});
    items.push_back({"i3", std::nullopt, std::nullopt, std::nullopt, std::nullopt, 0});
    std::vector<Outfit> outfits;
    outfits.push_back({"o1", {"i1"}, std::string("c1"), 2});
    outfits.push_back({"o2", {"i1", "i2"}, std::string("c1"), 3});
    outfits.push_back({"o3", {"i2", "i3"}, std::nullopt, 1});
    std::vector<Creator> creators;
    creators.push_back({"c1", {"o1", "o2"}});
    return Catalog::from_entities(std::move(items), std::move(outfits), std::move(creators));
}

struct Fixture {
    Catalog catalog = fixture_catalog();
    EmbeddingConfig cfg;
    EmbeddingTables tables;
    Fixture() : tables(make_tables()) {}
    EmbeddingTables make_tables() {
        Rng rng(91);
        return EmbeddingTables::init(cfg, catalog.vocabs(), catalog.creators().size(), rng);
    }
    std::vector<double> entity(EntityType type, const std::string& id) {
        return entity_vector(tables, catalog, type, *catalog.find(type, id));
    }
};

double l2(const std::vector<double>& v, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("single-item outfit matches the item on shared blocks, creator block filled") {
    Fixture f;
    const std::size_t fd = f.cfg.feature_dim;
    auto item = f.entity(EntityType::item, "i1");
    auto outfit = f.entity(EntityType::outfit, "o1");
    for (std::size_t i = 0; i < 4 * fd; ++i) CHECK(outfit[i] == doctest::Approx(item[i]).epsilon(1e-12));
    // Item leaves the creator block zero; the outfit fills it.
    CHECK(l2(item, 4 * fd, 5 * fd) == 0.0);
    CHECK(l2(outfit, 4 * fd, 5 * fd) > 0.0);
}

TEST_CASE("two-item outfit averages feature blocks") {
    Fixture f;
    const std::size_t fd = f.cfg.feature_dim;
    auto i1 = f.entity(EntityType::item, "i1");
    auto i2 = f.entity(EntityType::item, "i2");
    auto o2 = f.entity(EntityType::outfit, "o2");
    // Color block is block 1.
    for (std::size_t k = 0; k < fd; ++k) {
        CHECK(o2[fd + k] == doctest::Approx((i1[fd + k] + i2[fd + k]) / 2.0).epsilon(1e-12));
    }
    // Brand block (block 2): i2 has no brand, so the average halves i1's brand.
    for (std::size_t k = 0; k < fd; ++k) {
        CHECK(o2[2 * fd + k] == doctest::Approx(i1[2 * fd + k] / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("absent features leave an exactly zero block") {
    Fixture f;
    const std::size_t fd = f.cfg.feature_dim;
    auto i2 = f.entity(EntityType::item, "i2");
    CHECK(l2(i2, 2 * fd, 3 * fd) == 0.0);  // brand absent
    auto i3 = f.entity(EntityType::item, "i3");
    CHECK(l2(i3, 0, 4 * fd) == 0.0);  // all categorical features absent
}

TEST_CASE("outfit embedding is permutation-invariant in member items") {
    Fixture f;
    std::vector<Item> items = f.catalog.items();
    std::vector<Creator> creators = f.catalog.creators();
    std::vector<Outfit> outfits = f.catalog.outfits();
    for (auto& of : outfits) {
        if (of.id == "o3") std::swap(of.item_ids[0], of.item_ids[1]);
    }
    Catalog shuffled = Catalog::from_entities(std::move(items), std::move(outfits), std::move(creators));
    auto a = entity_vector(f.tables, f.catalog, EntityType::outfit, *f.catalog.find(EntityType::outfit, "o3"));
    auto b = entity_vector(f.tables, shuffled, EntityType::outfit, *shuffled.find(EntityType::outfit, "o3"));
    CHECK(a == b);
}

TEST_CASE("creator embeds as the flattened items of its outfits") {
    Fixture f;
    const std::size_t fd = f.cfg.feature_dim;
    auto i1 = f.entity(EntityType::item, "i1");
    auto i2 = f.entity(EntityType::item, "i2");
    auto c1 = f.entity(EntityType::creator, "c1");
    // c1 covers o1={i1} and o2={i1,i2}: members are i1, i1, i2.
    for (std::size_t k = 0; k < fd; ++k) {
        CHECK(c1[k] == doctest::Approx((2 * i1[k] + i2[k]) / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("interaction type changes only the 1-hot block pre-projection") {
    Fixture f;
    Tape t;
    TableNodes n = bind_tables(t, f.tables, false);
    Interaction click{"u", 100, EntityType::item, "i1", InteractionType::click};
    Interaction purchase{"u", 100, EntityType::item, "i1", InteractionType::purchase};
    auto a = t.value(interaction_features(t, n, f.catalog, click, 4)).data;
    auto b = t.value(interaction_features(t, n, f.catalog, purchase, 4)).data;
    const std::size_t ew = f.cfg.entity_width();
    REQUIRE(a.size() == f.cfg.concat_width());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i >= ew && i < ew + 3) continue;
        CHECK(a[i] == b[i]);
    }
    CHECK(a[ew + 0] == 1.0);
    CHECK(b[ew + 2] == 1.0);
    CHECK(a[ew + 2] == 0.0);
}

TEST_CASE("recency changes only the recency block pre-projection") {
    Fixture f;
    Tape t;
    TableNodes n = bind_tables(t, f.tables, false);
    Interaction ix{"u", 100, EntityType::item, "i1", InteractionType::click};
    auto a = t.value(interaction_features(t, n, f.catalog, ix, 0)).data;
    auto b = t.value(interaction_features(t, n, f.catalog, ix, 5)).data;
    const std::size_t rec0 = f.cfg.entity_width() + 3;
    bool differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i < rec0) {
            CHECK(a[i] == b[i]);
        } else if (a[i] != b[i]) {
            differ = true;
        }
    }
    CHECK(differ);
}

TEST_CASE("projected interaction embedding has model width") {
    Fixture f;
    Tape t;
    TableNodes n = bind_tables(t, f.tables, false);
    for (auto [type, id] : {std::pair{EntityType::item, "i1"}, {EntityType::outfit, "o2"},
                            {EntityType::creator, "c1"}}) {
        Interaction ix{"u", 100, type, id, InteractionType::click};
        CHECK(t.value(embed_interaction(t, n, f.catalog, ix, 1)).shape ==
              std::vector<std::size_t>{f.cfg.d_model});
    }
}

TEST_CASE("model input rows: context only, then one per interaction") {
    Fixture f;
    UserContext ctx{"u1", 1, 0, 2};
    {
        Tape t;
        TableNodes n = bind_tables(t, f.tables, false);
        const Tensor& m = t.value(build_model_input(t, n, f.catalog, ctx, {}, {}));
        CHECK(m.shape == std::vector<std::size_t>{1, f.cfg.d_model});
    }
    {
        Tape t;
        TableNodes n = bind_tables(t, f.tables, false);
        std::vector<Interaction> ix{{"u1", 100, EntityType::item, "i1", InteractionType::click},
                                    {"u1", 200, EntityType::item, "i2", InteractionType::click}};
        const Tensor& m = t.value(build_model_input(t, n, f.catalog, ctx, ix, {1, 0}));
        CHECK(m.shape == std::vector<std::size_t>{3, f.cfg.d_model});
    }
}

TEST_CASE("permuting interactions changes the model input") {
    Fixture f;
    UserContext ctx{"u1", 0, 0, 0};
    std::vector<Interaction> fwd{{"u1", 100, EntityType::item, "i1", InteractionType::click},
                                 {"u1", 200, EntityType::item, "i2", InteractionType::click}};
    std::vector<Interaction> rev{fwd[1], fwd[0]};
    Tape t1, t2;
    TableNodes n1 = bind_tables(t1, f.tables, false);
    TableNodes n2 = bind_tables(t2, f.tables, false);
    auto a = t1.value(build_model_input(t1, n1, f.catalog, ctx, fwd, {0, 0})).data;
    auto b = t2.value(build_model_input(t2, n2, f.catalog, ctx, rev, {0, 0})).data;
    CHECK(a != b);
}

TEST_CASE("context row is the sum of context feature embeddings") {
    Fixture f;
    UserContext ctx{"u1", 2, 1, 0};
    Tape t;
    TableNodes n = bind_tables(t, f.tables, false);
    const Tensor& m = t.value(build_model_input(t, n, f.catalog, ctx, {}, {}));
    for (std::size_t j = 0; j < f.cfg.d_model; ++j) {
        const double expected = f.tables.ctx_market.at(2, j) + f.tables.ctx_device.at(1, j) +
                                f.tables.ctx_gender.at(0, j) + f.tables.positions.at(0, j);
        CHECK(m.at(0, j) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("oversized histories are rejected") {
    Fixture f;
    UserContext ctx;
    std::vector<Interaction> ix(f.cfg.max_len + 1, {"u1", 100, EntityType::item, "i1", InteractionType::click});
    std::vector<std::size_t> rec(ix.size(), 0);
    Tape t;
    TableNodes n = bind_tables(t, f.tables, false);
    CHECK_THROWS_AS(build_model_input(t, n, f.catalog, ctx, ix, rec), reco::ShapeError);
}

TEST_CASE("age feature toggle appends an age block") {
    Fixture f;
    EmbeddingConfig cfg;
    cfg.use_age_feature = true;
    Rng rng(7);
    EmbeddingTables tables = EmbeddingTables::init(cfg, f.catalog.vocabs(), f.catalog.creators().size(), rng);
    CHECK(cfg.entity_width() == 5 * cfg.feature_dim + cfg.age_dim);
    auto v = entity_vector(tables, f.catalog, EntityType::item, *f.catalog.find(EntityType::item, "i1"));
    CHECK(v.size() == cfg.entity_width());
    CHECK(l2(v, 5 * cfg.feature_dim, cfg.entity_width()) > 0.0);
}
