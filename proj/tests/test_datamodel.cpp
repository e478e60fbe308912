#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reco/common/jsonl.hpp"
#include "reco/datamodel/catalog.hpp"
#include "reco/datamodel/interactions.hpp"

using namespace reco;
using namespace reco::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("reco_dm_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name, const std::string& content) const {
        fs::path p = path / name;
        std::ofstream(p) << content;
        return p;
    }
};

Catalog tiny_catalog(const TempDir& dir) {
    auto items = dir.file("items.jsonl",
                          R"({"id":"i1","category":1,"color":2,"brand":3,"price_bucket":0,"age_days":4})"
                          "\n"
                          R"({"id":"i2","category":1,"age_days":0})"
                          "\n"
                          R"({"id":"i3","color":5})"
                          "\n");
    auto outfits = dir.file("outfits.jsonl", R"({"id":"o1","item_ids":["i1","i2"],"age_days":2})"
                                             "\n");
    auto creators = dir.file("creators.jsonl", "");
    return Catalog::load(items, outfits, creators);
}

}  // namespace

TEST_CASE("valid fixture loads with expected sizes") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    CHECK(c.items().size() == 3);
    CHECK(c.outfits().size() == 1);
    CHECK(c.creators().size() == 0);
    CHECK(c.find(EntityType::item, "i2").has_value());
    CHECK(!c.find(EntityType::item, "nope").has_value());
}

TEST_CASE("outfit referencing a missing item names it") {
    TempDir dir;
    auto items = dir.file("items.jsonl", R"({"id":"i1"})"
                                         "\n");
    auto outfits = dir.file("outfits.jsonl", R"({"id":"o1","item_ids":["i1","i999"]})"
                                             "\n");
    auto creators = dir.file("creators.jsonl", "");
    CHECK_THROWS_WITH_AS(Catalog::load(items, outfits, creators), doctest::Contains("i999"), LoadError);
}

TEST_CASE("empty creator outfit list is an error") {
    TempDir dir;
    auto items = dir.file("items.jsonl", R"({"id":"i1"})"
                                         "\n");
    auto outfits = dir.file("outfits.jsonl", R"({"id":"o1","item_ids":["i1"]})"
                                             "\n");
    auto creators = dir.file("creators.jsonl", R"({"id":"c1","outfit_ids":[]})"
                                               "\n");
    CHECK_THROWS_WITH_AS(Catalog::load(items, outfits, creators), doctest::Contains("c1"), LoadError);
}

TEST_CASE("duplicate ids and unknown feature values are errors naming the record") {
    TempDir dir;
    auto dup = dir.file("dup.jsonl", R"({"id":"i1"})"
                                     "\n"
                                     R"({"id":"i1"})"
                                     "\n");
    auto outfits = dir.file("outfits.jsonl", "");
    auto creators = dir.file("creators.jsonl", "");
    CHECK_THROWS_WITH_AS(Catalog::load(dup, outfits, creators), doctest::Contains("i1"), LoadError);

    auto bad = dir.file("bad.jsonl", R"({"id":"i9","category":99})"
                                     "\n");
    CHECK_THROWS_WITH_AS(Catalog::load(bad, outfits, creators), doctest::Contains("i9"), LoadError);
}

TEST_CASE("catalog round-trips through canonical serialization") {
    TempDir dir;
    auto items = dir.file("items.jsonl",
                          R"({"id":"i2","category":1})"
                          "\n"
                          R"({"id":"i1","color":3,"age_days":7})"
                          "\n");
    auto outfits = dir.file("outfits.jsonl", R"({"id":"o1","item_ids":["i2","i1"],"creator_id":"c1"})"
                                             "\n");
    auto creators = dir.file("creators.jsonl", R"({"id":"c1","outfit_ids":["o1"]})"
                                               "\n");
    Catalog c = Catalog::load(items, outfits, creators);
    c.save(dir.path / "items2.jsonl", dir.path / "outfits2.jsonl", dir.path / "creators2.jsonl");
    Catalog c2 = Catalog::load(dir.path / "items2.jsonl", dir.path / "outfits2.jsonl",
                               dir.path / "creators2.jsonl");
    CHECK(c == c2);
    // Canonical order is by id regardless of file order.
    CHECK(c.items()[0].id == "i1");
    CHECK(c.items()[1].id == "i2");
}

TEST_CASE("interactions sort by timestamp with stable ties and rejected count") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    auto path = dir.file("interactions.jsonl",
                         R"({"user_id":"u1","timestamp":200,"entity_type":"item","entity_id":"i2","interaction_type":"click"})"
                         "\n"
                         R"({"user_id":"u1","timestamp":100,"entity_type":"item","entity_id":"i1","interaction_type":"click"})"
                         "\n"
                         R"({"user_id":"u1","timestamp":200,"entity_type":"outfit","entity_id":"o1","interaction_type":"wishlist"})"
                         "\n"
                         R"({"user_id":"u1","timestamp":150,"entity_type":"item","entity_id":"i404","interaction_type":"click"})"
                         "\n");
    InteractionLog log = load_interactions(path, c);
    CHECK(log.rejected == 1);
    const auto& seq = log.by_user.at("u1");
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].entity_id == "i1");
    CHECK(seq[1].entity_id == "i2");   // ts tie with o1, file order preserved
    CHECK(seq[2].entity_id == "o1");
}

TEST_CASE("malformed interaction line reports its line number") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    auto path = dir.file("interactions.jsonl",
                         R"({"user_id":"u1","timestamp":100,"entity_type":"item","entity_id":"i1","interaction_type":"click"})"
                         "\n"
                         R"({"user_id":"u1","timestamp":"oops"})"
                         "\n");
    CHECK_THROWS_WITH_AS(load_interactions(path, c), doctest::Contains(":2"), LoadError);
}

TEST_CASE("compute_recency floors to whole days and clips") {
    const std::int64_t day = 86400;
    CHECK(compute_recency(1000, 1000 + static_cast<std::int64_t>(3.7 * day)) == 3);
    CHECK(compute_recency(1000, 1000) == 0);
    CHECK(compute_recency(1000, 1000 + 45 * day, 30) == 30);
    CHECK_THROWS_AS(compute_recency(2000, 1000), ConfigError);
}

TEST_CASE("compute_recency is monotone non-increasing in action time") {
    const std::int64_t ref = 10'000'000;
    std::size_t prev = compute_recency(1, ref);
    for (std::int64_t ts = 1; ts <= ref; ts += 999'983) {
        const std::size_t r = compute_recency(ts, ref);
        CHECK(r <= prev);
        prev = r;
    }
}

namespace {

Interaction make_ix(const std::string& user, std::int64_t ts, EntityType et, const std::string& id,
                    InteractionType it = InteractionType::click) {
    return Interaction{user, ts, et, id, it};
}

}  // namespace

TEST_CASE("training example masks follow the next-entity type") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    ctx.user_id = "u1";
    std::vector<Interaction> seq{
        make_ix("u1", 100, EntityType::item, "i1"),
        make_ix("u1", 200, EntityType::item, "i2"),
        make_ix("u1", 300, EntityType::outfit, "o1"),
    };
    ExampleOptions opts;
    opts.max_len = 50;
    auto examples = build_training_examples(seq, ctx, c, opts, 400);
    REQUIRE(examples.size() == 1);
    const auto& ex = examples[0];
    REQUIRE(ex.interactions.size() == 3);
    // Positions 0 and 1 can predict; the final position has no next entity.
    CHECK(ex.target_mask == std::vector<bool>{false, true, false});
    CHECK(ex.target_ids[1] == static_cast<std::int64_t>(*c.find(EntityType::outfit, "o1")));
    CHECK(ex.target_ids[0] == -1);
}

TEST_CASE("item-only sequences targeting outfits produce no examples") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    std::vector<Interaction> seq{
        make_ix("u1", 100, EntityType::item, "i1"),
        make_ix("u1", 200, EntityType::item, "i2"),
    };
    CHECK(build_training_examples(seq, ctx, c, {}, 300).empty());
    CHECK(build_training_examples({}, ctx, c, {}, 300).empty());
}

TEST_CASE("windows cover long sequences and match a brute-force enumerator") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    const std::size_t n = 60;
    std::vector<Interaction> seq;
    for (std::size_t i = 0; i < n; ++i) {
        // Alternate items and outfits so every window has at least one target.
        if (i % 2 == 0) {
            seq.push_back(make_ix("u1", 1000 + static_cast<std::int64_t>(i) * 3600, EntityType::item, "i1"));
        } else {
            seq.push_back(make_ix("u1", 1000 + static_cast<std::int64_t>(i) * 3600, EntityType::outfit, "o1"));
        }
    }
    ExampleOptions opts;
    opts.max_len = 50;
    const std::int64_t ref = seq.back().timestamp + 86400;
    auto examples = build_training_examples(seq, ctx, c, opts, ref);

    // Brute-force reference: starts at multiples of max_len/2 until a window
    // reaches the end; window [s, min(s+max_len, n)).
    std::vector<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t s = 0;; s += opts.max_len / 2) {
        std::size_t e = std::min(s + opts.max_len, n);
        expected.emplace_back(s, e);
        if (e == n) break;
    }
    REQUIRE(examples.size() == expected.size());
    std::vector<bool> covered(n, false);
    for (std::size_t w = 0; w < expected.size(); ++w) {
        const auto& ex = examples[w];
        const auto [s, e] = expected[w];
        CHECK(ex.interactions.size() == e - s);
        CHECK(ex.interactions.size() <= opts.max_len);
        CHECK(ex.interactions.front().timestamp == seq[s].timestamp);
        CHECK(ex.interactions.back().timestamp == seq[e - 1].timestamp);
        for (std::size_t i = s; i < e; ++i) covered[i] = true;
    }
    for (bool b : covered) CHECK(b);
}

TEST_CASE("masked positions always hold targets of the configured type") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    std::vector<Interaction> seq{
        make_ix("u1", 100, EntityType::item, "i1"),
        make_ix("u1", 200, EntityType::outfit, "o1", InteractionType::purchase),
        make_ix("u1", 300, EntityType::item, "i3"),
        make_ix("u1", 400, EntityType::outfit, "o1"),
    };
    auto examples = build_training_examples(seq, ctx, c, {}, 500);
    for (const auto& ex : examples) {
        for (std::size_t p = 0; p < ex.target_mask.size(); ++p) {
            if (!ex.target_mask[p]) continue;
            REQUIRE(p + 1 < ex.interactions.size());
            CHECK(ex.interactions[p + 1].entity_type == EntityType::outfit);
            CHECK(ex.target_ids[p] ==
                  static_cast<std::int64_t>(*c.find(EntityType::outfit, ex.interactions[p + 1].entity_id)));
        }
    }
}

TEST_CASE("eligible interaction types restrict the mask") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    std::vector<Interaction> seq{
        make_ix("u1", 100, EntityType::item, "i1"),
        make_ix("u1", 200, EntityType::outfit, "o1", InteractionType::click),
    };
    ExampleOptions opts;
    opts.eligible_target_types = {InteractionType::purchase};
    CHECK(build_training_examples(seq, ctx, c, opts, 300).empty());
}

TEST_CASE("recency in examples reflects the reference time") {
    TempDir dir;
    Catalog c = tiny_catalog(dir);
    UserContext ctx;
    const std::int64_t day = 86400;
    std::vector<Interaction> seq{
        make_ix("u1", 10 * day, EntityType::item, "i1"),
        make_ix("u1", 12 * day, EntityType::outfit, "o1"),
    };
    auto examples = build_training_examples(seq, ctx, c, {}, 12 * day + 3600);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].recency == std::vector<std::size_t>{2, 0});
}
