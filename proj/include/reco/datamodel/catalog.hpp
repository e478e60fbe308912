#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace reco::data {

enum class EntityType { item, outfit, creator };
enum class InteractionType { click, wishlist, purchase };

EntityType entity_type_from_string(const std::string& s);
const char* to_string(EntityType t);
InteractionType interaction_type_from_string(const std::string& s);
const char* to_string(InteractionType t);

inline constexpr std::size_t kInteractionTypeCount = 3;

// Vocabulary sizes for every categorical feature; indices in the data must be
// strictly below these.
struct FeatureVocabs {
    std::size_t category = 12;
    std::size_t color = 10;
    std::size_t brand = 20;
    std::size_t price_bucket = 5;
    std::size_t market = 4;
    std::size_t device = 3;
    std::size_t gender_intent = 3;
};

struct Item {
    std::string id;
    std::optional<std::size_t> category, color, brand, price_bucket;
    std::size_t age_days = 0;
};

struct Outfit {
    std::string id;
    std::vector<std::string> item_ids;  // non-empty, no duplicates
    std::optional<std::string> creator_id;
    std::size_t age_days = 0;
};

struct Creator {
    std::string id;
    std::vector<std::string> outfit_ids;  // non-empty
};

// Immutable after load; safe for concurrent readers. Entities are held in
// canonical order (sorted by id) so that indices are stable across
// serialize/load round trips.
class Catalog {
public:
    static Catalog load(const std::filesystem::path& item_path, const std::filesystem::path& outfit_path,
                        const std::filesystem::path& creator_path, const FeatureVocabs& vocabs = {});
    static Catalog from_entities(std::vector<Item> items, std::vector<Outfit> outfits,
                                 std::vector<Creator> creators, const FeatureVocabs& vocabs = {});

    // Canonical JSONL serialization; load(save(...)) reproduces this catalog.
    void save(const std::filesystem::path& item_path, const std::filesystem::path& outfit_path,
              const std::filesystem::path& creator_path) const;

    const std::vector<Item>& items() const { return items_; }
    const std::vector<Outfit>& outfits() const { return outfits_; }
    const std::vector<Creator>& creators() const { return creators_; }
    const FeatureVocabs& vocabs() const { return vocabs_; }

    std::optional<std::size_t> find(EntityType type, const std::string& id) const;
    bool contains(EntityType type, const std::string& id) const { return find(type, id).has_value(); }
    std::size_t count(EntityType type) const;
    const std::string& entity_id(EntityType type, std::size_t index) const;
    std::size_t entity_age_days(EntityType type, std::size_t index) const;

    const Item& item(std::size_t i) const { return items_[i]; }
    const Outfit& outfit(std::size_t i) const { return outfits_[i]; }
    const Creator& creator(std::size_t i) const { return creators_[i]; }

    bool operator==(const Catalog& o) const;

private:
    void build_indices_and_validate();

    std::vector<Item> items_;
    std::vector<Outfit> outfits_;
    std::vector<Creator> creators_;
    std::unordered_map<std::string, std::size_t> item_index_, outfit_index_, creator_index_;
    FeatureVocabs vocabs_;
};

}  // namespace reco::data
