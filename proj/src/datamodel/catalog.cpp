#include "reco/datamodel/catalog.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "reco/common/jsonl.hpp"

namespace reco::data {

EntityType entity_type_from_string(const std::string& s) {
    if (s == "item") return EntityType::item;
    if (s == "outfit") return EntityType::outfit;
    if (s == "creator") return EntityType::creator;
    throw LoadError("unknown entity_type \"" + s + "\"");
}

const char* to_string(EntityType t) {
    switch (t) {
        case EntityType::item: return "item";
        case EntityType::outfit: return "outfit";
        case EntityType::creator: return "creator";
    }
    return "?";
}

InteractionType interaction_type_from_string(const std::string& s) {
    if (s == "click") return InteractionType::click;
    if (s == "wishlist") return InteractionType::wishlist;
    if (s == "purchase") return InteractionType::purchase;
    throw LoadError("unknown interaction_type \"" + s + "\"");
}

const char* to_string(InteractionType t) {
    switch (t) {
        case InteractionType::click: return "click";
        case InteractionType::wishlist: return "wishlist";
        case InteractionType::purchase: return "purchase";
    }
    return "?";
}

namespace {

std::optional<std::size_t> opt_feature(const json& rec, const char* key, std::size_t vocab,
                                       const std::string& record_name) {
    if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
    if (!rec[key].is_number_unsigned()) {
        throw LoadError(record_name + ": feature \"" + key + "\" must be a non-negative integer");
    }
    const std::size_t v = rec[key].get<std::size_t>();
    if (v >= vocab) {
        throw LoadError(record_name + ": feature \"" + key + "\" value " + std::to_string(v) +
                        " outside vocabulary of size " + std::to_string(vocab));
    }
    return v;
}

std::string require_id(const json& rec, const std::string& where) {
    if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty()) {
        throw LoadError(where + ": missing or empty \"id\"");
    }
    return rec["id"].get<std::string>();
}

}  // namespace

Catalog Catalog::load(const std::filesystem::path& item_path, const std::filesystem::path& outfit_path,
                      const std::filesystem::path& creator_path, const FeatureVocabs& vocabs) {
    std::vector<Item> items;
    for_each_jsonl(item_path, [&](const json& rec, std::size_t line) {
        const std::string where = item_path.string() + ":" + std::to_string(line);
        Item it;
        it.id = require_id(rec, where);
        const std::string name = "item \"" + it.id + "\" (" + where + ")";
        it.category = opt_feature(rec, "category", vocabs.category, name);
        it.color = opt_feature(rec, "color", vocabs.color, name);
        it.brand = opt_feature(rec, "brand", vocabs.brand, name);
        it.price_bucket = opt_feature(rec, "price_bucket", vocabs.price_bucket, name);
        if (rec.contains("age_days")) {
            if (!rec["age_days"].is_number_unsigned()) throw LoadError(name + ": \"age_days\" must be >= 0");
            it.age_days = rec["age_days"].get<std::size_t>();
        }
        items.push_back(std::move(it));
    });

    std::vector<Outfit> outfits;
    for_each_jsonl(outfit_path, [&](const json& rec, std::size_t line) {
        const std::string where = outfit_path.string() + ":" + std::to_string(line);
        Outfit of;
        of.id = require_id(rec, where);
        const std::string name = "outfit \"" + of.id + "\" (" + where + ")";
        if (!rec.contains("item_ids") || !rec["item_ids"].is_array()) {
            throw LoadError(name + ": missing \"item_ids\" array");
        }
        for (const auto& v : rec["item_ids"]) of.item_ids.push_back(v.get<std::string>());
        if (rec.contains("creator_id") && !rec["creator_id"].is_null()) {
            of.creator_id = rec["creator_id"].get<std::string>();
        }
        if (rec.contains("age_days")) {
            if (!rec["age_days"].is_number_unsigned()) throw LoadError(name + ": \"age_days\" must be >= 0");
            of.age_days = rec["age_days"].get<std::size_t>();
        }
        outfits.push_back(std::move(of));
    });

    std::vector<Creator> creators;
    for_each_jsonl(creator_path, [&](const json& rec, std::size_t line) {
        const std::string where = creator_path.string() + ":" + std::to_string(line);
        Creator cr;
        cr.id = require_id(rec, where);
        if (!rec.contains("outfit_ids") || !rec["outfit_ids"].is_array()) {
            throw LoadError("creator \"" + cr.id + "\" (" + where + "): missing \"outfit_ids\" array");
        }
        for (const auto& v : rec["outfit_ids"]) cr.outfit_ids.push_back(v.get<std::string>());
        creators.push_back(std::move(cr));
    });

    return from_entities(std::move(items), std::move(outfits), std::move(creators), vocabs);
}

Catalog Catalog::from_entities(std::vector<Item> items, std::vector<Outfit> outfits,
                               std::vector<Creator> creators, const FeatureVocabs& vocabs) {
    Catalog c;
    c.items_ = std::move(items);
    c.outfits_ = std::move(outfits);
    c.creators_ = std::move(creators);
    c.vocabs_ = vocabs;
    c.build_indices_and_validate();
    return c;
}

void Catalog::build_indices_and_validate() {
    auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
    std::sort(items_.begin(), items_.end(), by_id);
    std::sort(outfits_.begin(), outfits_.end(), by_id);
    std::sort(creators_.begin(), creators_.end(), by_id);

    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!item_index_.emplace(items_[i].id, i).second) {
            throw LoadError("duplicate item id \"" + items_[i].id + "\"");
        }
    }
    for (std::size_t i = 0; i < outfits_.size(); ++i) {
        if (!outfit_index_.emplace(outfits_[i].id, i).second) {
            throw LoadError("duplicate outfit id \"" + outfits_[i].id + "\"");
        }
    }
    for (std::size_t i = 0; i < creators_.size(); ++i) {
        if (!creator_index_.emplace(creators_[i].id, i).second) {
            throw LoadError("duplicate creator id \"" + creators_[i].id + "\"");
        }
    }

    for (const Outfit& of : outfits_) {
        if (of.item_ids.empty()) throw LoadError("outfit \"" + of.id + "\": empty item_ids");
        std::set<std::string> seen;
        for (const std::string& iid : of.item_ids) {
            if (!item_index_.count(iid)) {
                throw LoadError("outfit \"" + of.id + "\": unknown item \"" + iid + "\"");
            }
            if (!seen.insert(iid).second) {
                throw LoadError("outfit \"" + of.id + "\": duplicate item \"" + iid + "\"");
            }
        }
        if (of.creator_id && !creator_index_.count(*of.creator_id)) {
            throw LoadError("outfit \"" + of.id + "\": unknown creator \"" + *of.creator_id + "\"");
        }
    }
    for (const Creator& cr : creators_) {
        if (cr.outfit_ids.empty()) throw LoadError("creator \"" + cr.id + "\": empty outfit_ids");
        for (const std::string& oid : cr.outfit_ids) {
            if (!outfit_index_.count(oid)) {
                throw LoadError("creator \"" + cr.id + "\": unknown outfit \"" + oid + "\"");
            }
        }
    }
}

void Catalog::save(const std::filesystem::path& item_path, const std::filesystem::path& outfit_path,
                   const std::filesystem::path& creator_path) const {
    std::ostringstream items;
    for (const Item& it : items_) {
        json rec;
        rec["id"] = it.id;
        if (it.category) rec["category"] = *it.category;
        if (it.color) rec["color"] = *it.color;
        if (it.brand) rec["brand"] = *it.brand;
        if (it.price_bucket) rec["price_bucket"] = *it.price_bucket;
        rec["age_days"] = it.age_days;
        items << rec.dump() << "\n";
    }
    write_text_file(item_path, items.str());

    std::ostringstream outfits;
    for (const Outfit& of : outfits_) {
        json rec;
        rec["id"] = of.id;
        rec["item_ids"] = of.item_ids;
        if (of.creator_id) rec["creator_id"] = *of.creator_id;
        rec["age_days"] = of.age_days;
        outfits << rec.dump() << "\n";
    }
    write_text_file(outfit_path, outfits.str());

    std::ostringstream creators;
    for (const Creator& cr : creators_) {
        json rec;
        rec["id"] = cr.id;
        rec["outfit_ids"] = cr.outfit_ids;
        creators << rec.dump() << "\n";
    }
    write_text_file(creator_path, creators.str());
}

std::optional<std::size_t> Catalog::find(EntityType type, const std::string& id) const {
    const auto* index = &item_index_;
    if (type == EntityType::outfit) index = &outfit_index_;
    if (type == EntityType::creator) index = &creator_index_;
    auto it = index->find(id);
    if (it == index->end()) return std::nullopt;
    return it->second;
}

std::size_t Catalog::count(EntityType type) const {
    switch (type) {
        case EntityType::item: return items_.size();
        case EntityType::outfit: return outfits_.size();
        case EntityType::creator: return creators_.size();
    }
    return 0;
}

const std::string& Catalog::entity_id(EntityType type, std::size_t index) const {
    switch (type) {
        case EntityType::item: return items_.at(index).id;
        case EntityType::outfit: return outfits_.at(index).id;
        case EntityType::creator: return creators_.at(index).id;
    }
    return items_.at(index).id;
}

std::size_t Catalog::entity_age_days(EntityType type, std::size_t index) const {
    switch (type) {
        case EntityType::item: return items_.at(index).age_days;
        case EntityType::outfit: return outfits_.at(index).age_days;
        case EntityType::creator: return 0;  // creators carry no age
    }
    return 0;
}

bool Catalog::operator==(const Catalog& o) const {
    auto item_eq = [](const Item& a, const Item& b) {
        return a.id == b.id && a.category == b.category && a.color == b.color && a.brand == b.brand &&
               a.price_bucket == b.price_bucket && a.age_days == b.age_days;
    };
    auto outfit_eq = [](const Outfit& a, const Outfit& b) {
        return a.id == b.id && a.item_ids == b.item_ids && a.creator_id == b.creator_id &&
               a.age_days == b.age_days;
    };
    auto creator_eq = [](const Creator& a, const Creator& b) {
        return a.id == b.id && a.outfit_ids == b.outfit_ids;
    };
    return items_.size() == o.items_.size() && outfits_.size() == o.outfits_.size() &&
           creators_.size() == o.creators_.size() &&
           std::equal(items_.begin(), items_.end(), o.items_.begin(), item_eq) &&
           std::equal(outfits_.begin(), outfits_.end(), o.outfits_.begin(), outfit_eq) &&
           std::equal(creators_.begin(), creators_.end(), o.creators_.begin(), creator_eq);
}

}  // namespace reco::data
