#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "reco/datamodel/catalog.hpp"

namespace reco::data {

struct Interaction {
    std::string user_id;
    std::int64_t timestamp = 0;  // epoch seconds, > 0
    EntityType entity_type = EntityType::item;
    std::string entity_id;
    InteractionType interaction_type = InteractionType::click;
};

struct UserContext {
    std::string user_id;
    std::optional<std::size_t> market, device, gender_intent;
};

struct InteractionLog {
    // Keyed map keeps user iteration order deterministic.
    std::map<std::string, std::vector<Interaction>> by_user;
    std::size_t rejected = 0;  // records dropped for unresolvable entity ids
};

// Per-user sequences sorted by timestamp ascending, ties kept in file order.
// Unresolvable entity ids are counted and skipped; malformed lines are fatal.
InteractionLog load_interactions(const std::filesystem::path& path, const Catalog& catalog);

std::map<std::string, UserContext> load_contexts(const std::filesystem::path& path,
                                                 const FeatureVocabs& vocabs);

inline constexpr std::size_t kRecencyMax = 30;  // buckets 0..30

// Whole days elapsed between action and reference, clipped to recency_max.
std::size_t compute_recency(std::int64_t action_ts, std::int64_t reference_ts,
                            std::size_t recency_max = kRecencyMax);

struct TrainingExample {
    UserContext context;
    std::vector<Interaction> interactions;  // chronological, length <= max_len
    std::vector<std::size_t> recency;       // one bucket per interaction
    // target_ids[p] is the target-vocabulary index of the entity at position
    // p+1 when that entity has the configured target type (and an eligible
    // interaction type); -1 otherwise. target_mask[p] == (target_ids[p] >= 0).
    std::vector<std::int64_t> target_ids;
    std::vector<bool> target_mask;
};

struct ExampleOptions {
    EntityType target_entity_type = EntityType::outfit;
    std::size_t max_len = 50;
    // Which interaction types count as prediction targets; all by default.
    std::set<InteractionType> eligible_target_types = {InteractionType::click, InteractionType::wishlist,
                                                       InteractionType::purchase};
    std::size_t recency_max = kRecencyMax;
};

// Overlapping windows of stride max_len/2; windows whose masks are all false
// are dropped. Empty sequences produce an empty list.
std::vector<TrainingExample> build_training_examples(const std::vector<Interaction>& sequence,
                                                     const UserContext& context, const Catalog& catalog,
                                                     const ExampleOptions& opts, std::int64_t reference_ts);

}  // namespace reco::data
