#pragma once

#include <string>
#include <vector>

#include "reco/common/rng.hpp"
#include "reco/datamodel/catalog.hpp"
#include "reco/numerics/tensor.hpp"

namespace reco::embed {

struct EmbeddingConfig {
    std::size_t feature_dim = 16;   // per categorical feature block
    std::size_t recency_dim = 8;
    std::size_t d_model = 64;
    std::size_t max_len = 50;
    bool use_age_feature = false;   // appends an entity age bucket block
    std::size_t age_dim = 8;
    std::size_t recency_buckets = data::kRecencyMax + 1;

    // [category | color | brand | price_bucket | creator] plus optional age.
    std::size_t entity_width() const { return 5 * feature_dim + (use_age_feature ? age_dim : 0); }
    // Entity blocks, interaction-type 1-hot, recency embedding.
    std::size_t concat_width() const { return entity_width() + data::kInteractionTypeCount + recency_dim; }
};

// Learned lookup tables plus the input projection. Interaction type stays a
// fixed 1-hot, so it has no table. Context features are embedded directly at
// model width and summed into the single context row.
struct EmbeddingTables {
    EmbeddingConfig cfg;
    num::Tensor category, color, brand, price_bucket, creator;  // [vocab, feature_dim]
    num::Tensor recency;                                        // [buckets, recency_dim]
    num::Tensor age;                                            // [buckets, age_dim], optional feature
    num::Tensor ctx_market, ctx_device, ctx_gender;             // [vocab, d_model]
    num::Tensor positions;                                      // [max_len+1, d_model]
    num::Tensor input_proj;                                     // [concat_width, d_model]

    static EmbeddingTables init(const EmbeddingConfig& cfg, const data::FeatureVocabs& vocabs,
                                std::size_t n_creators, Rng& rng);

    // Appends (name, tensor) bindings for the optimizer / checkpoint.
    void collect(std::vector<std::pair<std::string, num::Tensor*>>& out);
};

}  // namespace reco::embed
