#pragma once

#include "reco/datamodel/interactions.hpp"
#include "reco/embedding/tables.hpp"
#include "reco/numerics/tape.hpp"

namespace reco::embed {

// Tape bindings for one forward/backward pass over the tables.
struct TableNodes {
    num::NodeId category, color, brand, price_bucket, creator;
    num::NodeId recency, age;
    num::NodeId ctx_market, ctx_device, ctx_gender;
    num::NodeId positions, input_proj;
    const EmbeddingConfig* cfg = nullptr;
};

// trainable=true registers tables as gradient leaves.
TableNodes bind_tables(num::Tape& t, EmbeddingTables& tables, bool trainable);

// Concatenated per-feature blocks for one entity, shape [entity_width].
// Outfits average member item blocks (zeros included for absent features);
// creators average over all items of all their outfits; items are single-item
// outfits with an empty creator block.
num::NodeId embed_entity(num::Tape& t, const TableNodes& n, const data::Catalog& catalog,
                         data::EntityType type, std::size_t index);

// [entity | 1-hot interaction type | recency embedding], shape [concat_width].
num::NodeId interaction_features(num::Tape& t, const TableNodes& n, const data::Catalog& catalog,
                                 const data::Interaction& ix, std::size_t recency_bucket);

// interaction_features projected to d_model by the learned input projection.
num::NodeId embed_interaction(num::Tape& t, const TableNodes& n, const data::Catalog& catalog,
                              const data::Interaction& ix, std::size_t recency_bucket);

// Row 0 carries the summed context embedding, rows 1..L the interactions in
// order; learned positional embeddings are added to every row.
num::NodeId build_model_input(num::Tape& t, const TableNodes& n, const data::Catalog& catalog,
                              const data::UserContext& context,
                              const std::vector<data::Interaction>& interactions,
                              const std::vector<std::size_t>& recency);

// Plain (tape-free) entity vector, used for similarity in re-ranking. Shares
// the tape composition so online and offline features are bit-identical.
std::vector<double> entity_vector(EmbeddingTables& tables, const data::Catalog& catalog,
                                  data::EntityType type, std::size_t index);

}  // namespace reco::embed
