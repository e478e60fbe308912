#include "reco/embedding/composer.hpp"

#include <numeric>

namespace reco::embed {

using data::Catalog;
using data::EntityType;
using namespace reco::num;

TableNodes bind_tables(Tape& t, EmbeddingTables& tables, bool trainable) {
    auto leaf = [&](Tensor& tensor) {
        Tensor copy = tensor;
        copy.requires_grad = trainable;
        return t.leaf(std::move(copy));
    };
    TableNodes n;
    n.category = leaf(tables.category);
    n.color = leaf(tables.color);
    n.brand = leaf(tables.brand);
    n.price_bucket = leaf(tables.price_bucket);
    n.creator = leaf(tables.creator);
    n.recency = leaf(tables.recency);
    n.age = tables.cfg.use_age_feature ? leaf(tables.age) : kNoBias;
    n.ctx_market = leaf(tables.ctx_market);
    n.ctx_device = leaf(tables.ctx_device);
    n.ctx_gender = leaf(tables.ctx_gender);
    n.positions = leaf(tables.positions);
    n.input_proj = leaf(tables.input_proj);
    n.cfg = &tables.cfg;
    return n;
}

namespace {

// Flat row vector of one lookup.
NodeId lookup_row(Tape& t, NodeId table, std::size_t index, std::size_t width) {
    return reshape(t, embedding_lookup(t, table, {index}), {width});
}

// Average of a feature block over `total` members, counting members without
// the feature as zero vectors.
NodeId averaged_block(Tape& t, NodeId table, const std::vector<std::size_t>& present, std::size_t total,
                      std::size_t width) {
    if (present.empty()) return t.constant(Tensor::zeros({width}));
    NodeId rows = embedding_lookup(t, table, present);
    NodeId mean = mean_axis(t, rows, 0);  // sum / present.size()
    const double factor = static_cast<double>(present.size()) / static_cast<double>(total);
    return factor == 1.0 ? mean : scale(t, mean, factor);
}

struct MemberSet {
    // Item feature indices present across the member items.
    std::vector<std::size_t> category, color, brand, price_bucket;
    std::size_t total = 0;
};

void add_member(MemberSet& ms, const data::Item& it) {
    ++ms.total;
    if (it.category) ms.category.push_back(*it.category);
    if (it.color) ms.color.push_back(*it.color);
    if (it.brand) ms.brand.push_back(*it.brand);
    if (it.price_bucket) ms.price_bucket.push_back(*it.price_bucket);
}

}  // namespace

NodeId embed_entity(Tape& t, const TableNodes& n, const Catalog& catalog, EntityType type,
                    std::size_t index) {
    const EmbeddingConfig& cfg = *n.cfg;
    const std::size_t fd = cfg.feature_dim;

    MemberSet ms;
    std::optional<std::size_t> creator_index;
    std::size_t age_days = 0;

    switch (type) {
        case EntityType::item: {
            add_member(ms, catalog.item(index));
            age_days = catalog.item(index).age_days;
            break;
        }
        case EntityType::outfit: {
            const data::Outfit& of = catalog.outfit(index);
            for (const std::string& iid : of.item_ids) add_member(ms, catalog.item(*catalog.find(EntityType::item, iid)));
            if (of.creator_id) creator_index = catalog.find(EntityType::creator, *of.creator_id);
            age_days = of.age_days;
            break;
        }
        case EntityType::creator: {
            const data::Creator& cr = catalog.creator(index);
            for (const std::string& oid : cr.outfit_ids) {
                const data::Outfit& of = catalog.outfit(*catalog.find(EntityType::outfit, oid));
                for (const std::string& iid : of.item_ids) {
                    add_member(ms, catalog.item(*catalog.find(EntityType::item, iid)));
                }
            }
            creator_index = index;
            break;
        }
    }

    std::vector<NodeId> blocks;
    blocks.push_back(averaged_block(t, n.category, ms.category, ms.total, fd));
    blocks.push_back(averaged_block(t, n.color, ms.color, ms.total, fd));
    blocks.push_back(averaged_block(t, n.brand, ms.brand, ms.total, fd));
    blocks.push_back(averaged_block(t, n.price_bucket, ms.price_bucket, ms.total, fd));
    blocks.push_back(creator_index ? lookup_row(t, n.creator, *creator_index, fd)
                                   : t.constant(Tensor::zeros({fd})));
    if (cfg.use_age_feature) {
        const std::size_t bucket = std::min(age_days, cfg.recency_buckets - 1);
        blocks.push_back(lookup_row(t, n.age, bucket, cfg.age_dim));
    }
    return concat(t, blocks, 0);
}

NodeId interaction_features(Tape& t, const TableNodes& n, const Catalog& catalog,
                            const data::Interaction& ix, std::size_t recency_bucket) {
    const EmbeddingConfig& cfg = *n.cfg;
    const auto index = catalog.find(ix.entity_type, ix.entity_id);
    if (!index) {
        throw LoadError("embed_interaction: unresolvable " + std::string(data::to_string(ix.entity_type)) +
                        " \"" + ix.entity_id + "\"");
    }
    NodeId entity = embed_entity(t, n, catalog, ix.entity_type, *index);

    Tensor onehot = Tensor::zeros({data::kInteractionTypeCount});
    onehot.at(static_cast<std::size_t>(ix.interaction_type)) = 1.0;

    NodeId rec = lookup_row(t, n.recency, recency_bucket, cfg.recency_dim);
    return concat(t, {entity, t.constant(std::move(onehot)), rec}, 0);
}

NodeId embed_interaction(Tape& t, const TableNodes& n, const Catalog& catalog,
                         const data::Interaction& ix, std::size_t recency_bucket) {
    const EmbeddingConfig& cfg = *n.cfg;
    NodeId features = interaction_features(t, n, catalog, ix, recency_bucket);
    NodeId row = matmul(t, reshape(t, features, {1, cfg.concat_width()}), n.input_proj);
    return reshape(t, row, {cfg.d_model});
}

NodeId build_model_input(Tape& t, const TableNodes& n, const Catalog& catalog,
                         const data::UserContext& context,
                         const std::vector<data::Interaction>& interactions,
                         const std::vector<std::size_t>& recency) {
    const EmbeddingConfig& cfg = *n.cfg;
    if (interactions.size() > cfg.max_len) {
        throw ShapeError("build_model_input: " + std::to_string(interactions.size()) +
                         " interactions exceed max_len " + std::to_string(cfg.max_len));
    }
    if (interactions.size() != recency.size()) {
        throw ShapeError("build_model_input: recency list length " + std::to_string(recency.size()) +
                         " != interactions " + std::to_string(interactions.size()));
    }

    NodeId ctx_row = t.constant(Tensor::zeros({cfg.d_model}));
    if (context.market) ctx_row = add(t, ctx_row, lookup_row(t, n.ctx_market, *context.market, cfg.d_model));
    if (context.device) ctx_row = add(t, ctx_row, lookup_row(t, n.ctx_device, *context.device, cfg.d_model));
    if (context.gender_intent) {
        ctx_row = add(t, ctx_row, lookup_row(t, n.ctx_gender, *context.gender_intent, cfg.d_model));
    }

    std::vector<NodeId> rows{ctx_row};
    for (std::size_t i = 0; i < interactions.size(); ++i) {
        rows.push_back(embed_interaction(t, n, catalog, interactions[i], recency[i]));
    }
    NodeId stacked = stack_rows(t, rows);

    std::vector<std::size_t> pos(rows.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    return add(t, stacked, embedding_lookup(t, n.positions, pos));
}

std::vector<double> entity_vector(EmbeddingTables& tables, const Catalog& catalog, EntityType type,
                                  std::size_t index) {
    Tape t;
    TableNodes n = bind_tables(t, tables, false);
    return t.value(embed_entity(t, n, catalog, type, index)).data;
}

}  // namespace reco::embed
