#include "reco/embedding/tables.hpp"

namespace reco::embed {

using num::Tensor;

EmbeddingTables EmbeddingTables::init(const EmbeddingConfig& cfg, const data::FeatureVocabs& vocabs,
                                      std::size_t n_creators, Rng& rng) {
    const double sd = 0.02;
    EmbeddingTables t;
    t.cfg = cfg;
    t.category = Tensor::randn({vocabs.category, cfg.feature_dim}, rng, sd);
    t.color = Tensor::randn({vocabs.color, cfg.feature_dim}, rng, sd);
    t.brand = Tensor::randn({vocabs.brand, cfg.feature_dim}, rng, sd);
    t.price_bucket = Tensor::randn({vocabs.price_bucket, cfg.feature_dim}, rng, sd);
    t.creator = Tensor::randn({n_creators, cfg.feature_dim}, rng, sd);
    t.recency = Tensor::randn({cfg.recency_buckets, cfg.recency_dim}, rng, sd);
    t.age = cfg.use_age_feature ? Tensor::randn({cfg.recency_buckets, cfg.age_dim}, rng, sd)
                                : Tensor::zeros({0, cfg.age_dim});
    t.ctx_market = Tensor::randn({vocabs.market, cfg.d_model}, rng, sd);
    t.ctx_device = Tensor::randn({vocabs.device, cfg.d_model}, rng, sd);
    t.ctx_gender = Tensor::randn({vocabs.gender_intent, cfg.d_model}, rng, sd);
    t.positions = Tensor::randn({cfg.max_len + 1, cfg.d_model}, rng, sd);
    t.input_proj = Tensor::randn({cfg.concat_width(), cfg.d_model}, rng, sd);
    return t;
}

void EmbeddingTables::collect(std::vector<std::pair<std::string, num::Tensor*>>& out) {
    out.emplace_back("emb.category", &category);
    out.emplace_back("emb.color", &color);
    out.emplace_back("emb.brand", &brand);
    out.emplace_back("emb.price_bucket", &price_bucket);
    out.emplace_back("emb.creator", &creator);
    out.emplace_back("emb.recency", &recency);
    if (cfg.use_age_feature) out.emplace_back("emb.age", &age);
    out.emplace_back("emb.ctx_market", &ctx_market);
    out.emplace_back("emb.ctx_device", &ctx_device);
    out.emplace_back("emb.ctx_gender", &ctx_gender);
    out.emplace_back("emb.positions", &positions);
    out.emplace_back("emb.input_proj", &input_proj);
}

}  // namespace reco::embed
