#include "reco/datamodel/interactions.hpp"

#include <algorithm>

#include "reco/common/jsonl.hpp"

namespace reco::data {

InteractionLog load_interactions(const std::filesystem::path& path, const Catalog& catalog) {
    InteractionLog log;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        const std::string where = path.string() + ":" + std::to_string(line);
        Interaction x;
        try {
            x.user_id = rec.at("user_id").get<std::string>();
            x.timestamp = rec.at("timestamp").get<std::int64_t>();
            x.entity_type = entity_type_from_string(rec.at("entity_type").get<std::string>());
            x.entity_id = rec.at("entity_id").get<std::string>();
            x.interaction_type = interaction_type_from_string(rec.at("interaction_type").get<std::string>());
        } catch (const json::exception& e) {
            throw LoadError(where + ": malformed interaction: " + e.what());
        }
        if (x.timestamp <= 0) throw LoadError(where + ": timestamp must be positive");
        if (!catalog.contains(x.entity_type, x.entity_id)) {
            ++log.rejected;
            return;
        }
        log.by_user[x.user_id].push_back(std::move(x));
    });
    for (auto& [user, seq] : log.by_user) {
        std::stable_sort(seq.begin(), seq.end(),
                         [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    }
    return log;
}

std::map<std::string, UserContext> load_contexts(const std::filesystem::path& path,
                                                 const FeatureVocabs& vocabs) {
    std::map<std::string, UserContext> out;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        const std::string where = path.string() + ":" + std::to_string(line);
        UserContext ctx;
        try {
            ctx.user_id = rec.at("user_id").get<std::string>();
        } catch (const json::exception& e) {
            throw LoadError(where + ": malformed context: " + e.what());
        }
        auto take = [&](const char* key, std::size_t vocab) -> std::optional<std::size_t> {
            if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
            if (!rec[key].is_number_unsigned()) {
                throw LoadError(where + ": \"" + key + "\" must be a non-negative integer");
            }
            const std::size_t v = rec[key].get<std::size_t>();
            if (v >= vocab) {
                throw LoadError(where + ": \"" + key + "\" value " + std::to_string(v) +
                                " outside vocabulary of size " + std::to_string(vocab));
            }
            return v;
        };
        ctx.market = take("market", vocabs.market);
        ctx.device = take("device", vocabs.device);
        ctx.gender_intent = take("gender_intent", vocabs.gender_intent);
        out[ctx.user_id] = std::move(ctx);
    });
    return out;
}

std::size_t compute_recency(std::int64_t action_ts, std::int64_t reference_ts, std::size_t recency_max) {
    if (reference_ts < action_ts) {
        throw ConfigError("compute_recency: reference " + std::to_string(reference_ts) +
                          " precedes action " + std::to_string(action_ts));
    }
    const std::size_t days = static_cast<std::size_t>((reference_ts - action_ts) / 86400);
    return std::min(days, recency_max);
}

std::vector<TrainingExample> build_training_examples(const std::vector<Interaction>& sequence,
                                                     const UserContext& context, const Catalog& catalog,
                                                     const ExampleOptions& opts, std::int64_t reference_ts) {
    std::vector<TrainingExample> out;
    if (sequence.empty()) return out;

    const std::size_t stride = std::max<std::size_t>(1, opts.max_len / 2);
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    if (sequence.size() <= opts.max_len) {
        windows.emplace_back(0, sequence.size());
    } else {
        for (std::size_t s = 0;; s += stride) {
            const std::size_t e = std::min(s + opts.max_len, sequence.size());
            windows.emplace_back(s, e);
            if (e == sequence.size()) break;
        }
    }

    for (const auto& [s, e] : windows) {
        TrainingExample ex;
        ex.context = context;
        const std::size_t len = e - s;
        ex.interactions.assign(sequence.begin() + static_cast<std::ptrdiff_t>(s),
                               sequence.begin() + static_cast<std::ptrdiff_t>(e));
        ex.recency.reserve(len);
        for (const Interaction& x : ex.interactions) {
            ex.recency.push_back(compute_recency(x.timestamp, reference_ts, opts.recency_max));
        }
        ex.target_ids.assign(len, -1);
        ex.target_mask.assign(len, false);
        bool any = false;
        for (std::size_t p = 0; p + 1 < len; ++p) {
            const Interaction& next = ex.interactions[p + 1];
            if (next.entity_type != opts.target_entity_type) continue;
            if (!opts.eligible_target_types.count(next.interaction_type)) continue;
            const auto idx = catalog.find(next.entity_type, next.entity_id);
            if (!idx) continue;
            ex.target_ids[p] = static_cast<std::int64_t>(*idx);
            ex.target_mask[p] = true;
            any = true;
        }
        if (any) out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace reco::data
