#include "biastrace/objstats.hpp"

#include <algorithm>
#include <cmath>

#include "biastrace/bundle.hpp"
#include "biastrace/disparity.hpp"
#include "biastrace/error.hpp"
#include "biastrace/parallel.hpp"

namespace biastrace::objstats {

using nlohmann::json;

const std::set<std::string>& person_words() {
    static const std::set<std::string> words = {"person", "people", "women", "woman", "men",
                                                "man",    "female", "male",  "girl",  "boy"};
    return words;
}

std::pair<std::vector<OccurrenceVector>, CooccurrenceTable> count_names(const std::vector<PromptObjects>& prompts,
                                                                        GenderVariant variant,
                                                                        const std::set<std::string>& exclude) {
    std::vector<OccurrenceVector> vectors;
    vectors.reserve(prompts.size());
    CooccurrenceTable table;
    table.variant = variant;
    table.n_prompts = prompts.size();
    for (const auto& p : prompts) {
        OccurrenceVector v{p.prompt_id, p.triplet_id, {}};
        for (const auto& raw : p.names) {
            std::string name = normalize_object_name(raw);
            if (name.empty() || exclude.count(name)) continue;
            ++v.counts[name];
        }
        for (const auto& [name, c] : v.counts) table.totals[name] += c;
        vectors.push_back(std::move(v));
    }
    return {std::move(vectors), std::move(table)};
}

std::pair<std::vector<OccurrenceVector>, CooccurrenceTable> count_cooccurrence(
    const std::vector<GenerationArtifact>& artifacts, GenderVariant variant, const std::set<std::string>& exclude) {
    std::vector<PromptObjects> prompts;
    prompts.reserve(artifacts.size());
    for (const auto& a : artifacts) {
        PromptObjects p;
        if (a.prompt) {
            p.prompt_id = a.prompt->prompt_id;
            p.triplet_id = a.prompt->triplet_id;
        }
        for (const auto& o : a.objects) p.names.push_back(o.name);
        prompts.push_back(std::move(p));
    }
    return count_names(prompts, variant, exclude);
}

double counts_cosine(const Counts& a, const Counts& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [k, v] : a) {
        na += double(v) * double(v);
        if (auto it = b.find(k); it != b.end()) dot += double(v) * double(it->second);
    }
    for (const auto& [k, v] : b) nb += double(v) * double(v);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

CooccurrenceSimilarity cooccurrence_similarity(const std::vector<OccurrenceVector>& a,
                                               const std::vector<OccurrenceVector>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " vectors");
    }
    std::map<std::string, const OccurrenceVector*> by_triplet;
    for (const auto& v : b) {
        if (!by_triplet.emplace(v.triplet_id, &v).second) {
            throw Error(ErrorCode::DuplicateId, "triplet '" + v.triplet_id + "' appears twice");
        }
    }
    std::map<std::string, double> cos_by_triplet;
    CooccurrenceSimilarity out;
    for (const auto& v : a) {
        auto it = by_triplet.find(v.triplet_id);
        if (it == by_triplet.end()) {
            throw Error(ErrorCode::LengthMismatch, "triplet '" + v.triplet_id + "' has no counterpart");
        }
        if (v.counts.empty() && it->second->counts.empty()) {
            ++out.skipped_empty;
            continue;
        }
        if (!cos_by_triplet.emplace(v.triplet_id, counts_cosine(v.counts, it->second->counts)).second) {
            throw Error(ErrorCode::DuplicateId, "triplet '" + v.triplet_id + "' appears twice");
        }
    }
    std::vector<double> cos;
    cos.reserve(cos_by_triplet.size());
    for (const auto& [_, c] : cos_by_triplet) cos.push_back(c);
    out.n_pairs = cos.size();
    if (!cos.empty()) out.value = pairwise_sum(cos) / static_cast<double>(cos.size());
    return out;
}

double bias_score(std::int64_t c_m, std::int64_t c_f, std::size_t n_m, std::size_t n_f) {
    if (n_m == 0 || n_f == 0) throw Error(ErrorCode::InvalidArgument, "prompt-set sizes must be positive");
    if (c_m < 0 || c_f < 0) throw Error(ErrorCode::InvalidArgument, "negative co-occurrence");
    if (c_m + c_f == 0) throw Error(ErrorCode::NoOccurrence, "object never occurs in either prompt set");
    const double cm = static_cast<double>(c_m);
    const double ratio = static_cast<double>(n_m) / static_cast<double>(n_f);
    return cm / (cm + ratio * static_cast<double>(c_f));
}

namespace {

std::int64_t count_of(const CooccurrenceTable& t, const std::string& name) {
    auto it = t.totals.find(name);
    return it == t.totals.end() ? 0 : it->second;
}

}  // namespace

std::set<std::string> filter_objects(const CooccurrenceTable& table_f, const CooccurrenceTable& table_m,
                                     std::int64_t min_max_count) {
    if (min_max_count < 0) throw Error(ErrorCode::InvalidArgument, "min_max_count must be >= 0");
    std::set<std::string> names;
    for (const auto& [n, _] : table_f.totals) names.insert(n);
    for (const auto& [n, _] : table_m.totals) names.insert(n);
    std::set<std::string> kept;
    for (const auto& n : names) {
        if (std::max(count_of(table_f, n), count_of(table_m, n)) >= min_max_count) kept.insert(n);
    }
    return kept;
}

std::vector<BiasScoreEntry> bias_scores(const CooccurrenceTable& table_f, const CooccurrenceTable& table_m,
                                        std::int64_t min_max_count) {
    const auto kept = filter_objects(table_f, table_m, min_max_count);
    std::set<std::string> names;
    for (const auto& [n, _] : table_f.totals) names.insert(n);
    for (const auto& [n, _] : table_m.totals) names.insert(n);
    std::vector<BiasScoreEntry> out;
    for (const auto& n : names) {
        BiasScoreEntry e;
        e.object = n;
        e.c_f = count_of(table_f, n);
        e.c_m = count_of(table_m, n);
        if (e.c_m + e.c_f > 0 && table_m.n_prompts > 0 && table_f.n_prompts > 0) {
            e.score = bias_score(e.c_m, e.c_f, table_m.n_prompts, table_f.n_prompts);
            e.supported = kept.count(n) > 0;
        }
        out.push_back(std::move(e));
    }
    return out;
}

Ranking bias_ranking(const std::vector<BiasScoreEntry>& entries, std::size_t k) {
    std::vector<BiasScoreEntry> pool;
    for (const auto& e : entries) {
        if (e.supported && e.score) pool.push_back(e);
    }
    auto tie = [](const BiasScoreEntry& a, const BiasScoreEntry& b) {
        const auto ma = std::max(a.c_m, a.c_f);
        const auto mb = std::max(b.c_m, b.c_f);
        if (ma != mb) return ma > mb;
        return a.object < b.object;
    };
    Ranking r;
    auto by_high = pool;
    std::sort(by_high.begin(), by_high.end(), [&](const auto& a, const auto& b) {
        if (*a.score != *b.score) return *a.score > *b.score;
        return tie(a, b);
    });
    auto by_low = std::move(pool);
    std::sort(by_low.begin(), by_low.end(), [&](const auto& a, const auto& b) {
        if (*a.score != *b.score) return *a.score < *b.score;
        return tie(a, b);
    });
    by_high.resize(std::min(k, by_high.size()));
    by_low.resize(std::min(k, by_low.size()));
    r.top_masculine = std::move(by_high);
    r.top_feminine = std::move(by_low);
    return r;
}

ChiSquareSet chi_square_all(const std::array<CooccurrenceTable, 3>& tables, std::int64_t min_objects, bool yates) {
    auto run = [&](std::vector<CooccurrenceTable> ts) {
        try {
            return chi_square_test(ts, min_objects, yates);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateTable) throw;
            ChiSquareResult r;
            for (const auto& t : ts) r.variants.emplace_back(to_string(t.variant));
            r.applied = false;
            r.skip_reason = e.what();
            return r;
        }
    };
    const auto& n = tables[0];
    const auto& f = tables[1];
    const auto& m = tables[2];
    ChiSquareSet s;
    s.triplet = run({n, f, m});
    s.pairs["neutral_feminine"] = run({n, f});
    s.pairs["neutral_masculine"] = run({n, m});
    s.pairs["feminine_masculine"] = run({f, m});
    return s;
}

ObjStatsReport analyze_objects(const DatasetManifest& manifest, const EngineConfig& config) {
    if (manifest.triplets.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no triplets");
    const std::size_t n = manifest.prompt_count();
    std::vector<PromptObjects> loaded(n);
    LoadOptions lo;
    lo.objects = true;
    parallel_for(n, config.threads, [&](std::size_t i) {
        const auto& p = manifest.triplets[i / 3].members[i % 3];
        const auto a = load_artifact(manifest, p, lo);
        PromptObjects po{p.prompt_id, p.triplet_id, {}};
        for (const auto& o : a.objects) po.names.push_back(o.name);
        loaded[i] = std::move(po);
    });

    static const std::set<std::string> kNone;
    const auto& exclude = config.exclude_persons ? person_words() : kNone;
    ObjStatsReport r;
    r.min_max_count = config.min_max_count;
    r.exclude_persons = config.exclude_persons;
    std::array<std::vector<OccurrenceVector>, 3> vectors;
    for (std::size_t v = 0; v < 3; ++v) {
        std::vector<PromptObjects> per_variant;
        per_variant.reserve(manifest.triplets.size());
        for (std::size_t t = 0; t < manifest.triplets.size(); ++t) per_variant.push_back(loaded[t * 3 + v]);
        auto [vecs, table] = count_names(per_variant, kAllVariants[v], exclude);
        vectors[v] = std::move(vecs);
        r.tables[v] = std::move(table);
    }
    for (auto pk : disparity::kPairKinds) {
        const auto other = static_cast<std::size_t>(disparity::counterpart(pk));
        r.similarity[std::string(disparity::to_string(pk))] = cooccurrence_similarity(vectors[0], vectors[other]);
    }
    r.chi_square = chi_square_all(r.tables, config.min_objects_chi, config.yates);
    r.bias = bias_scores(r.tables[1], r.tables[2], config.min_max_count);
    return r;
}

json to_json(const ChiSquareResult& r) {
    json j;
    j["variants"] = r.variants;
    j["applied"] = r.applied;
    j["n_objects"] = r.n_objects;
    j["statistic"] = r.statistic;
    j["dof"] = r.dof;
    j["p_value"] = r.p_value;
    j["skip_reason"] = r.skip_reason ? json(*r.skip_reason) : json(nullptr);
    return j;
}

json to_json(const ChiSquareSet& s) {
    json j;
    j["triplet"] = to_json(s.triplet);
    for (const auto& [k, v] : s.pairs) j["pairs"][k] = to_json(v);
    return j;
}

json to_json(const BiasScoreEntry& e) {
    json j;
    j["object"] = e.object;
    j["score"] = e.score ? json(*e.score) : json(nullptr);
    j["c_m"] = e.c_m;
    j["c_f"] = e.c_f;
    j["supported"] = e.supported;
    return j;
}

json to_json(const ObjStatsReport& r) {
    json j;
    for (const auto& t : r.tables) {
        j["tables"][std::string(to_string(t.variant))] = {{"n_prompts", t.n_prompts}, {"totals", t.totals}};
    }
    for (const auto& [k, s] : r.similarity) {
        j["similarity"][k] = {{"value", s.value ? json(*s.value) : json(nullptr)},
                              {"n_pairs", s.n_pairs},
                              {"skipped_empty", s.skipped_empty}};
    }
    j["chi_square"] = to_json(r.chi_square);
    json bias = json::array();
    for (const auto& e : r.bias) bias.push_back(to_json(e));
    j["bias_scores"] = std::move(bias);
    j["min_max_count"] = r.min_max_count;
    j["exclude_persons"] = r.exclude_persons;
    return j;
}

ChiSquareResult chi_square_from_json(const json& j) {
    ChiSquareResult r;
    r.variants = j.at("variants").get<std::vector<std::string>>();
    r.applied = j.at("applied").get<bool>();
    r.n_objects = j.at("n_objects").get<std::size_t>();
    r.statistic = j.at("statistic").get<double>();
    r.dof = j.at("dof").get<std::int64_t>();
    r.p_value = j.at("p_value").get<double>();
    if (!j.at("skip_reason").is_null()) r.skip_reason = j.at("skip_reason").get<std::string>();
    return r;
}

ChiSquareSet chi_square_set_from_json(const json& j) {
    ChiSquareSet s;
    s.triplet = chi_square_from_json(j.at("triplet"));
    for (const auto& [k, v] : j.at("pairs").items()) s.pairs[k] = chi_square_from_json(v);
    return s;
}

BiasScoreEntry bias_entry_from_json(const json& j) {
    BiasScoreEntry e;
    e.object = j.at("object").get<std::string>();
    if (!j.at("score").is_null()) e.score = j.at("score").get<double>();
    e.c_m = j.at("c_m").get<std::int64_t>();
    e.c_f = j.at("c_f").get<std::int64_t>();
    e.supported = j.at("supported").get<bool>();
    return e;
}

std::vector<BiasScoreEntry> bias_list_from_json(const json& j) {
    std::vector<BiasScoreEntry> out;
    for (const auto& e : j) out.push_back(bias_entry_from_json(e));
    return out;
}

}  // namespace biastrace::objstats
