#include "biastrace/depgroups.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <tuple>

#include "biastrace/bundle.hpp"
#include "biastrace/error.hpp"
#include "biastrace/lemmatizer.hpp"
#include "biastrace/parallel.hpp"

namespace biastrace::depgroups {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ' ';
        out += p;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::string_view to_string(NounProvenance p) noexcept {
    return p == NounProvenance::override_list ? "override" : "builtin_extractor";
}

NounSet extract_nouns(std::string_view text) {
    NounSet s;
    for (const auto& w : word_tokens(text)) {
        if (is_function_word(w)) continue;
        if (std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) continue;
        s.nouns.insert(lemmatize(w));
    }
    return s;
}

NounSet nouns_for(const PromptRecord& prompt) {
    NounSet s;
    if (prompt.noun_override) {
        s.provenance = NounProvenance::override_list;
        for (const auto& n : *prompt.noun_override) {
            auto v = normalize_object_name(n);
            if (!v.empty()) s.nouns.insert(std::move(v));
        }
    } else {
        s = extract_nouns(prompt.text);
    }
    s.prompt_id = prompt.prompt_id;
    return s;
}

NormalizedMap normalize_attention(const Tensor& raw) {
    if (raw.dims().size() != 2) throw Error(ErrorCode::ShapeMismatch, "attention map must be 2-D");
    const auto v = raw.values();
    double lo = v.empty() ? 0.0 : v[0];
    double hi = lo;
    for (float x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "attention map holds a non-finite value");
        lo = std::min(lo, double(x));
        hi = std::max(hi, double(x));
    }
    std::vector<float> out(v.size(), 0.0f);
    NormalizedMap r;
    if (hi > lo) {
        const double span = hi - lo;
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>((double(v[i]) - lo) / span);
    } else {
        r.degenerate = true;
    }
    r.map = Tensor(raw.dims(), std::move(out));
    return r;
}

MaskImage binarize_attention(const Tensor& norm, double theta) {
    if (norm.dims().size() != 2) throw Error(ErrorCode::ShapeMismatch, "attention map must be 2-D");
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorCode::InvalidArgument, "theta must lie in (0, 1)");
    // Compared at the storage precision so a stored 0.35 meets theta = 0.35.
    const float t = static_cast<float>(theta);
    MaskImage m(norm.dims()[1], norm.dims()[0]);
    const auto v = norm.values();
    for (std::size_t i = 0; i < v.size(); ++i) m.bits[i] = v[i] >= t ? 1 : 0;
    return m;
}

MaskImage resample_nearest(const MaskImage& mask, std::uint32_t width, std::uint32_t height) {
    if (mask.width == width && mask.height == height) return mask;
    if (mask.width == 0 || mask.height == 0) throw Error(ErrorCode::DimensionMismatch, "cannot resample an empty mask");
    MaskImage out(width, height);
    for (std::uint32_t y = 0; y < height; ++y) {
        const auto sy = static_cast<std::uint32_t>((2ull * y + 1) * mask.height / (2ull * height));
        for (std::uint32_t x = 0; x < width; ++x) {
            const auto sx = static_cast<std::uint32_t>((2ull * x + 1) * mask.width / (2ull * width));
            out.bits[std::size_t(y) * width + x] = mask.bits[std::size_t(sy) * mask.width + sx];
        }
    }
    return out;
}

double coverage(const MaskImage& object_mask, const MaskImage& attention_mask) {
    if (object_mask.width != attention_mask.width || object_mask.height != attention_mask.height) {
        throw Error(ErrorCode::DimensionMismatch,
                    "object mask " + std::to_string(object_mask.width) + "x" + std::to_string(object_mask.height) +
                        " vs attention mask " + std::to_string(attention_mask.width) + "x" +
                        std::to_string(attention_mask.height));
    }
    std::size_t inside = 0, both = 0;
    for (std::size_t i = 0; i < object_mask.bits.size(); ++i) {
        if (object_mask.bits[i]) {
            ++inside;
            if (attention_mask.bits[i]) ++both;
        }
    }
    if (inside == 0) throw Error(ErrorCode::EmptyObjectMask, "object mask has no inside pixel");
    return static_cast<double>(both) / static_cast<double>(inside);
}

std::vector<WordAttentionMask> noun_masks(const std::vector<WordAttention>& maps, const NounSet& nouns,
                                          double theta) {
    std::vector<WordAttentionMask> out;
    for (const auto& wa : maps) {
        const std::string lemma = join(lemma_tokens(wa.token));
        if (lemma.empty() || !nouns.nouns.count(lemma)) continue;
        auto norm = normalize_attention(wa.map);
        WordAttentionMask m;
        m.token = lower(wa.token);
        m.lemma = lemma;
        m.degenerate = norm.degenerate;
        m.mask = norm.degenerate ? MaskImage(wa.map.dims()[1], wa.map.dims()[0]) : binarize_attention(norm.map, theta);
        out.push_back(std::move(m));
    }
    return out;
}

const std::set<std::string>& human_words() {
    static const std::set<std::string> words = {"people", "person", "woman", "women", "man", "men"};
    return words;
}

namespace {

bool object_is_human(const ObjectDetection& o, const std::set<std::string>& human) {
    if (human.count(normalize_object_name(o.name))) return true;
    const auto lemmas = o.lemma_tokens.empty() ? lemma_tokens(o.name) : o.lemma_tokens;
    return human.count(join(lemmas)) > 0;
}

bool word_is_human(const WordAttentionMask& m, const std::set<std::string>& human) {
    return human.count(lower(m.token)) > 0 || human.count(m.lemma) > 0;
}

void check_sigma(double s) {
    if (!(s > 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "sigma must lie in (0, 1]");
}

}  // namespace

Guidance is_guided(const ObjectDetection& object, std::span<const WordAttentionMask> masks, double sigma_human,
                   double sigma_other, const std::set<std::string>& human) {
    check_sigma(sigma_human);
    check_sigma(sigma_other);
    Guidance g;
    const bool obj_human = object_is_human(object, human);
    double best_any = 0.0;
    for (const auto& m : masks) {
        const double c = m.mask.width == object.mask.width && m.mask.height == object.mask.height
                             ? coverage(object.mask, m.mask)
                             : coverage(object.mask, resample_nearest(m.mask, object.mask.width, object.mask.height));
        best_any = std::max(best_any, c);
        const double sigma = obj_human && word_is_human(m, human) ? sigma_human : sigma_other;
        if (c >= sigma && (!g.guided || c > g.best_coverage)) {
            g.guided = true;
            g.best_coverage = c;
            g.matched_word = m.token;
        }
    }
    if (!g.guided) g.best_coverage = best_any;
    return g;
}

std::string_view to_string(DependencyGroup g) noexcept {
    switch (g) {
        case DependencyGroup::explicitly_guided: return "explicitly_guided";
        case DependencyGroup::implicitly_guided: return "implicitly_guided";
        case DependencyGroup::explicitly_independent: return "explicitly_independent";
        case DependencyGroup::implicitly_independent: return "implicitly_independent";
        case DependencyGroup::hidden: return "hidden";
    }
    return "hidden";
}

std::optional<DependencyGroup> parse_group(std::string_view s) noexcept {
    for (auto g : kAllGroups) {
        if (to_string(g) == s) return g;
    }
    return std::nullopt;
}

DependencyGroup group_of(bool is_explicit, bool guided) noexcept {
    if (is_explicit) return guided ? DependencyGroup::explicitly_guided : DependencyGroup::explicitly_independent;
    return guided ? DependencyGroup::implicitly_guided : DependencyGroup::implicitly_independent;
}

std::vector<std::string> matched_nouns(const std::vector<std::string>& lemmas, const std::set<std::string>& nouns,
                                       MatchPolicy policy) {
    std::vector<std::string> out;
    if (lemmas.empty()) return out;
    switch (policy) {
        case MatchPolicy::full_string:
            if (lemmas.size() == 1 && nouns.count(lemmas[0])) out.push_back(lemmas[0]);
            break;
        case MatchPolicy::head_noun:
            if (nouns.count(lemmas.back())) out.push_back(lemmas.back());
            break;
        case MatchPolicy::any_token:
            for (const auto& l : lemmas) {
                if (nouns.count(l) && std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
            }
            break;
    }
    return out;
}

namespace {

bool assignment_less(const GroupAssignment& a, const GroupAssignment& b) {
    const bool ha = a.group == DependencyGroup::hidden;
    const bool hb = b.group == DependencyGroup::hidden;
    return std::tie(ha, a.subject, a.object_name, a.group, a.best_coverage, a.matched_word, a.empty_mask) <
           std::tie(hb, b.subject, b.object_name, b.group, b.best_coverage, b.matched_word, b.empty_mask);
}

}  // namespace

std::vector<GroupAssignment> classify_objects(std::span<const ObjectDetection> objects,
                                              std::span<const WordAttentionMask> masks, const NounSet& nouns,
                                              const EngineConfig& config) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<WordAttentionMask>> resampled;
    auto masks_for = [&](const MaskImage& m) -> std::span<const WordAttentionMask> {
        auto key = std::make_pair(m.width, m.height);
        auto it = resampled.find(key);
        if (it == resampled.end()) {
            std::vector<WordAttentionMask> r(masks.begin(), masks.end());
            for (auto& w : r) w.mask = resample_nearest(w.mask, m.width, m.height);
            it = resampled.emplace(key, std::move(r)).first;
        }
        return it->second;
    };

    std::vector<GroupAssignment> out;
    std::set<std::string> matched;
    for (const auto& o : objects) {
        GroupAssignment a;
        a.object_name = normalize_object_name(o.name);
        const auto lemmas = o.lemma_tokens.empty() ? lemma_tokens(o.name) : o.lemma_tokens;
        a.subject = join(lemmas);
        const auto hits = matched_nouns(lemmas, nouns.nouns, config.match_policy);
        matched.insert(hits.begin(), hits.end());
        a.is_explicit = !hits.empty();
        if (o.mask.count() == 0) {
            a.empty_mask = true;
        } else {
            const auto g = is_guided(o, masks_for(o.mask), config.sigma_human, config.sigma_other);
            a.guided = g.guided;
            a.best_coverage = g.best_coverage;
            a.matched_word = g.matched_word;
        }
        a.group = group_of(a.is_explicit, a.guided);
        out.push_back(std::move(a));
    }
    for (const auto& n : nouns.nouns) {
        if (matched.count(n)) continue;
        GroupAssignment h;
        h.subject = n;
        h.group = DependencyGroup::hidden;
        out.push_back(std::move(h));
    }
    std::sort(out.begin(), out.end(), assignment_less);
    return out;
}

std::vector<GroupAssignment> classify_objects(const GenerationArtifact& artifact, const NounSet& nouns,
                                              const EngineConfig& config) {
    std::vector<WordAttentionMask> masks;
    if (artifact.word_attention) masks = noun_masks(*artifact.word_attention, nouns, config.theta);
    return classify_objects(artifact.objects, masks, nouns, config);
}

std::optional<double> intersection_ratio(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty()) return std::nullopt;
    std::size_t both = 0;
    for (const auto& x : a) both += b.count(x);
    return 100.0 * static_cast<double>(both) / static_cast<double>(a.size());
}

GroupStatsReport group_statistics(const std::vector<ImageAssignments>& images, const EngineConfig& config) {
    GroupStatsReport r;
    r.min_max_count = config.min_max_count;
    r.exclude_persons = config.exclude_persons;
    static const std::set<std::string> kNone;
    const auto& exclude = config.exclude_persons ? objstats::person_words() : kNone;

    for (std::size_t v = 0; v < 3; ++v) {
        std::vector<const ImageAssignments*> mine;
        for (const auto& im : images) {
            if (im.variant == kAllVariants[v]) mine.push_back(&im);
        }
        std::sort(mine.begin(), mine.end(), [](const auto* a, const auto* b) {
            return std::tie(a->triplet_id, a->prompt_id) < std::tie(b->triplet_id, b->prompt_id);
        });

        auto& vs = r.variants[v];
        vs.variant = kAllVariants[v];
        vs.n_images = mine.size();
        std::array<std::set<std::string>, 6> sets;
        std::array<std::size_t, 5> with_group{};
        std::array<std::vector<objstats::PromptObjects>, 5> per_group;
        for (auto& pg : per_group) pg.reserve(mine.size());
        for (const auto* im : mine) {
            std::array<bool, 5> present{};
            std::array<objstats::PromptObjects, 5> po;
            for (auto& p : po) {
                p.prompt_id = im->prompt_id;
                p.triplet_id = im->triplet_id;
            }
            for (const auto& a : im->assignments) {
                const auto g = static_cast<std::size_t>(a.group);
                present[g] = true;
                sets[g].insert(a.subject);
                po[g].names.push_back(a.subject);
            }
            sets[kNounSetIndex].insert(im->nouns.nouns.begin(), im->nouns.nouns.end());
            for (std::size_t g = 0; g < 5; ++g) {
                if (present[g]) ++with_group[g];
                per_group[g].push_back(std::move(po[g]));
            }
        }
        for (std::size_t g = 0; g < 5; ++g) {
            vs.image_percent[g] = mine.empty() ? 0.0 : 100.0 * double(with_group[g]) / double(mine.size());
            vs.distinct[g] = sets[g].size();
            r.groups[g].group = kAllGroups[g];
            r.groups[g].tables[v] = objstats::count_names(per_group[g], kAllVariants[v], exclude).second;
        }
        vs.noun_count = sets[kNounSetIndex].size();
        for (std::size_t a = 0; a < 6; ++a) {
            for (std::size_t b = 0; b < 6; ++b) vs.intersection[a][b] = intersection_ratio(sets[a], sets[b]);
        }
    }
    for (auto& gs : r.groups) {
        gs.chi_square = objstats::chi_square_all(gs.tables, config.min_objects_chi, config.yates);
        gs.bias = objstats::bias_scores(gs.tables[1], gs.tables[2], config.min_max_count);
    }
    return r;
}

GroupsAnalysis analyze_groups(const DatasetManifest& manifest, const EngineConfig& config) {
    if (manifest.triplets.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no triplets");
    config.validate();
    const std::size_t n = manifest.prompt_count();
    GroupsAnalysis out;
    out.images.resize(n);
    LoadOptions lo;
    lo.objects = true;
    lo.object_masks = true;
    lo.attention = true;
    parallel_for(n, config.threads, [&](std::size_t i) {
        const auto& p = manifest.triplets[i / 3].members[i % 3];
        const auto art = load_artifact(manifest, p, lo);
        ImageAssignments im;
        im.prompt_id = p.prompt_id;
        im.triplet_id = p.triplet_id;
        im.variant = p.variant;
        im.nouns = nouns_for(p);
        std::vector<WordAttentionMask> masks;
        if (art.word_attention) masks = noun_masks(*art.word_attention, im.nouns, config.theta);
        for (const auto& m : masks) im.degenerate_maps += m.degenerate ? 1 : 0;
        im.assignments = classify_objects(art.objects, masks, im.nouns, config);
        out.images[i] = std::move(im);
    });
    out.stats = group_statistics(out.images, config);
    return out;
}

namespace {

std::string set_label(std::size_t i) {
    return i == kNounSetIndex ? std::string("nouns") : std::string(to_string(kAllGroups[i]));
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const GroupAssignment& a) {
    json j;
    j["subject"] = a.subject;
    j["object"] = a.group == DependencyGroup::hidden ? json(nullptr) : json(a.object_name);
    j["group"] = to_string(a.group);
    j["explicit"] = a.is_explicit;
    j["guided"] = a.guided;
    j["best_coverage"] = a.best_coverage;
    j["matched_word"] = a.matched_word ? json(*a.matched_word) : json(nullptr);
    j["empty_mask"] = a.empty_mask;
    return j;
}

json to_json(const ImageAssignments& i) {
    json j;
    j["prompt_id"] = i.prompt_id;
    j["triplet_id"] = i.triplet_id;
    j["variant"] = to_string(i.variant);
    j["nouns"] = i.nouns.nouns;
    j["noun_provenance"] = to_string(i.nouns.provenance);
    j["degenerate_maps"] = i.degenerate_maps;
    json as = json::array();
    for (const auto& a : i.assignments) as.push_back(to_json(a));
    j["assignments"] = std::move(as);
    return j;
}

json to_json(const GroupStatsReport& r) {
    json j;
    for (const auto& vs : r.variants) {
        json v;
        v["n_images"] = vs.n_images;
        for (std::size_t g = 0; g < 5; ++g) {
            v["image_percent"][set_label(g)] = vs.image_percent[g];
            v["distinct"][set_label(g)] = vs.distinct[g];
        }
        v["noun_count"] = vs.noun_count;
        for (std::size_t a = 0; a < 6; ++a) {
            for (std::size_t b = 0; b < 6; ++b) v["intersection"][set_label(a)][set_label(b)] = opt(vs.intersection[a][b]);
        }
        j["variants"][std::string(to_string(vs.variant))] = std::move(v);
    }
    for (const auto& gs : r.groups) {
        json g;
        for (const auto& t : gs.tables) {
            g["tables"][std::string(to_string(t.variant))] = {{"n_prompts", t.n_prompts}, {"totals", t.totals}};
        }
        g["chi_square"] = objstats::to_json(gs.chi_square);
        json bias = json::array();
        for (const auto& e : gs.bias) bias.push_back(objstats::to_json(e));
        g["bias_scores"] = std::move(bias);
        j["groups"][std::string(to_string(gs.group))] = std::move(g);
    }
    j["min_max_count"] = r.min_max_count;
    j["exclude_persons"] = r.exclude_persons;
    return j;
}

json to_json(const GroupsAnalysis& g) {
    json j;
    json images = json::array();
    for (const auto& im : g.images) images.push_back(to_json(im));
    j["images"] = std::move(images);
    j["statistics"] = to_json(g.stats);
    return j;
}

}  // namespace biastrace::depgroups
