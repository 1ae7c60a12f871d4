#include "biastrace/disparity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biastrace/bundle.hpp"
#include "biastrace/error.hpp"
#include "biastrace/parallel.hpp"

namespace biastrace::disparity {

using nlohmann::json;

std::string_view to_string(PairKind p) noexcept {
    return p == PairKind::neutral_vs_feminine ? "neutral_vs_feminine" : "neutral_vs_masculine";
}

GenderVariant counterpart(PairKind p) noexcept {
    return p == PairKind::neutral_vs_feminine ? GenderVariant::feminine : GenderVariant::masculine;
}

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::prompt: return "prompt";
        case Metric::denoise: return "denoise";
        case Metric::ssim: return "ssim";
        case Metric::diffpix: return "diffpix";
        case Metric::features: return "features";
        case Metric::split: return "split";
    }
    return "prompt";
}

std::optional<Metric> parse_metric(std::string_view s) noexcept {
    for (Metric m : all_metrics()) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

std::set<Metric> all_metrics() {
    return {Metric::prompt, Metric::denoise, Metric::ssim, Metric::diffpix, Metric::features, Metric::split};
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " elements");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

double cosine_pair_mean(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorCode::LengthMismatch, "pair lists of length " + std::to_string(a.size()) + " and " +
                                                   std::to_string(b.size()));
    }
    std::vector<double> cos(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) cos[i] = cosine(a[i].values(), b[i].values());
    return pairwise_sum(cos) / static_cast<double>(cos.size());
}

std::map<std::string, double> feature_cosine(const std::map<std::string, Tensor>& a,
                                             const std::map<std::string, Tensor>& b) {
    std::map<std::string, double> out;
    if (a.size() != b.size()) throw Error(ErrorCode::KeyMismatch, "feature maps have different key sets");
    for (const auto& [name, ta] : a) {
        auto it = b.find(name);
        if (it == b.end()) throw Error(ErrorCode::KeyMismatch, "feature '" + name + "' missing on one side");
        out[name] = cosine(ta.values(), it->second.values());
    }
    return out;
}

double split_product(const Tensor& a, const Tensor& b) {
    if (a.dims().size() != 2 || b.dims().size() != 2 || a.dims() != b.dims()) {
        throw Error(ErrorCode::ShapeMismatch, "patch tensors must share a P x D shape");
    }
    const std::size_t P = a.dims()[0];
    const std::size_t D = a.dims()[1];
    double best = -1.0;
    for (std::size_t p = 0; p < P; ++p) {
        best = std::max(best, cosine(a.values().subspan(p * D, D), b.values().subspan(p * D, D)));
    }
    return best;
}

namespace {

struct PairValues {
    std::optional<double> prompt, denoise, ssim, diffpix, split;
    std::map<std::string, double> features;
};

struct TripletValues {
    std::array<PairValues, 2> pairs;
};

TripletValues evaluate_triplet(const DatasetManifest& m, const TripletRecord& t, const DisparityOptions& opt) {
    auto want = [&](Metric k) { return opt.metrics.count(k) > 0; };
    LoadOptions lo;
    lo.image = want(Metric::ssim) || want(Metric::diffpix);
    lo.prompt_embedding = want(Metric::prompt);
    lo.denoising_embedding = want(Metric::denoise);
    lo.features = want(Metric::features);
    lo.patches = want(Metric::split);

    const GenerationArtifact neutral = load_artifact(m, t.member(GenderVariant::neutral), lo);
    TripletValues out;
    for (std::size_t k = 0; k < kPairKinds.size(); ++k) {
        const GenerationArtifact other = load_artifact(m, t.member(counterpart(kPairKinds[k])), lo);
        PairValues& pv = out.pairs[k];
        if (lo.prompt_embedding && neutral.prompt_embedding && other.prompt_embedding) {
            pv.prompt = cosine(neutral.prompt_embedding->values(), other.prompt_embedding->values());
        }
        if (lo.denoising_embedding && neutral.denoising_embedding && other.denoising_embedding) {
            pv.denoise = cosine(neutral.denoising_embedding->values(), other.denoising_embedding->values());
        }
        if (lo.image && neutral.image && other.image) {
            const SsimSummary s = ssim_summary(*neutral.image, *other.image, opt.diffpix_tau);
            if (want(Metric::ssim)) pv.ssim = s.mean_ssim;
            if (want(Metric::diffpix)) pv.diffpix = s.diff_pix;
        }
        if (lo.features && !neutral.features.empty() && !other.features.empty()) {
            pv.features = feature_cosine(neutral.features, other.features);
        }
        if (lo.patches && neutral.patch_features && other.patch_features) {
            pv.split = split_product(*neutral.patch_features, *other.patch_features);
        }
    }
    return out;
}

}  // namespace

std::vector<DisparityRow> disparity_table(const DatasetManifest& manifest, const DisparityOptions& options) {
    if (manifest.triplets.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no triplets");
    if (!(options.diffpix_tau > 0.0 && options.diffpix_tau < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "diffpix tau must lie in (0,1)");
    }

    // Reduction order is keyed by triplet_id, not by manifest position.
    std::vector<std::size_t> order(manifest.triplets.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return manifest.triplets[x].triplet_id < manifest.triplets[y].triplet_id;
    });

    std::vector<TripletValues> values(order.size());
    parallel_for(order.size(), options.threads,
                 [&](std::size_t i) { values[i] = evaluate_triplet(manifest, manifest.triplets[order[i]], options); });

    std::vector<DisparityRow> rows;
    for (std::size_t k = 0; k < kPairKinds.size(); ++k) {
        DisparityRow row;
        row.pair = kPairKinds[k];
        row.n_pairs = values.size();
        auto reduce = [&](const std::string& key, auto&& get) -> std::optional<double> {
            std::vector<double> xs;
            xs.reserve(values.size());
            for (const auto& tv : values) {
                if (auto v = get(tv.pairs[k])) xs.push_back(*v);
            }
            if (xs.empty()) return std::nullopt;
            row.cell_counts[key] = xs.size();
            return pairwise_sum(xs) / static_cast<double>(xs.size());
        };
        row.prompt_sim = reduce("prompt", [](const PairValues& p) { return p.prompt; });
        row.denoise_sim = reduce("denoise", [](const PairValues& p) { return p.denoise; });
        row.ssim = reduce("ssim", [](const PairValues& p) { return p.ssim; });
        row.diff_pix = reduce("diffpix", [](const PairValues& p) { return p.diffpix; });
        row.split_product = reduce("split", [](const PairValues& p) { return p.split; });
        std::set<std::string> names;
        for (const auto& tv : values) {
            for (const auto& [name, _] : tv.pairs[k].features) names.insert(name);
        }
        for (const auto& name : names) {
            auto v = reduce(name, [&](const PairValues& p) -> std::optional<double> {
                auto it = p.features.find(name);
                if (it == p.features.end()) return std::nullopt;
                return it->second;
            });
            if (v) row.feature_sims[name] = *v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const DisparityRow& row) {
    auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
    json j;
    j["pair"] = std::string(to_string(row.pair));
    j["prompt_sim"] = opt(row.prompt_sim);
    j["denoise_sim"] = opt(row.denoise_sim);
    j["ssim"] = opt(row.ssim);
    j["diff_pix"] = opt(row.diff_pix);
    j["split_product"] = opt(row.split_product);
    j["feature_sims"] = row.feature_sims;
    j["n_pairs"] = row.n_pairs;
    j["cell_counts"] = row.cell_counts;
    return j;
}

json table_to_json(const std::vector<DisparityRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    return arr;
}

std::vector<DisparityRow> table_from_json(const json& j) {
    std::vector<DisparityRow> rows;
    try {
        for (const auto& rj : j) {
            DisparityRow r;
            const auto pair = rj.at("pair").get<std::string>();
            if (pair == "neutral_vs_feminine") r.pair = PairKind::neutral_vs_feminine;
            else if (pair == "neutral_vs_masculine") r.pair = PairKind::neutral_vs_masculine;
            else throw Error(ErrorCode::SchemaError, "unknown pair kind '" + pair + "'");
            auto opt = [&](const char* key) -> std::optional<double> {
                if (!rj.contains(key) || rj.at(key).is_null()) return std::nullopt;
                return rj.at(key).get<double>();
            };
            r.prompt_sim = opt("prompt_sim");
            r.denoise_sim = opt("denoise_sim");
            r.ssim = opt("ssim");
            r.diff_pix = opt("diff_pix");
            r.split_product = opt("split_product");
            r.feature_sims = rj.at("feature_sims").get<std::map<std::string, double>>();
            r.n_pairs = rj.at("n_pairs").get<std::size_t>();
            if (rj.contains("cell_counts")) r.cell_counts = rj.at("cell_counts").get<std::map<std::string, std::size_t>>();
            rows.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("disparity rows: ") + e.what());
    }
    return rows;
}

}  // namespace biastrace::disparity
