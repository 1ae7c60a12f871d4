#include "biastrace/bundle.hpp"

#include <cctype>
#include <cstdio>
#include <optional>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"
#include "biastrace/image_io.hpp"
#include "biastrace/parallel.hpp"
#include "biastrace/tensor_io.hpp"

namespace biastrace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string attention_file_name(std::size_t token_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zu.f32t", token_index);
    return buf;
}

std::string normalize_object_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

fs::path resolve_artifact(const DatasetManifest& manifest, const std::string& relative) {
    const fs::path rel(relative);
    if (rel.is_absolute()) throw Error(ErrorCode::SchemaError, "artifact path must be relative: " + relative);
    const fs::path norm = rel.lexically_normal();
    if (norm.empty() || *norm.begin() == "..") {
        throw Error(ErrorCode::SchemaError, "artifact path escapes root_dir: " + relative);
    }
    return manifest.resolved_root / norm;
}

nlohmann::json to_json(const ValidationReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"prompt_id", e.prompt_id}, {"file", e.file}, {"kind", e.kind}, {"message", e.message}});
    }
    return {{"ok", r.ok()}, {"entry_count", r.entries.size()}, {"entries", entries}};
}

namespace {

struct ObjectRecord {
    std::string name;
    double score = 0.0;
    std::string mask;
};

std::vector<ObjectRecord> parse_objects_file(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, path.filename().string() + ": " + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::SchemaError, path.filename().string() + ": objects file must be a list");
    std::vector<ObjectRecord> out;
    for (const auto& o : doc) {
        if (!o.is_object() || !o.contains("name") || !o.contains("mask") || !o["name"].is_string() ||
            !o["mask"].is_string()) {
            throw Error(ErrorCode::SchemaError, path.filename().string() + ": object entries need string 'name' and 'mask'");
        }
        ObjectRecord r;
        r.name = o["name"].get<std::string>();
        r.mask = o["mask"].get<std::string>();
        if (auto it = o.find("score"); it != o.end()) {
            if (!it->is_number()) throw Error(ErrorCode::SchemaError, path.filename().string() + ": 'score' must be a number");
            r.score = it->get<double>();
        }
        if (normalize_object_name(r.name).empty()) throw Error(ErrorCode::SchemaError, path.filename().string() + ": empty object name");
        if (!(r.score >= 0.0 && r.score <= 1.0)) throw Error(ErrorCode::SchemaError, path.filename().string() + ": score outside [0,1]");
        out.push_back(std::move(r));
    }
    return out;
}

std::string kind_of(const Error& e) {
    switch (e.code()) {
        case ErrorCode::NonFiniteValue: return "non_finite";
        case ErrorCode::IoError: return "missing";
        case ErrorCode::SchemaError: return "schema";
        default: return "corrupt";
    }
}

std::string shape_string(const std::vector<std::uint32_t>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
    return s;
}

/// Per-prompt findings plus the shapes needed for triplet-level checks.
struct PromptCheck {
    std::vector<ValidationEntry> entries;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> image_dims;
    std::optional<std::size_t> t_len;
    std::optional<std::size_t> z0_len;
    std::map<std::string, std::vector<std::uint32_t>> feature_dims;
};

PromptCheck check_prompt(const DatasetManifest& m, const PromptRecord& p) {
    PromptCheck out;
    auto add = [&](std::string file, std::string kind, std::string message) {
        out.entries.push_back({p.prompt_id, std::move(file), std::move(kind), std::move(message)});
    };
    auto resolved = [&](const std::string& rel) -> std::optional<fs::path> {
        try {
            return resolve_artifact(m, rel);
        } catch (const Error& e) {
            add(rel, "path_escape", e.what());
            return std::nullopt;
        }
    };
    auto tensor_at = [&](const std::string& rel) -> std::optional<Tensor> {
        auto path = resolved(rel);
        if (!path) return std::nullopt;
        if (!fs::is_regular_file(*path)) {
            add(rel, "missing", "file not found");
            return std::nullopt;
        }
        try {
            return read_tensor(*path);
        } catch (const Error& e) {
            add(rel, kind_of(e), e.what());
            return std::nullopt;
        }
    };

    if (p.artifacts.image.empty()) {
        add("", "missing", "no image recorded");
    } else if (auto path = resolved(p.artifacts.image)) {
        if (!fs::is_regular_file(*path)) {
            add(p.artifacts.image, "missing", "file not found");
        } else {
            try {
                const RgbImage img = read_rgb_png(*path);
                out.image_dims = std::pair{img.width, img.height};
            } catch (const Error& e) {
                add(p.artifacts.image, "corrupt", e.what());
            }
        }
    }

    if (!p.artifacts.prompt_embedding.empty()) {
        if (auto t = tensor_at(p.artifacts.prompt_embedding)) out.t_len = t->size();
    }
    if (!p.artifacts.z0.empty()) {
        if (auto t = tensor_at(p.artifacts.z0)) out.z0_len = t->size();
    }

    if (!p.artifacts.attention_dir.empty()) {
        if (p.tokens.empty()) add(p.artifacts.attention_dir, "schema", "attention_dir set but no tokens recorded");
        std::optional<std::vector<std::uint32_t>> first_dims;
        for (std::size_t i = 0; i < p.tokens.size(); ++i) {
            const std::string rel = (fs::path(p.artifacts.attention_dir) / attention_file_name(i)).generic_string();
            auto t = tensor_at(rel);
            if (!t) continue;
            if (t->dims().size() != 2) {
                add(rel, "dimension_mismatch", "attention map must be 2-D, got " + shape_string(t->dims()));
                continue;
            }
            if (!first_dims) {
                first_dims = t->dims();
            } else if (*first_dims != t->dims()) {
                add(rel, "dimension_mismatch",
                    "attention map " + shape_string(t->dims()) + " differs from " + shape_string(*first_dims));
            }
        }
    }

    if (!p.artifacts.objects.empty()) {
        if (auto path = resolved(p.artifacts.objects)) {
            if (!fs::is_regular_file(*path)) {
                add(p.artifacts.objects, "missing", "file not found");
            } else {
                try {
                    for (const auto& o : parse_objects_file(*path)) {
                        auto mpath = resolved(o.mask);
                        if (!mpath) continue;
                        if (!fs::is_regular_file(*mpath)) {
                            add(o.mask, "missing", "mask file not found");
                            continue;
                        }
                        try {
                            const MaskImage mask = read_mask_png(*mpath);
                            if (out.image_dims && (mask.width != out.image_dims->first || mask.height != out.image_dims->second)) {
                                add(o.mask, "dimension_mismatch",
                                    "mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                                        " differs from image " + std::to_string(out.image_dims->first) + "x" +
                                        std::to_string(out.image_dims->second));
                            }
                        } catch (const Error& e) {
                            add(o.mask, "corrupt", e.what());
                        }
                    }
                } catch (const Error& e) {
                    add(p.artifacts.objects, kind_of(e), e.what());
                }
            }
        }
    }

    for (const auto& [kind, rel] : p.artifacts.features) {
        auto t = tensor_at(rel);
        if (!t) continue;
        if (kind == "patches" && t->dims().size() != 2) {
            add(rel, "dimension_mismatch", "patch features must be P x D, got " + shape_string(t->dims()));
            continue;
        }
        out.feature_dims[kind] = kind == "patches" ? t->dims() : std::vector<std::uint32_t>{std::uint32_t(t->size())};
    }
    return out;
}

}  // namespace

ValidationReport validate_bundle(const DatasetManifest& manifest, unsigned threads) {
    const std::size_t n = manifest.prompt_count();
    std::vector<PromptCheck> checks(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto& t = manifest.triplets[i / 3];
        checks[i] = check_prompt(manifest, t.members[i % 3]);
    });

    ValidationReport report;
    for (std::size_t ti = 0; ti < manifest.triplets.size(); ++ti) {
        const auto& t = manifest.triplets[ti];
        for (std::size_t k = 0; k < 3; ++k) {
            auto& e = checks[ti * 3 + k].entries;
            report.entries.insert(report.entries.end(), e.begin(), e.end());
        }
        auto mismatch = [&](const std::string& what) {
            report.entries.push_back({"", "", "dimension_mismatch", "triplet " + t.triplet_id + ": " + what});
        };
        const auto& n0 = checks[ti * 3];
        for (std::size_t k = 1; k < 3; ++k) {
            const auto& c = checks[ti * 3 + k];
            const std::string who = std::string(to_string(kAllVariants[k]));
            if (n0.image_dims && c.image_dims && *n0.image_dims != *c.image_dims) mismatch(who + " image size differs from neutral");
            if (n0.t_len && c.t_len && *n0.t_len != *c.t_len) mismatch(who + " prompt embedding length differs from neutral");
            if (n0.z0_len && c.z0_len && *n0.z0_len != *c.z0_len) mismatch(who + " z0 size differs from neutral");
            for (const auto& [kind, dims] : c.feature_dims) {
                auto it = n0.feature_dims.find(kind);
                if (it != n0.feature_dims.end() && it->second != dims) mismatch(who + " " + kind + " features differ in shape from neutral");
            }
        }
    }
    return report;
}

GenerationArtifact load_artifact(const DatasetManifest& m, const PromptRecord& p, const LoadOptions& opts) {
    GenerationArtifact a;
    a.prompt = &p;
    const auto& paths = p.artifacts;
    if (opts.image && !paths.image.empty()) a.image = read_rgb_png(resolve_artifact(m, paths.image));
    if (opts.prompt_embedding && !paths.prompt_embedding.empty()) {
        a.prompt_embedding = read_tensor(resolve_artifact(m, paths.prompt_embedding));
    }
    if (opts.denoising_embedding && !paths.z0.empty()) a.denoising_embedding = read_tensor(resolve_artifact(m, paths.z0));
    if (opts.attention && !paths.attention_dir.empty()) {
        std::vector<WordAttention> maps;
        maps.reserve(p.tokens.size());
        for (std::size_t i = 0; i < p.tokens.size(); ++i) {
            const auto rel = (fs::path(paths.attention_dir) / attention_file_name(i)).generic_string();
            maps.push_back({p.tokens[i], read_tensor(resolve_artifact(m, rel))});
        }
        a.word_attention = std::move(maps);
    }
    if (opts.objects && !paths.objects.empty()) {
        for (auto& rec : parse_objects_file(resolve_artifact(m, paths.objects))) {
            ObjectDetection d;
            d.name = rec.name;
            d.score = rec.score;
            if (opts.object_masks) {
                d.mask = read_mask_png(resolve_artifact(m, rec.mask));
                d.degenerate = d.mask.count() == 0;
            }
            a.objects.push_back(std::move(d));
        }
    }
    for (const auto& [kind, rel] : paths.features) {
        if (kind == "patches") {
            if (opts.patches) a.patch_features = read_tensor(resolve_artifact(m, rel));
        } else if (opts.features) {
            a.features.emplace(kind, read_tensor(resolve_artifact(m, rel)));
        }
    }
    return a;
}

}  // namespace biastrace
