#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "biastrace/types.hpp"

namespace biastrace {

// Attention maps live in `attention_dir` as one F32T per recorded token,
// named by zero-padded token index: 000.f32t, 001.f32t, ...
std::string attention_file_name(std::size_t token_index);

struct ValidationEntry {
    std::string prompt_id;  // empty for triplet-level entries
    std::string file;       // path relative to root_dir, empty when no file is involved
    std::string kind;       // missing | corrupt | non_finite | dimension_mismatch | path_escape | schema
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool ok() const noexcept { return entries.empty(); }
};

nlohmann::json to_json(const ValidationReport& r);

/// Checks every referenced artifact. Never throws for bundle problems; each
/// problem becomes one entry. Entry order follows manifest order.
ValidationReport validate_bundle(const DatasetManifest& manifest, unsigned threads = 1);

struct LoadOptions {
    bool image = false;
    bool prompt_embedding = false;
    bool denoising_embedding = false;
    bool attention = false;
    bool objects = false;
    bool object_masks = false;
    bool features = false;  // resnet / clip / dino
    bool patches = false;
};

/// Resolves `relative` against the bundle root, rejecting paths that escape it.
std::filesystem::path resolve_artifact(const DatasetManifest& manifest, const std::string& relative);

/// Loads the requested parts of one prompt's artifacts. Kinds absent from the
/// manifest are left empty; files that fail to parse throw.
GenerationArtifact load_artifact(const DatasetManifest& manifest, const PromptRecord& prompt, const LoadOptions& opts);

/// Lowercases and collapses internal whitespace of a detector label.
std::string normalize_object_name(std::string_view raw);

}  // namespace biastrace
