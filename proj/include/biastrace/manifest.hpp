#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "biastrace/types.hpp"

namespace biastrace {

inline constexpr int kManifestSchemaMajor = 1;

nlohmann::json config_to_json(const EngineConfig& c);
/// Missing keys keep the values already in `base`.
EngineConfig config_from_json(const nlohmann::json& j, EngineConfig base = {});

/// Parses the manifest document. `manifest_dir` anchors a relative root_dir.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& manifest_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

nlohmann::json manifest_to_json(const DatasetManifest& m);
/// Serialized with sorted keys and two-space indent; byte-stable.
std::string dump_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace biastrace
