#include "biastrace/manifest.hpp"

#include <set>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"

namespace biastrace {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::SchemaError, where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_fail(where, std::string("missing key '") + key + "'");
    return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) schema_fail(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) schema_fail(where, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
    if (!v.is_array()) schema_fail(where, "expected a list of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_string()) schema_fail(where, "expected a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

int schema_major(const std::string& version) {
    try {
        return std::stoi(version.substr(0, version.find('.')));
    } catch (const std::exception&) {
        schema_fail("schema_version", "unparseable '" + version + "'");
    }
}

ArtifactPaths parse_artifacts(const json& j, const std::string& where) {
    ArtifactPaths a;
    if (j.is_null()) return a;
    if (!j.is_object()) schema_fail(where, "'artifacts' must be an object");
    a.image = optional_string(j, "image", where);
    a.prompt_embedding = optional_string(j, "prompt_embedding", where);
    a.z0 = optional_string(j, "z0", where);
    a.attention_dir = optional_string(j, "attention_dir", where);
    a.objects = optional_string(j, "objects", where);
    if (auto it = j.find("features"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) schema_fail(where, "'features' must be an object");
        for (const auto& [k, v] : it->items()) {
            if (k != "resnet" && k != "clip" && k != "dino" && k != "patches") {
                schema_fail(where, "unknown feature kind '" + k + "'");
            }
            if (!v.is_string()) schema_fail(where, "feature path must be a string");
            if (!v.get<std::string>().empty()) a.features[k] = v.get<std::string>();
        }
    }
    return a;
}

json artifacts_to_json(const ArtifactPaths& a) {
    json j = json::object();
    j["image"] = a.image;
    if (!a.prompt_embedding.empty()) j["prompt_embedding"] = a.prompt_embedding;
    if (!a.z0.empty()) j["z0"] = a.z0;
    if (!a.attention_dir.empty()) j["attention_dir"] = a.attention_dir;
    if (!a.objects.empty()) j["objects"] = a.objects;
    if (!a.features.empty()) j["features"] = a.features;
    return j;
}

PromptRecord parse_member(const json& j, const std::string& triplet_id, GenderVariant v) {
    const std::string where = "triplet " + triplet_id + "/" + std::string(to_string(v));
    if (!j.is_object()) schema_fail(where, "member must be an object");
    PromptRecord p;
    p.triplet_id = triplet_id;
    p.variant = v;
    p.prompt_id = require_string(j, "prompt_id", where);
    if (p.prompt_id.empty()) schema_fail(where, "empty prompt_id");
    p.text = require_string(j, "text", where);
    const json& seed = require(j, "seed", where);
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        schema_fail(where, "'seed' must be an unsigned integer");
    }
    p.seed = seed.get<std::uint64_t>();
    if (auto it = j.find("tokens"); it != j.end()) p.tokens = string_list(*it, where + "/tokens");
    if (auto it = j.find("nouns"); it != j.end() && !it->is_null()) p.noun_override = string_list(*it, where + "/nouns");
    if (auto it = j.find("artifacts"); it != j.end()) p.artifacts = parse_artifacts(*it, where);
    return p;
}

json member_to_json(const PromptRecord& p) {
    json j;
    j["prompt_id"] = p.prompt_id;
    j["text"] = p.text;
    j["seed"] = p.seed;
    j["tokens"] = p.tokens;
    if (p.noun_override) j["nouns"] = *p.noun_override;
    j["artifacts"] = artifacts_to_json(p.artifacts);
    return j;
}

}  // namespace

nlohmann::json config_to_json(const EngineConfig& c) {
    json j;
    j["theta"] = c.theta;
    j["sigma_human"] = c.sigma_human;
    j["sigma_other"] = c.sigma_other;
    j["diffpix_tau"] = c.diffpix_tau;
    j["min_max_count"] = c.min_max_count;
    j["min_objects_chi"] = c.min_objects_chi;
    j["match_policy"] = std::string(to_string(c.match_policy));
    j["exclude_persons"] = c.exclude_persons;
    j["yates"] = c.yates;
    j["threads"] = c.threads;
    j["seed_base"] = c.seed_base;
    return j;
}

EngineConfig config_from_json(const nlohmann::json& j, EngineConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) schema_fail("config", "must be an object");
    try {
        if (j.contains("theta")) c.theta = j.at("theta").get<double>();
        if (j.contains("sigma_human")) c.sigma_human = j.at("sigma_human").get<double>();
        if (j.contains("sigma_other")) c.sigma_other = j.at("sigma_other").get<double>();
        if (j.contains("diffpix_tau")) c.diffpix_tau = j.at("diffpix_tau").get<double>();
        if (j.contains("min_max_count")) c.min_max_count = j.at("min_max_count").get<std::int64_t>();
        if (j.contains("min_objects_chi")) c.min_objects_chi = j.at("min_objects_chi").get<std::int64_t>();
        if (j.contains("match_policy")) {
            auto p = parse_match_policy(j.at("match_policy").get<std::string>());
            if (!p) schema_fail("config", "unknown match_policy");
            c.match_policy = *p;
        }
        if (j.contains("exclude_persons")) c.exclude_persons = j.at("exclude_persons").get<bool>();
        if (j.contains("yates")) c.yates = j.at("yates").get<bool>();
        if (j.contains("threads")) c.threads = j.at("threads").get<std::uint32_t>();
        if (j.contains("seed_base")) c.seed_base = j.at("seed_base").get<std::int64_t>();
    } catch (const json::exception& e) {
        schema_fail("config", e.what());
    }
    return c;
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& manifest_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_fail("manifest", e.what());
    }
    if (!doc.is_object()) schema_fail("manifest", "top level must be an object");

    DatasetManifest m;
    if (auto it = doc.find("schema_version"); it != doc.end()) {
        if (!it->is_string()) schema_fail("schema_version", "must be a string");
        m.schema_version = it->get<std::string>();
    }
    if (schema_major(m.schema_version) > kManifestSchemaMajor) {
        throw Error(ErrorCode::UnsupportedVersion, "manifest schema " + m.schema_version + " is newer than " +
                                                       std::to_string(kManifestSchemaMajor) + ".x");
    }
    m.name = require_string(doc, "name", "manifest");
    m.root_dir = require_string(doc, "root_dir", "manifest");
    m.resolved_root = (m.root_dir.is_absolute() ? m.root_dir : manifest_dir / m.root_dir).lexically_normal();
    if (!m.resolved_root.has_filename() && m.resolved_root.has_relative_path()) m.resolved_root = m.resolved_root.parent_path();
    const json& spt = require(doc, "seeds_per_triplet", "manifest");
    if (!spt.is_number_integer() || spt.get<std::int64_t>() < 1) {
        schema_fail("manifest", "'seeds_per_triplet' must be a positive integer");
    }
    m.seeds_per_triplet = spt.get<std::uint32_t>();
    if (auto it = doc.find("config"); it != doc.end()) m.config = config_from_json(*it);

    const json& triplets = require(doc, "triplets", "manifest");
    if (!triplets.is_array()) schema_fail("manifest", "'triplets' must be a list");

    std::set<std::string> triplet_ids;
    std::set<std::string> prompt_ids;
    m.triplets.reserve(triplets.size());
    for (const auto& tj : triplets) {
        if (!tj.is_object()) schema_fail("manifest", "triplet entries must be objects");
        TripletRecord t;
        t.triplet_id = require_string(tj, "triplet_id", "triplet");
        if (!triplet_ids.insert(t.triplet_id).second) {
            throw Error(ErrorCode::DuplicateId, "triplet_id '" + t.triplet_id + "'");
        }
        const json& members = require(tj, "members", "triplet " + t.triplet_id);
        if (!members.is_object()) schema_fail("triplet " + t.triplet_id, "'members' must be an object");
        for (const auto& [key, _] : members.items()) {
            if (!parse_variant(key)) schema_fail("triplet " + t.triplet_id, "unknown variant '" + key + "'");
        }
        for (GenderVariant v : kAllVariants) {
            auto it = members.find(std::string(to_string(v)));
            if (it == members.end()) {
                throw Error(ErrorCode::MissingVariant,
                            "triplet '" + t.triplet_id + "' lacks its " + std::string(to_string(v)) + " prompt");
            }
            t.member(v) = parse_member(*it, t.triplet_id, v);
            if (!prompt_ids.insert(t.member(v).prompt_id).second) {
                throw Error(ErrorCode::DuplicateId, "prompt_id '" + t.member(v).prompt_id + "'");
            }
        }
        const auto seed = t.member(GenderVariant::neutral).seed;
        for (GenderVariant v : kAllVariants) {
            if (t.member(v).seed != seed) {
                schema_fail("triplet " + t.triplet_id, "members must share one seed");
            }
        }
        m.triplets.push_back(std::move(t));
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    return parse_manifest(text, path.parent_path());
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    json doc;
    doc["schema_version"] = m.schema_version;
    doc["name"] = m.name;
    doc["root_dir"] = m.root_dir.generic_string();
    doc["seeds_per_triplet"] = m.seeds_per_triplet;
    doc["config"] = config_to_json(m.config);
    json triplets = json::array();
    for (const auto& t : m.triplets) {
        json tj;
        tj["triplet_id"] = t.triplet_id;
        for (GenderVariant v : kAllVariants) tj["members"][std::string(to_string(v))] = member_to_json(t.member(v));
        triplets.push_back(std::move(tj));
    }
    doc["triplets"] = std::move(triplets);
    return doc;
}

std::string dump_manifest(const DatasetManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    write_file_atomic(path, dump_manifest(m));
}

}  // namespace biastrace
