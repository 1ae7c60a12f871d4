#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biastrace/config.hpp"

namespace biastrace {

enum class GenderVariant : std::uint8_t { neutral = 0, feminine = 1, masculine = 2 };

inline constexpr std::array<GenderVariant, 3> kAllVariants = {
    GenderVariant::neutral, GenderVariant::feminine, GenderVariant::masculine};

std::string_view to_string(GenderVariant v) noexcept;
std::optional<GenderVariant> parse_variant(std::string_view s) noexcept;

/// Dense row-major float32 array. Shape is validated on construction.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::uint32_t> dims, std::vector<float> data);

    const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
    std::span<const float> values() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float at(std::size_t row, std::size_t col) const { return data_[row * dims_.back() + col]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::uint32_t> dims_;
    std::vector<float> data_;
};

/// Binary per-pixel membership. Stored one byte per pixel (0 or 1).
struct MaskImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> bits;

    MaskImage() = default;
    MaskImage(std::uint32_t w, std::uint32_t h) : width(w), height(h), bits(std::size_t(w) * h, 0) {}

    bool inside(std::uint32_t x, std::uint32_t y) const { return bits[std::size_t(y) * width + x] != 0; }
    void set(std::uint32_t x, std::uint32_t y, bool v = true) { bits[std::size_t(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const noexcept;

    friend bool operator==(const MaskImage&, const MaskImage&) = default;
};

/// Interleaved 8-bit RGB.
struct RgbImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(std::uint32_t w, std::uint32_t h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Relative paths to a prompt's exported artifacts; empty string = absent.
struct ArtifactPaths {
    std::string image;
    std::string prompt_embedding;
    std::string z0;
    std::string attention_dir;
    std::string objects;
    std::map<std::string, std::string> features;  // resnet, clip, dino, patches

    friend bool operator==(const ArtifactPaths&, const ArtifactPaths&) = default;
};

struct PromptRecord {
    std::string prompt_id;
    std::string triplet_id;
    GenderVariant variant = GenderVariant::neutral;
    std::string text;
    std::uint64_t seed = 0;
    std::vector<std::string> tokens;
    std::optional<std::vector<std::string>> noun_override;
    ArtifactPaths artifacts;

    friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct TripletRecord {
    std::string triplet_id;
    std::array<PromptRecord, 3> members;  // indexed by GenderVariant

    const PromptRecord& member(GenderVariant v) const { return members[static_cast<std::size_t>(v)]; }
    PromptRecord& member(GenderVariant v) { return members[static_cast<std::size_t>(v)]; }

    friend bool operator==(const TripletRecord&, const TripletRecord&) = default;
};

struct DatasetManifest {
    std::string schema_version = "1.0";
    std::string name;
    std::filesystem::path root_dir;      // as written in the file
    std::filesystem::path resolved_root;  // root_dir resolved against the manifest location
    std::uint32_t seeds_per_triplet = 1;
    EngineConfig config;
    std::vector<TripletRecord> triplets;

    std::size_t prompt_count() const noexcept { return triplets.size() * 3; }
    std::size_t image_count() const noexcept { return prompt_count(); }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct ObjectDetection {
    std::string name;
    std::vector<std::string> lemma_tokens;
    MaskImage mask;
    double score = 0.0;
    bool degenerate = false;  // mask has no inside pixel
};

struct WordAttention {
    std::string token;
    Tensor map;  // H x W
};

/// Everything exported for one prompt. Optional parts are only populated when
/// both present in the bundle and requested by the loader.
struct GenerationArtifact {
    const PromptRecord* prompt = nullptr;
    std::optional<RgbImage> image;
    std::optional<Tensor> prompt_embedding;
    std::optional<Tensor> denoising_embedding;
    std::optional<std::vector<WordAttention>> word_attention;
    std::vector<ObjectDetection> objects;
    std::map<std::string, Tensor> features;
    std::optional<Tensor> patch_features;
};

}  // namespace biastrace
