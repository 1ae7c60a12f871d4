#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "biastrace/objstats.hpp"
#include "biastrace/types.hpp"

namespace biastrace::depgroups {

enum class NounProvenance { override_list, builtin_extractor };
std::string_view to_string(NounProvenance p) noexcept;

struct NounSet {
    std::string prompt_id;
    std::set<std::string> nouns;
    NounProvenance provenance = NounProvenance::builtin_extractor;
};

/// Builtin extractor: lowercase, drop function words, lemmatize.
NounSet extract_nouns(std::string_view text);
/// Uses the manifest noun_override when present (lowercased, otherwise verbatim).
NounSet nouns_for(const PromptRecord& prompt);

struct NormalizedMap {
    Tensor map;
    bool degenerate = false;  // constant input; normalized to zeros
};

/// Min-max normalization to [0, 1]. Requires a 2-D map.
NormalizedMap normalize_attention(const Tensor& raw);

/// Inside where value >= theta. The map is H x W; the mask is W wide.
MaskImage binarize_attention(const Tensor& norm, double theta);

/// Nearest-neighbour resampling to (width, height).
MaskImage resample_nearest(const MaskImage& mask, std::uint32_t width, std::uint32_t height);

/// |object ∩ attention| / |object|.
double coverage(const MaskImage& object_mask, const MaskImage& attention_mask);

struct WordAttentionMask {
    std::string token;
    std::string lemma;
    MaskImage mask;  // native attention resolution
    bool degenerate = false;
};

/// Normalized, binarized masks for the tokens whose lemma is a prompt noun.
std::vector<WordAttentionMask> noun_masks(const std::vector<WordAttention>& maps, const NounSet& nouns,
                                          double theta);

/// Default human word list for the lower coverage threshold.
const std::set<std::string>& human_words();

struct Guidance {
    bool guided = false;
    double best_coverage = 0.0;
    std::optional<std::string> matched_word;  // witness when guided
};

/// Masks whose resolution differs from the object mask are resampled first.
Guidance is_guided(const ObjectDetection& object, std::span<const WordAttentionMask> masks, double sigma_human,
                   double sigma_other, const std::set<std::string>& human = human_words());

enum class DependencyGroup {
    explicitly_guided,
    implicitly_guided,
    explicitly_independent,
    implicitly_independent,
    hidden,
};
inline constexpr std::array<DependencyGroup, 5> kAllGroups = {
    DependencyGroup::explicitly_guided, DependencyGroup::implicitly_guided, DependencyGroup::explicitly_independent,
    DependencyGroup::implicitly_independent, DependencyGroup::hidden};
std::string_view to_string(DependencyGroup g) noexcept;
std::optional<DependencyGroup> parse_group(std::string_view s) noexcept;
DependencyGroup group_of(bool is_explicit, bool guided) noexcept;

struct GroupAssignment {
    std::string subject;      // lemmatized object name, or the noun for hidden entries
    std::string object_name;  // normalized detector label; empty for hidden entries
    DependencyGroup group = DependencyGroup::hidden;
    bool is_explicit = false;
    bool guided = false;
    double best_coverage = 0.0;
    std::optional<std::string> matched_word;
    bool empty_mask = false;
    friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

/// Nouns an object name matches under `policy`.
std::vector<std::string> matched_nouns(const std::vector<std::string>& lemmas, const std::set<std::string>& nouns,
                                       MatchPolicy policy);

/// Deterministic: the result is sorted and does not depend on object order.
std::vector<GroupAssignment> classify_objects(std::span<const ObjectDetection> objects,
                                              std::span<const WordAttentionMask> masks, const NounSet& nouns,
                                              const EngineConfig& config);
std::vector<GroupAssignment> classify_objects(const GenerationArtifact& artifact, const NounSet& nouns,
                                              const EngineConfig& config);

struct ImageAssignments {
    std::string prompt_id;
    std::string triplet_id;
    GenderVariant variant = GenderVariant::neutral;
    NounSet nouns;
    std::vector<GroupAssignment> assignments;
    std::size_t degenerate_maps = 0;
};

/// Index 0..4 are the groups, 5 is the noun set.
inline constexpr std::size_t kNounSetIndex = 5;

struct VariantGroupStats {
    GenderVariant variant = GenderVariant::neutral;
    std::size_t n_images = 0;
    std::array<double, 5> image_percent{};
    std::array<std::size_t, 5> distinct{};
    std::size_t noun_count = 0;
    // ratio[a][b] = |A ∩ B| / |A| * 100; absent when A is empty
    std::array<std::array<std::optional<double>, 6>, 6> intersection{};
};

struct GroupObjectStats {
    DependencyGroup group = DependencyGroup::hidden;
    std::array<objstats::CooccurrenceTable, 3> tables;
    objstats::ChiSquareSet chi_square;
    std::vector<objstats::BiasScoreEntry> bias;
};

struct GroupStatsReport {
    std::array<VariantGroupStats, 3> variants;
    std::array<GroupObjectStats, 5> groups;
    std::int64_t min_max_count = 0;
    bool exclude_persons = false;
};

GroupStatsReport group_statistics(const std::vector<ImageAssignments>& images, const EngineConfig& config);

/// |A ∩ B| / |A| * 100; nullopt when A is empty.
std::optional<double> intersection_ratio(const std::set<std::string>& a, const std::set<std::string>& b);

struct GroupsAnalysis {
    std::vector<ImageAssignments> images;  // manifest order
    GroupStatsReport stats;
};

GroupsAnalysis analyze_groups(const DatasetManifest& manifest, const EngineConfig& config);

nlohmann::json to_json(const GroupAssignment& a);
nlohmann::json to_json(const ImageAssignments& i);
nlohmann::json to_json(const GroupStatsReport& r);
nlohmann::json to_json(const GroupsAnalysis& g);

}  // namespace biastrace::depgroups
