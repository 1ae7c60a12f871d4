#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "biastrace/types.hpp"

namespace biastrace::objstats {

using Counts = std::map<std::string, std::int64_t>;

/// Default person-word exclusion list for frequency reports.
const std::set<std::string>& person_words();

struct OccurrenceVector {
    std::string prompt_id;
    std::string triplet_id;
    Counts counts;  // absent key means zero
};

struct CooccurrenceTable {
    GenderVariant variant = GenderVariant::neutral;
    Counts totals;
    std::size_t n_prompts = 0;
};

/// Per-prompt occurrence vectors and the variant total. Names are normalized
/// (lowercase, collapsed whitespace) before keying; `exclude` is matched
/// against the normalized names.
std::pair<std::vector<OccurrenceVector>, CooccurrenceTable> count_cooccurrence(
    const std::vector<GenerationArtifact>& artifacts, GenderVariant variant, const std::set<std::string>& exclude = {});

struct PromptObjects {
    std::string prompt_id;
    std::string triplet_id;
    std::vector<std::string> names;  // raw detector labels, repeats allowed
};

/// Same counting with object names already extracted, one entry per prompt.
std::pair<std::vector<OccurrenceVector>, CooccurrenceTable> count_names(const std::vector<PromptObjects>& prompts,
                                                                        GenderVariant variant,
                                                                        const std::set<std::string>& exclude = {});

double counts_cosine(const Counts& a, const Counts& b);

struct CooccurrenceSimilarity {
    std::optional<double> value;  // absent when every pair was skipped
    std::size_t n_pairs = 0;      // pairs contributing to the mean
    std::size_t skipped_empty = 0;
};

/// Mean cosine over pairs matched by triplet_id on the union key space. Pairs
/// where both vectors are empty are skipped; a pair with exactly one empty
/// vector contributes 0.
CooccurrenceSimilarity cooccurrence_similarity(const std::vector<OccurrenceVector>& a,
                                               const std::vector<OccurrenceVector>& b);

/// C_m / (C_m + (n_m / n_f) C_f). Throws NoOccurrence when c_m + c_f == 0.
double bias_score(std::int64_t c_m, std::int64_t c_f, std::size_t n_m, std::size_t n_f);

struct BiasScoreEntry {
    std::string object;
    std::optional<double> score;  // absent when the object never occurs in f or m
    std::int64_t c_m = 0;
    std::int64_t c_f = 0;
    bool supported = false;  // passes the max-co-occurrence filter
};

std::set<std::string> filter_objects(const CooccurrenceTable& table_f, const CooccurrenceTable& table_m,
                                     std::int64_t min_max_count);

/// One entry per object in the union of both tables, sorted by name.
std::vector<BiasScoreEntry> bias_scores(const CooccurrenceTable& table_f, const CooccurrenceTable& table_m,
                                        std::int64_t min_max_count);

struct ChiSquareResult {
    double statistic = 0.0;
    std::int64_t dof = 0;
    double p_value = 1.0;
    bool applied = false;
    std::optional<std::string> skip_reason;
    std::size_t n_objects = 0;  // columns after pruning
    std::vector<std::string> variants;
};

/// Regularized upper incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);
/// P(X >= statistic) for a chi-square variable with `dof` degrees of freedom.
double chi_square_p_value(double statistic, std::int64_t dof);

/// Pearson test on the variants x objects contingency table.
ChiSquareResult chi_square_test(const std::vector<CooccurrenceTable>& tables, std::int64_t min_objects,
                                bool yates = false);

struct Ranking {
    std::vector<BiasScoreEntry> top_masculine;
    std::vector<BiasScoreEntry> top_feminine;
};

/// k highest and k lowest scores among supported entries; ties by larger
/// max(C_m, C_f), then name.
Ranking bias_ranking(const std::vector<BiasScoreEntry>& entries, std::size_t k);

struct ChiSquareSet {
    ChiSquareResult triplet;
    std::map<std::string, ChiSquareResult> pairs;  // "neutral_feminine", "neutral_masculine", "feminine_masculine"
};

/// Chi-square for the triplet and every pair; degenerate tables become
/// applied=false entries instead of errors.
ChiSquareSet chi_square_all(const std::array<CooccurrenceTable, 3>& tables, std::int64_t min_objects, bool yates);

struct ObjStatsReport {
    std::array<CooccurrenceTable, 3> tables;
    std::map<std::string, CooccurrenceSimilarity> similarity;  // keyed by PairKind name
    ChiSquareSet chi_square;
    std::vector<BiasScoreEntry> bias;
    std::int64_t min_max_count = 0;
    bool exclude_persons = false;
};

ObjStatsReport analyze_objects(const DatasetManifest& manifest, const EngineConfig& config);

nlohmann::json to_json(const ChiSquareResult& r);
nlohmann::json to_json(const ChiSquareSet& s);
nlohmann::json to_json(const BiasScoreEntry& e);
nlohmann::json to_json(const ObjStatsReport& r);

ChiSquareResult chi_square_from_json(const nlohmann::json& j);
ChiSquareSet chi_square_set_from_json(const nlohmann::json& j);
BiasScoreEntry bias_entry_from_json(const nlohmann::json& j);
std::vector<BiasScoreEntry> bias_list_from_json(const nlohmann::json& j);

}  // namespace biastrace::objstats
