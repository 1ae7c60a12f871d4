#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "biastrace/types.hpp"

namespace biastrace::promptgen {

/// Words that mark a human subject. A caption mentioning any of them (or a
/// plural form) is not gender neutral.
struct HumanWordLexicon {
    std::set<std::string> gender_words;
    std::set<std::string> geography_words;
    std::set<std::string> other_human_words;
    std::set<std::string> plural_closure;  // lowercase words of all three sets plus plural forms

    bool contains(std::string_view lowercase_word) const { return plural_closure.count(std::string(lowercase_word)) > 0; }
};

/// Builds the closure and lowercases every entry.
HumanWordLexicon make_lexicon(std::set<std::string> gender, std::set<std::string> geography,
                              std::set<std::string> others);
/// The built-in human-word lists.
const HumanWordLexicon& default_lexicon();
/// JSON object with keys "gender", "geography", "others" (lists of strings).
HumanWordLexicon load_lexicon(const std::filesystem::path& path);

/// Plural spellings generated for one lexicon entry (the entry itself excluded).
std::vector<std::string> plural_forms(std::string_view word);

/// A whitespace-delimited word. `core` excludes leading/trailing punctuation
/// and a possessive suffix; offsets index into the original text.
struct WordToken {
    std::size_t core_begin = 0;
    std::size_t core_size = 0;
    std::string core;  // original case
};

std::vector<WordToken> tokenize(std::string_view text);

struct NeutralCaption {
    std::string caption;
    std::vector<std::size_t> swap_positions;
};

std::vector<NeutralCaption> select_neutral_captions(const std::vector<std::string>& captions,
                                                    const HumanWordLexicon& lexicon);

TripletRecord make_caption_triplet(std::string_view caption, const std::vector<std::size_t>& swap_positions,
                                   std::string triplet_id, std::uint64_t seed);

TripletRecord make_profession_triplet(std::string_view neutral_prompt, std::string_view profession,
                                      std::string triplet_id, std::uint64_t seed);

/// Expands every triplet into `seeds_per_triplet` seeded copies (seed = base + k),
/// writes the skeleton manifest to `out_path` and returns it.
DatasetManifest emit_prompt_manifest(const std::vector<TripletRecord>& triplets, std::uint32_t seeds_per_triplet,
                                     std::int64_t base_seed, const std::string& name,
                                     const std::filesystem::path& out_path);

/// Same expansion without touching the filesystem.
DatasetManifest build_prompt_manifest(const std::vector<TripletRecord>& triplets, std::uint32_t seeds_per_triplet,
                                      std::int64_t base_seed, const std::string& name);

}  // namespace biastrace::promptgen
