#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace biastrace::depgroups {

/// Rule-cascade noun lemmatizer: irregular table first, then
/// -ies -> -y, -(s|x|z|ch|sh)es -> strip "es", -s -> strip "s" (stem >= 3).
/// Input is expected lowercase.
std::string lemmatize(std::string_view word);

/// Closed-class words plus frequent non-noun content words (verbs,
/// adjectives, numerals) dropped before noun extraction.
bool is_function_word(std::string_view lowercase_word);

/// Lowercased word tokens, split on anything that is not a letter, digit,
/// apostrophe or hyphen; possessive "'s" removed.
std::vector<std::string> word_tokens(std::string_view text);

/// Lemmatized tokens of a (possibly multi-word) object name.
std::vector<std::string> lemma_tokens(std::string_view name);

}  // namespace biastrace::depgroups
