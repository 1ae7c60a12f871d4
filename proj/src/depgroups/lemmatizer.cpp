#include "biastrace/lemmatizer.hpp"

#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace biastrace::depgroups {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

const std::unordered_map<std::string_view, std::string_view>& irregulars() {
    static const std::unordered_map<std::string_view, std::string_view> table = {
        {"women", "woman"},       {"men", "man"},           {"people", "person"},     {"children", "child"},
        {"feet", "foot"},         {"teeth", "tooth"},       {"geese", "goose"},       {"mice", "mouse"},
        {"oxen", "ox"},           {"knives", "knife"},      {"wives", "wife"},        {"lives", "life"},
        {"leaves", "leaf"},       {"loaves", "loaf"},       {"shelves", "shelf"},     {"wolves", "wolf"},
        {"halves", "half"},       {"calves", "calf"},       {"scarves", "scarf"},     {"thieves", "thief"},
        {"gentlemen", "gentleman"}, {"firemen", "fireman"}, {"policemen", "policeman"}, {"businessmen", "businessman"},
        {"houses", "house"},      {"horses", "horse"},      {"vases", "vase"},        {"cases", "case"},
        {"roses", "rose"},        {"noses", "nose"},        {"purses", "purse"},      {"nurses", "nurse"},
        {"courses", "course"},    {"bases", "base"},        {"blouses", "blouse"},    {"cheeses", "cheese"},
        {"ties", "tie"},          {"pies", "pie"},          {"movies", "movie"},      {"cookies", "cookie"},
        {"brownies", "brownie"},  {"zombies", "zombie"},    {"selfies", "selfie"},    {"potatoes", "potato"},
        {"tomatoes", "tomato"},   {"heroes", "hero"},       {"mangoes", "mango"},     {"volcanoes", "volcano"},
        {"sheep", "sheep"},       {"fish", "fish"},         {"deer", "deer"},         {"series", "series"},
        {"species", "species"},   {"news", "news"},         {"clothes", "clothes"},   {"pants", "pants"},
        {"jeans", "jeans"},       {"shorts", "shorts"},     {"scissors", "scissors"}, {"sunglasses", "sunglasses"},
        {"canvas", "canvas"},     {"lens", "lens"},         {"christmas", "christmas"},
    };
    return table;
}

const std::unordered_set<std::string_view>& function_words() {
    static const std::unordered_set<std::string_view> words = {
        // determiners, pronouns, quantifiers
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "all", "both",
        "either", "neither", "no", "another", "other", "such", "many", "much", "few", "several", "more", "most",
        "less", "least", "own", "same", "i", "me", "my", "mine", "we", "us", "our", "you", "your", "he", "him",
        "his", "she", "her", "hers", "it", "its", "they", "them", "their", "theirs", "who", "whom", "whose",
        "which", "what", "where", "when", "while", "there", "here", "something", "someone", "one", "ones",
        // numerals
        "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "dozen", "hundred", "first",
        "second", "third", "single", "couple",
        // prepositions, conjunctions, particles
        "of", "in", "on", "at", "by", "for", "with", "without", "to", "from", "into", "onto", "upon", "over",
        "under", "above", "below", "beneath", "beside", "besides", "between", "among", "through", "across",
        "along", "around", "behind", "near", "next", "inside", "outside", "during", "before", "after", "against",
        "toward", "towards", "up", "down", "off", "out", "about", "like", "as", "than", "via", "per", "within",
        "and", "or", "but", "nor", "so", "yet", "if", "because", "though", "although", "then", "while", "not",
        "very", "too", "also", "just", "only", "together", "away", "back", "still", "even", "really",
        // auxiliaries and frequent verbs
        "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does", "did",
        "can", "could", "will", "would", "shall", "should", "may", "might", "must", "get", "gets", "got",
        "sits", "sit", "stands", "stand", "holds", "hold", "looks", "look", "walks", "walk", "rides", "ride",
        "plays", "play", "wears", "wear", "takes", "take", "makes", "make", "poses", "pose", "goes", "go",
        "runs", "run", "eats", "eat", "drinks", "drink", "uses", "use", "shows", "show", "works", "work",
        "studies", "study", "enjoys", "enjoy", "waits", "wait", "reads", "read", "carries", "carry", "watches",
        "smiles", "smile", "leans", "lean", "lies", "lie", "waves", "prepares", "prepare", "sells", "buy",
        "buys", "cooks", "paints", "writes", "throws", "catches", "kicks", "jumps", "jump", "flies", "swims",
        "seen", "made", "taken", "shown", "held", "worn", "set", "left", "lit",
        // frequent adjectives
        "young", "old", "older", "little", "big", "small", "large", "tall", "short", "long", "new", "great",
        "good", "beautiful", "pretty", "happy", "busy", "empty", "full", "open", "closed", "close", "far",
        "white", "black", "red", "blue", "green", "yellow", "brown", "gray", "grey", "orange", "pink", "purple",
        "dark", "bright", "colorful", "lush", "wooden", "local", "different", "various", "front", "top",
        "bottom", "middle", "side", "other", "public", "modern", "vintage", "traditional", "outdoor", "indoor",
        "sunny", "snowy", "rainy", "cloudy", "hot", "cold", "warm", "fresh", "wet", "dry",
    };
    return words;
}

// -ing / -ed forms that are usually nouns in captions.
const std::unordered_set<std::string_view>& verbal_form_nouns() {
    static const std::unordered_set<std::string_view> words = {
        "building", "ceiling", "clothing", "painting", "wedding", "evening", "morning", "ring", "king",
        "wing", "string", "swing", "spring", "thing", "ping", "sibling", "pudding", "stuffing", "frosting",
        "icing", "railing", "lighting", "parking", "dumpling", "meeting", "drawing", "carving", "sculpting",
        "bed", "shed", "sled", "seed", "weed", "reed", "steed", "speed", "breed", "feed", "need",
    };
    return words;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'' || c == '-';
}

}  // namespace

std::string lemmatize(std::string_view word) {
    if (auto it = irregulars().find(word); it != irregulars().end()) return std::string(it->second);
    if (word.size() >= 5 && ends_with(word, "ies")) return std::string(word.substr(0, word.size() - 3)) + "y";
    for (std::string_view suffix : {"sses", "ses", "xes", "zes", "ches", "shes"}) {
        if (ends_with(word, suffix) && word.size() - 2 >= 3) return std::string(word.substr(0, word.size() - 2));
    }
    if (ends_with(word, "s") && !ends_with(word, "ss") && !ends_with(word, "us") && !ends_with(word, "is") &&
        word.size() - 1 >= 3) {
        return std::string(word.substr(0, word.size() - 1));
    }
    return std::string(word);
}

bool is_function_word(std::string_view w) {
    if (function_words().count(w)) return true;
    if (verbal_form_nouns().count(w)) return false;
    if (w.size() >= 5 && (ends_with(w, "ing") || ends_with(w, "ed"))) return true;
    if (ends_with(w, "ly") && w.size() >= 5) return true;
    return false;
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && (cur.back() == '\'' || cur.back() == '-')) cur.pop_back();
        while (!cur.empty() && (cur.front() == '\'' || cur.front() == '-')) cur.erase(cur.begin());
        if (ends_with(cur, "'s")) cur.resize(cur.size() - 2);
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (char c : text) {
        if (is_word_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::vector<std::string> lemma_tokens(std::string_view name) {
    std::vector<std::string> out;
    for (const auto& w : word_tokens(name)) out.push_back(lemmatize(w));
    return out;
}

}  // namespace biastrace::depgroups
