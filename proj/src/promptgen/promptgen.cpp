#include "biastrace/promptgen.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"
#include "biastrace/manifest.hpp"

namespace biastrace::promptgen {
namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string match_case(std::string_view original, std::string_view replacement) {
    std::string out(replacement);
    if (!original.empty() && std::isupper(static_cast<unsigned char>(original.front())) && !out.empty()) {
        out.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front())));
    }
    return out;
}

std::size_t find_word_ci(std::string_view text, std::string_view needle) {
    const std::string lt = lower(text);
    const std::string ln = lower(needle);
    for (std::size_t pos = lt.find(ln); pos != std::string::npos; pos = lt.find(ln, pos + 1)) {
        if (pos == 0 || !is_word_char(lt[pos - 1])) return pos;
    }
    return std::string::npos;
}

}  // namespace

std::vector<std::string> plural_forms(std::string_view word) {
    const std::string w = lower(word);
    std::vector<std::string> out;
    if (w.size() < 3) return out;  // "i", "u", "me", "he": pluralizing them would hit "is", "us", ...
    out.push_back(w + "s");
    out.push_back(w + "es");
    if (ends_with(w, "y")) out.push_back(w.substr(0, w.size() - 1) + "ies");
    if (ends_with(w, "fe")) out.push_back(w.substr(0, w.size() - 2) + "ves");
    else if (ends_with(w, "f")) out.push_back(w.substr(0, w.size() - 1) + "ves");
    if (ends_with(w, "man")) out.push_back(w.substr(0, w.size() - 3) + "men");
    if (w == "child") out.push_back("children");
    return out;
}

HumanWordLexicon make_lexicon(std::set<std::string> gender, std::set<std::string> geography,
                              std::set<std::string> others) {
    HumanWordLexicon lex;
    auto absorb = [&](const std::set<std::string>& src, std::set<std::string>& dst) {
        for (const auto& w : src) {
            const std::string lw = lower(w);
            dst.insert(lw);
            lex.plural_closure.insert(lw);
            for (auto& p : plural_forms(lw)) lex.plural_closure.insert(std::move(p));
        }
    };
    absorb(gender, lex.gender_words);
    absorb(geography, lex.geography_words);
    absorb(others, lex.other_human_words);
    return lex;
}

const HumanWordLexicon& default_lexicon() {
    static const HumanWordLexicon lex = make_lexicon(
        {"woman", "female", "lady", "mother", "girl", "aunt", "wife", "actress", "princess", "waitress", "sister",
         "queen", "pregnant", "daughter", "she", "her", "hers", "herself", "bride", "mom", "man", "male",
         "father", "gentleman", "boy", "uncle", "husband", "actor", "prince", "waiter", "son", "brother", "guy",
         "emperor", "dude", "cowboy", "he", "his", "him", "himself", "groom", "dad", "king"},
        {"american", "asian", "african", "indian", "latino"},
        {"commander", "officer", "cheerleader", "couple", "player", "magician", "model", "entertainer",
         "astronaut", "artist", "student", "politician", "family", "guest", "driver", "friend", "journalist",
         "relative", "hunter", "tourist", "chief", "staff", "soldier", "civilian", "author", "prayer", "pitcher",
         "singer", "kid", "groomsman", "bridemaid", "ceo", "customer", "dancer", "photographer", "teenage",
         "child", "u", "me", "i", "leader", "crew", "athlete", "celebrity", "priest", "designer", "hiker",
         "footballer", "hero", "victim", "manager", "mr", "member", "partner", "myself", "writer"});
    return lex;
}

HumanWordLexicon load_lexicon(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    auto list = [&](const char* key) {
        std::set<std::string> out;
        auto it = doc.find(key);
        if (it == doc.end() || !it->is_array()) {
            throw Error(ErrorCode::SchemaError, path.string() + ": lexicon needs a '" + key + "' list");
        }
        for (const auto& w : *it) {
            if (!w.is_string()) throw Error(ErrorCode::SchemaError, path.string() + ": lexicon entries must be strings");
            out.insert(w.get<std::string>());
        }
        return out;
    };
    return make_lexicon(list("gender"), list("geography"), list("others"));
}

std::vector<WordToken> tokenize(std::string_view text) {
    std::vector<WordToken> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        std::size_t end = i;
        while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;

        std::size_t b = i;
        std::size_t e = end;
        while (b < e && !is_word_char(text[b])) ++b;
        while (e > b && !is_word_char(text[e - 1])) --e;
        std::string_view core = text.substr(b, e - b);
        if (ends_with(core, "'s")) core.remove_suffix(2);
        else if (ends_with(core, "\xE2\x80\x99s")) core.remove_suffix(4);

        // A word made only of punctuation still occupies a position.
        out.push_back({b, core.size(), std::string(core)});
        i = end;
    }
    return out;
}

std::vector<NeutralCaption> select_neutral_captions(const std::vector<std::string>& captions,
                                                    const HumanWordLexicon& lexicon) {
    std::vector<NeutralCaption> out;
    for (const auto& caption : captions) {
        const auto tokens = tokenize(caption);
        std::vector<std::size_t> positions;
        bool human = false;
        for (std::size_t i = 0; i < tokens.size() && !human; ++i) {
            const std::string w = lower(tokens[i].core);
            if (w == "person" || w == "people") {
                positions.push_back(i);
                continue;
            }
            if (lexicon.contains(w)) {
                human = true;
                break;
            }
            // "mother-daughter", "father/son"
            std::size_t start = 0;
            while (start < w.size()) {
                std::size_t stop = start;
                while (stop < w.size() && is_word_char(w[stop])) ++stop;
                if (stop > start && stop - start < w.size() && lexicon.contains(w.substr(start, stop - start))) {
                    human = true;
                    break;
                }
                start = stop + 1;
            }
        }
        if (!human && !positions.empty()) out.push_back({caption, std::move(positions)});
    }
    return out;
}

TripletRecord make_caption_triplet(std::string_view caption, const std::vector<std::size_t>& swap_positions,
                                   std::string triplet_id, std::uint64_t seed) {
    if (swap_positions.empty()) throw Error(ErrorCode::BadSwapPosition, "no swap positions for '" + std::string(caption) + "'");
    const auto tokens = tokenize(caption);
    std::vector<std::size_t> positions = swap_positions;
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

    std::string feminine(caption);
    std::string masculine(caption);
    // Replace right to left so earlier offsets stay valid.
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        if (*it >= tokens.size()) {
            throw Error(ErrorCode::BadSwapPosition, "position " + std::to_string(*it) + " beyond " +
                                                        std::to_string(tokens.size()) + " tokens");
        }
        const WordToken& tok = tokens[*it];
        const std::string w = lower(tok.core);
        std::string_view fem;
        std::string_view masc;
        if (w == "person") {
            fem = "woman";
            masc = "man";
        } else if (w == "people") {
            fem = "women";
            masc = "men";
        } else {
            throw Error(ErrorCode::BadSwapPosition,
                        "token " + std::to_string(*it) + " is '" + tok.core + "', not person/people");
        }
        feminine.replace(tok.core_begin, tok.core_size, match_case(tok.core, fem));
        masculine.replace(tok.core_begin, tok.core_size, match_case(tok.core, masc));
    }

    TripletRecord t;
    t.triplet_id = std::move(triplet_id);
    const std::array<std::string, 3> texts = {std::string(caption), feminine, masculine};
    for (GenderVariant v : kAllVariants) {
        auto& p = t.member(v);
        p.triplet_id = t.triplet_id;
        p.variant = v;
        p.seed = seed;
        p.text = texts[static_cast<std::size_t>(v)];
    }
    return t;
}

TripletRecord make_profession_triplet(std::string_view neutral_prompt, std::string_view profession,
                                      std::string triplet_id, std::uint64_t seed) {
    const std::size_t pos = profession.empty() ? std::string::npos : find_word_ci(neutral_prompt, profession);
    if (pos == std::string::npos) {
        throw Error(ErrorCode::ProfessionNotFound,
                    "'" + std::string(profession) + "' not in '" + std::string(neutral_prompt) + "'");
    }
    std::string feminine(neutral_prompt);
    std::string masculine(neutral_prompt);
    feminine.insert(pos, "female ");
    masculine.insert(pos, "male ");

    TripletRecord t;
    t.triplet_id = std::move(triplet_id);
    const std::array<std::string, 3> texts = {std::string(neutral_prompt), feminine, masculine};
    for (GenderVariant v : kAllVariants) {
        auto& p = t.member(v);
        p.triplet_id = t.triplet_id;
        p.variant = v;
        p.seed = seed;
        p.text = texts[static_cast<std::size_t>(v)];
    }
    return t;
}

DatasetManifest build_prompt_manifest(const std::vector<TripletRecord>& triplets, std::uint32_t seeds_per_triplet,
                                      std::int64_t base_seed, const std::string& name) {
    if (triplets.empty()) throw Error(ErrorCode::EmptyDataset, "no triplets to emit");
    if (seeds_per_triplet == 0) throw Error(ErrorCode::InvalidArgument, "seeds_per_triplet must be >= 1");
    if (base_seed < 0) throw Error(ErrorCode::InvalidArgument, "base seed must be >= 0");

    static constexpr std::array<const char*, 3> kSuffix = {"n", "f", "m"};
    DatasetManifest m;
    m.name = name;
    m.root_dir = ".";
    m.resolved_root = ".";
    m.seeds_per_triplet = seeds_per_triplet;
    m.config.seed_base = base_seed;
    m.triplets.reserve(triplets.size() * seeds_per_triplet);
    for (const auto& base : triplets) {
        for (std::uint32_t k = 0; k < seeds_per_triplet; ++k) {
            TripletRecord t = base;
            t.triplet_id = base.triplet_id + "-s" + std::to_string(k);
            for (GenderVariant v : kAllVariants) {
                auto& p = t.member(v);
                p.triplet_id = t.triplet_id;
                p.prompt_id = t.triplet_id + "-" + kSuffix[static_cast<std::size_t>(v)];
                p.seed = static_cast<std::uint64_t>(base_seed) + k;
                p.artifacts = {};
            }
            m.triplets.push_back(std::move(t));
        }
    }
    return m;
}

DatasetManifest emit_prompt_manifest(const std::vector<TripletRecord>& triplets, std::uint32_t seeds_per_triplet,
                                     std::int64_t base_seed, const std::string& name,
                                     const std::filesystem::path& out_path) {
    DatasetManifest m = build_prompt_manifest(triplets, seeds_per_triplet, base_seed, name);
    save_manifest(m, out_path);
    return m;
}

}  // namespace biastrace::promptgen
