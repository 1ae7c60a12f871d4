// Acceptance suite. Each criterion prints exactly one line:
//   PASS <name> (<seconds>s) <detail>
//   FAIL <name> (<seconds>s) <first failures>
// Usage: acceptance [criterion...]   (no argument runs all of them)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "biastrace/atomic_file.hpp"
#include "biastrace/bundle.hpp"
#include "biastrace/cli.hpp"
#include "biastrace/depgroups.hpp"
#include "biastrace/disparity.hpp"
#include "biastrace/lemmatizer.hpp"
#include "biastrace/objstats.hpp"
#include "synth.hpp"

using namespace biastrace;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tolerances and budgets.
constexpr double kIdentityTol = 1e-9;
constexpr double kIdentityBudget = 10.0;
constexpr double kChiTol = 1e-3;
constexpr double kChiTolTight = 1e-4;
constexpr double kChiOracleTol = 1e-10;
constexpr double kFixtureBudget = 30.0;
constexpr double kHandTol = 1e-9;
constexpr double kPerformanceBudget = 300.0;
constexpr std::size_t kPerformanceTriplets = 5000;  // two pairs each
constexpr std::uint32_t kPerformanceSize = 512;
constexpr std::size_t kClassificationInstances = 10000;

struct Outcome {
    std::vector<std::string> failures;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void near(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol)) {
            std::ostringstream s;
            s.precision(12);
            s << what << ": got " << got << ", want " << want << " +- " << tol;
            failures.push_back(s.str());
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path source_dir() { return fs::path(BIASTRACE_SOURCE_DIR); }

int run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

// ---------------------------------------------------------------- identity

void metric_identity(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    synth::Rng rng(20240601);
    for (int f = 0; f < 100; ++f) {
        const auto w = static_cast<std::uint32_t>(11 + rng.below(118));
        const auto h = static_cast<std::uint32_t>(11 + rng.below(118));
        const auto img = f % 2 ? synth::random_image(rng, w, h) : synth::smooth_image(rng, w, h, 20);
        const auto tag = "fixture " + std::to_string(f);
        o.near(disparity::mean_ssim(img, img), 1.0, kIdentityTol, tag + " mean_ssim");
        o.check(disparity::diff_pix(img, img, 0.5) == 0.0, tag + " diff_pix");

        const auto t = synth::random_vector(rng, 1 + rng.below(1024));
        o.near(disparity::cosine(t, t), 1.0, kIdentityTol, tag + " prompt cosine");
        const Tensor z({4, 8, 8}, synth::random_vector(rng, 256));
        o.near(disparity::cosine_pair_mean({z}, {z}), 1.0, kIdentityTol, tag + " denoising cosine");
        std::map<std::string, Tensor> feats;
        for (const char* k : {"resnet", "clip", "dino"}) {
            const auto n = static_cast<std::uint32_t>(16 + rng.below(2048));
            feats[k] = Tensor({n}, synth::random_vector(rng, n));
        }
        for (const auto& [k, v] : disparity::feature_cosine(feats, feats)) o.near(v, 1.0, kIdentityTol, tag + " " + k);
        const auto p = static_cast<std::uint32_t>(1 + rng.below(64)), d = static_cast<std::uint32_t>(1 + rng.below(64));
        const Tensor patches({p, d}, synth::random_vector(rng, std::size_t(p) * d));
        o.near(disparity::split_product(patches, patches), 1.0, kIdentityTol, tag + " split_product");
    }
    const double s = seconds_since(t0);
    o.check(s < kIdentityBudget, "runtime " + std::to_string(s) + "s exceeds 10s");
    o.detail = "100 fixtures";
}

// -------------------------------------------------------------- chi-square

// Closed-form survival function for integer dof, independent of the gamma
// series / continued fraction used by the engine.
double oracle_p(double x, int dof) {
    const double h = x / 2;
    if (dof % 2 == 0) {
        double term = 1, sum = 1;
        for (int k = 1; k < dof / 2; ++k) {
            term *= h / k;
            sum += term;
        }
        return std::exp(-h) * sum;
    }
    double sum = std::erfc(std::sqrt(h));
    double term = std::sqrt(h) / std::tgamma(1.5);
    for (int k = 1; k <= (dof - 1) / 2; ++k) {
        sum += std::exp(-h) * term;
        term *= h / (k + 0.5);
    }
    return sum;
}

void chi_square(Outcome& o) {
    using objstats::chi_square_p_value;
    o.near(chi_square_p_value(3.841, 1), 0.05, kChiTol, "p(3.841, 1)");
    o.near(chi_square_p_value(5.991, 2), 0.05, kChiTol, "p(5.991, 2)");
    o.near(chi_square_p_value(6.6667, 1), 0.00982, kChiTolTight, "p(6.6667, 1)");

    // oracle written from the closed forms first
    o.near(oracle_p(3.841, 1), 0.05, kChiTol, "oracle p(3.841, 1)");
    o.near(oracle_p(5.991, 2), 0.05, kChiTol, "oracle p(5.991, 2)");
    o.near(oracle_p(6.6667, 1), 0.00982, kChiTolTight, "oracle p(6.6667, 1)");

    // published quantile table: (dof, critical value at 0.05, at 0.01)
    const double table[][3] = {{1, 3.841, 6.635},   {2, 5.991, 9.210},   {3, 7.815, 11.345},
                               {4, 9.488, 13.277},  {5, 11.070, 15.086}, {10, 18.307, 23.209},
                               {20, 31.410, 37.566}, {30, 43.773, 50.892}};
    for (const auto& r : table) {
        const auto dof = static_cast<int>(r[0]);
        o.near(chi_square_p_value(r[1], dof), 0.05, kChiTol, "table 0.05 dof " + std::to_string(dof));
        o.near(chi_square_p_value(r[2], dof), 0.01, kChiTol, "table 0.01 dof " + std::to_string(dof));
    }

    // Pearson statistic on the 2x2 example
    const objstats::CooccurrenceTable f{GenderVariant::feminine, {{"a", 10}, {"b", 20}}, 1};
    const objstats::CooccurrenceTable m{GenderVariant::masculine, {{"a", 20}, {"b", 10}}, 1};
    const auto r = objstats::chi_square_test({f, m}, 1);
    o.near(r.statistic, 20.0 / 3.0, 1e-9, "2x2 statistic");
    o.near(r.p_value, 0.00982, kChiTolTight, "2x2 p-value");

    synth::Rng rng(1234);
    std::size_t checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const int dof = static_cast<int>(1 + rng.below(150));
        const double x1 = rng.uniform() * (3.0 * dof + 40.0);
        const double x2 = x1 + 1e-3 + rng.uniform() * 20.0;
        const double p1 = chi_square_p_value(x1, dof), p2 = chi_square_p_value(x2, dof);
        const std::string tag = "dof " + std::to_string(dof) + " x " + std::to_string(x1) + " p " + std::to_string(p1) + " " + std::to_string(p2);
        o.check(p1 >= 0.0 && p1 <= 1.0, tag + " p out of [0,1]");
        // strict only where doubles can tell the two apart
        const bool interior = p2 > 1e-300 && p1 < 1.0 - 1e-12;
        o.check(interior ? p1 > p2 : p1 >= p2, tag + " not decreasing");
        o.check(chi_square_p_value(0.0, dof) == 1.0, tag + " p(0) != 1");
        o.near(p1, oracle_p(x1, dof), kChiOracleTol, tag + " vs oracle");
        ++checked;
    }
    o.detail = std::to_string(checked) + " monotonicity pairs";
}

// ---------------------------------------------------------------- fixture

struct HandTriplet {
    std::vector<std::string> g1, g2, g3, g4, hidden;  // neutral image, human subject excluded
};

// Expected assignments per triplet (the human subject is always G1).
const HandTriplet kHand[12] = {
    {{"horse"}, {"saddle"}, {"beach"}, {"sky"}, {}},
    {{"dog"}, {"leash"}, {"park"}, {"grass"}, {}},
    {{}, {"basket"}, {"park"}, {"grass"}, {"daytime", "picnic"}},
    {{"umbrella"}, {}, {"street"}, {"building"}, {}},
    {{"book"}, {}, {"bench"}, {"tree"}, {}},
    {{"table"}, {"plate"}, {"food"}, {"chair"}, {}},
    {{"guitar"}, {"microphone"}, {"stage"}, {"crowd"}, {}},
    {{"kitchen"}, {"pot"}, {}, {"cabinet"}, {}},
    {{"bicycle"}, {"helmet"}, {"street"}, {"car"}, {}},
    {{"wave"}, {"surfboard"}, {}, {"sky"}, {"sunset"}},
    {{"bus"}, {}, {}, {"street"}, {}},
    {{"laptop"}, {}, {"cafe"}, {"cup"}, {}},
};

std::map<std::string, std::vector<std::string>> expected_groups(std::size_t i, GenderVariant v) {
    const auto& h = kHand[i];
    std::map<std::string, std::vector<std::string>> g = {{"explicitly_guided", h.g1},
                                                         {"implicitly_guided", h.g2},
                                                         {"explicitly_independent", h.g3},
                                                         {"implicitly_independent", h.g4},
                                                         {"hidden", h.hidden}};
    g["explicitly_guided"].push_back(v == GenderVariant::neutral ? "person" : v == GenderVariant::feminine ? "woman" : "man");
    const std::size_t n = i + 1;
    if ((v == GenderVariant::neutral && n <= 2) || (v == GenderVariant::masculine && n <= 4)) g["implicitly_guided"].push_back("beard");
    if (v == GenderVariant::masculine && (n == 5 || n == 6)) g["implicitly_independent"].push_back("hat");
    if (v == GenderVariant::feminine && n <= 3) g["implicitly_independent"].push_back("handbag");
    if (v == GenderVariant::feminine && n == 4) g["implicitly_independent"].push_back("flower");
    for (auto& [_, list] : g) std::sort(list.begin(), list.end());
    return g;
}

void check_fixture_values(Outcome& o, const fs::path& out, const fs::path& manifest_path) {
    const auto obj = read_json(out / "objstats.json");
    const auto groups = read_json(out / "groups.json");
    const auto disp = read_json(out / "disparity.json");
    const char* vname[] = {"neutral", "feminine", "masculine"};

    // Counts: an independent recount of the objects files, then the hand totals.
    const auto manifest = read_json(manifest_path);
    const auto root = manifest_path.parent_path() / manifest["root_dir"].get<std::string>();
    std::map<std::string, std::map<std::string, std::int64_t>> recount;
    for (const auto& t : manifest["triplets"]) {
        for (const char* v : vname) {
            for (const auto& d : read_json(root / t["members"][v]["artifacts"]["objects"].get<std::string>())) {
                ++recount[v][d["name"].get<std::string>()];
            }
        }
    }
    const std::map<std::string, std::int64_t> shared = {
        {"horse", 1}, {"saddle", 1}, {"beach", 1}, {"sky", 2}, {"dog", 1}, {"leash", 1}, {"park", 2},
        {"grass", 2}, {"basket", 1}, {"umbrella", 1}, {"street", 3}, {"building", 1}, {"book", 1},
        {"bench", 1}, {"tree", 1}, {"table", 1}, {"plate", 1}, {"food", 1}, {"chair", 1}, {"guitar", 1},
        {"microphone", 1}, {"stage", 1}, {"crowd", 1}, {"kitchen", 1}, {"pot", 1}, {"cabinet", 1},
        {"bicycle", 1}, {"helmet", 1}, {"car", 1}, {"wave", 1}, {"surfboard", 1}, {"bus", 1},
        {"laptop", 1}, {"cafe", 1}, {"cup", 1}};
    std::map<std::string, std::map<std::string, std::int64_t>> hand;
    for (const char* v : vname) hand[v] = shared;
    hand["neutral"]["person"] = 12;
    hand["neutral"]["beard"] = 2;
    hand["feminine"]["woman"] = 12;
    hand["feminine"]["handbag"] = 3;
    hand["feminine"]["flower"] = 1;
    hand["masculine"]["man"] = 12;
    hand["masculine"]["beard"] = 4;
    hand["masculine"]["hat"] = 2;
    for (const char* v : vname) {
        const auto totals = obj["tables"][v]["totals"].get<std::map<std::string, std::int64_t>>();
        o.check(totals == recount[v], std::string(v) + " totals differ from recount");
        o.check(totals == hand[v], std::string(v) + " totals differ from hand values");
        o.check(obj["tables"][v]["n_prompts"] == 12, std::string(v) + " n_prompts");
    }

    // s_O from the hand-evaluated per-triplet cosines.
    const double r20 = std::sqrt(20.0), r30 = std::sqrt(30.0);
    const double nf[12] = {4.0 / 6, 4.0 / 6, 3 / r20, 3 / r20, 0.75, 0.8, 0.8, 0.75, 0.8, 0.75, 2.0 / 3, 0.75};
    const double nm[12] = {5.0 / 6, 5.0 / 6, 3 / r20, 3 / r20, 3 / r20, 4 / r30, 0.8, 0.75, 0.8, 0.75, 2.0 / 3, 0.75};
    double snf = 0, snm = 0;
    for (int i = 0; i < 12; ++i) {
        snf += nf[i] / 12;
        snm += nm[i] / 12;
    }
    o.near(obj["similarity"]["neutral_vs_feminine"]["value"].get<double>(), snf, kHandTol, "s_O(n,f)");
    o.near(obj["similarity"]["neutral_vs_masculine"]["value"].get<double>(), snm, kHandTol, "s_O(n,m)");

    // Bias scores and the support filter at threshold 2.
    const std::set<std::string> supported = {"man", "woman", "beard", "hat", "handbag", "sky", "park", "grass", "street"};
    std::size_t n_entries = 0;
    for (const auto& e : obj["bias_scores"]) {
        const auto name = e["object"].get<std::string>();
        ++n_entries;
        const double want = (name == "man" || name == "beard" || name == "hat")             ? 1.0
                            : (name == "woman" || name == "handbag" || name == "flower") ? 0.0
                                                                                           : 0.5;
        o.near(e["score"].get<double>(), want, kHandTol, "BS(" + name + ")");
        o.check(e["supported"].get<bool>() == (supported.count(name) > 0), "support flag of " + name);
    }
    o.check(n_entries == shared.size() + 6, "bias entry count " + std::to_string(n_entries));

    // Per-image group assignments.
    std::size_t images = 0;
    for (const auto& im : groups["images"]) {
        const auto tid = im["triplet_id"].get<std::string>();
        const std::size_t i = std::stoul(tid.substr(1)) - 1;
        const auto v = *parse_variant(im["variant"].get<std::string>());
        std::map<std::string, std::vector<std::string>> got;
        for (const auto& g : depgroups::kAllGroups) got[std::string(depgroups::to_string(g))];
        for (const auto& a : im["assignments"]) got[a["group"].get<std::string>()].push_back(a["subject"].get<std::string>());
        for (auto& [_, list] : got) std::sort(list.begin(), list.end());
        o.check(got == expected_groups(i, v), "assignments of " + im["prompt_id"].get<std::string>());
        if (i == 2) {
            for (const auto& a : im["assignments"]) {
                if (a["subject"] == "basket") o.check(a["matched_word"] == "picnic", "basket witness");
            }
        }
        ++images;
    }
    o.check(images == 36, "image count");

    // Group coverage, distinct counts and intersection ratios.
    const auto& st = groups["statistics"]["variants"];
    const std::vector<std::string> labels = {"explicitly_guided", "implicitly_guided", "explicitly_independent",
                                             "implicitly_independent", "hidden"};
    const std::map<std::string, std::array<double, 5>> coverage = {
        {"neutral", {100, 200.0 / 3, 75, 100, 50.0 / 3}},
        {"feminine", {100, 200.0 / 3, 75, 100, 50.0 / 3}},
        {"masculine", {100, 75, 75, 100, 50.0 / 3}}};
    const std::map<std::string, std::array<int, 5>> distinct = {
        {"neutral", {12, 9, 7, 10, 3}}, {"feminine", {12, 8, 7, 12, 3}}, {"masculine", {12, 9, 7, 11, 3}}};
    for (const char* v : vname) {
        for (std::size_t g = 0; g < 5; ++g) {
            o.near(st[v]["image_percent"][labels[g]].get<double>(), coverage.at(v)[g], kHandTol,
                   std::string(v) + " coverage " + labels[g]);
            o.check(st[v]["distinct"][labels[g]] == distinct.at(v)[g], std::string(v) + " distinct " + labels[g]);
        }
        o.check(st[v]["noun_count"] == 22, std::string(v) + " noun count");
        const auto& x = st[v]["intersection"];
        for (const char* g : {"explicitly_guided", "explicitly_independent", "hidden"}) {
            o.near(x[g]["nouns"].get<double>(), 100.0, kHandTol, std::string(v) + " " + g + " over nouns");
        }
        o.near(x["nouns"]["explicitly_guided"].get<double>(), 1200.0 / 22, kHandTol, std::string(v) + " nouns/G1");
        o.near(x["nouns"]["explicitly_independent"].get<double>(), 700.0 / 22, kHandTol, std::string(v) + " nouns/G3");
        o.near(x["nouns"]["hidden"].get<double>(), 300.0 / 22, kHandTol, std::string(v) + " nouns/hidden");
        o.near(x["explicitly_independent"]["implicitly_independent"].get<double>(), 100.0 / 7, kHandTol,
               std::string(v) + " G3/G4");
        const double g4 = distinct.at(v)[3];
        o.near(x["implicitly_independent"]["explicitly_independent"].get<double>(), 100.0 / g4, kHandTol,
               std::string(v) + " G4/G3");
        o.near(x["explicitly_guided"]["implicitly_guided"].get<double>(), 0.0, kHandTol, std::string(v) + " G1/G2");
    }

    // Disparity shape.
    o.check(disp["rows"].size() == 2, "disparity rows");
    for (const auto& r : disp["rows"]) o.check(r["n_pairs"] == 12, "disparity n_pairs");
}

std::vector<std::string> tree(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::exists(dir)) return names;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) names.push_back(fs::relative(e.path(), dir).generic_string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

void fixture_oracle(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    ::unsetenv("SOURCE_DATE_EPOCH");
    ::unsetenv("BIASTRACE_THREADS");
    const auto manifest = source_dir() / "fixtures" / "gcc-mini.json";
    const auto golden = source_dir() / "tests" / "golden" / "gcc-mini";
    const auto out = synth::scratch_dir("acceptance-fixture");
    const int code = run_cli({"all", "--manifest", manifest.string(), "--out", out.string()});
    o.check(code == 0, "biastrace all exit " + std::to_string(code));
    if (code != 0) return;
    const auto files = tree(out);
    o.check(files.size() >= 5, "fewer than five artifacts");
    check_fixture_values(o, out, manifest);

    if (o.failures.empty() && std::getenv("BIASTRACE_UPDATE_GOLDEN")) {
        fs::remove_all(golden);
        for (const auto& f : files) write_file_atomic(golden / f, read_file(out / f));
    }
    const auto want = tree(golden);
    o.check(!want.empty(), "no golden files");
    o.check(files == want, "output file set differs from goldens");
    std::size_t compared = 0;
    for (const auto& f : want) {
        if (!fs::exists(out / f)) continue;
        o.check(read_file(out / f) == read_file(golden / f), "golden mismatch: " + f);
        ++compared;
    }
    const double s = seconds_since(t0);
    o.check(s < kFixtureBudget, "runtime " + std::to_string(s) + "s exceeds 30s");
    o.detail = std::to_string(compared) + " golden files";
}

// -------------------------------------------------------------- directional

void directional(Outcome& o) {
    const auto dir = synth::scratch_dir("acceptance-directional");
    synth::write_directional_bundle(dir / "directional.json", 24, 77);
    const auto out = dir / "out";
    const int code = run_cli({"all", "--manifest", (dir / "directional.json").string(), "--out", out.string()});
    o.check(code == 0, "biastrace all exit " + std::to_string(code));
    if (code != 0) return;
    const auto rows = read_json(out / "disparity.json")["rows"];
    const auto& f = rows[0];
    const auto& m = rows[1];
    o.check(f["pair"] == "neutral_vs_feminine" && m["pair"] == "neutral_vs_masculine", "row order");
    std::size_t compared = 0;
    auto higher = [&](const json& a, const json& b, const std::string& what) {
        o.check(a.is_number() && b.is_number(), what + " missing");
        if (a.is_number() && b.is_number()) {
            o.check(a.get<double>() > b.get<double>(), what + ": n-m " + a.dump() + " vs n-f " + b.dump());
            ++compared;
        }
    };
    higher(m["prompt_sim"], f["prompt_sim"], "prompt");
    higher(m["denoise_sim"], f["denoise_sim"], "denoising");
    higher(m["ssim"], f["ssim"], "ssim");
    higher(f["diff_pix"], m["diff_pix"], "diff_pix (lower is closer)");
    for (const char* k : {"resnet", "clip", "dino"}) higher(m["feature_sims"][k], f["feature_sims"][k], k);
    higher(m["split_product"], f["split_product"], "split_product");
    const auto sim = read_json(out / "objstats.json")["similarity"];
    higher(sim["neutral_vs_masculine"]["value"], sim["neutral_vs_feminine"]["value"], "s_O");
    o.detail = std::to_string(compared) + " metrics";
}

// ---------------------------------------------------------- classification

std::size_t oracle_index(std::size_t x, std::size_t dst, std::size_t src) {
    return static_cast<std::size_t>(std::floor((static_cast<double>(x) + 0.5) * static_cast<double>(src) / static_cast<double>(dst)));
}

double oracle_coverage(const MaskImage& obj, const MaskImage& attn) {
    std::size_t inside = 0, hit = 0;
    for (std::uint32_t y = 0; y < obj.height; ++y) {
        for (std::uint32_t x = 0; x < obj.width; ++x) {
            if (!obj.bits[std::size_t(y) * obj.width + x]) continue;
            ++inside;
            const auto ay = oracle_index(y, obj.height, attn.height), ax = oracle_index(x, obj.width, attn.width);
            hit += attn.bits[ay * attn.width + ax] != 0;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(inside);
}

void classification(Outcome& o) {
    using namespace depgroups;
    const std::vector<std::string> vocab = {"dog", "person", "woman", "tree", "car", "park", "street sign",
                                            "table", "man", "ball", "hat", "sky", "cup", "bench"};
    const std::vector<std::string> tokens = {"dog", "people", "women", "tree", "cars", "park", "sign",
                                             "table", "men", "ball", "a", "sky", "the"};
    const MatchPolicy policies[] = {MatchPolicy::full_string, MatchPolicy::head_noun, MatchPolicy::any_token};
    synth::Rng rng(99);
    std::size_t objects_seen = 0, coverage_checks = 0;
    for (std::size_t inst = 0; inst < kClassificationInstances && o.failures.size() < 20; ++inst) {
        const auto iw = static_cast<std::uint32_t>(4 + rng.below(21)), ih = static_cast<std::uint32_t>(4 + rng.below(21));
        const auto aw = static_cast<std::uint32_t>(2 + rng.below(11)), ah = static_cast<std::uint32_t>(2 + rng.below(11));

        std::vector<WordAttention> maps;
        for (std::size_t k = rng.below(5); k > 0; --k) {
            std::vector<float> v(std::size_t(aw) * ah);
            const bool constant = rng.below(10) == 0;
            for (auto& x : v) x = constant ? 2.0f : static_cast<float>(rng.uniform() * 5);
            maps.push_back({tokens[rng.below(tokens.size())], Tensor({ah, aw}, std::move(v))});
        }
        NounSet nouns;
        for (const auto& t : tokens) {
            if (rng.below(3) == 0) nouns.nouns.insert(lemmatize(t));
        }
        std::vector<ObjectDetection> objects;
        for (std::size_t k = rng.below(6); k > 0; --k) {
            ObjectDetection d;
            d.name = vocab[rng.below(vocab.size())];
            d.lemma_tokens = lemma_tokens(d.name);
            const auto r0 = static_cast<std::uint32_t>(rng.below(ih)), c0 = static_cast<std::uint32_t>(rng.below(iw));
            d.mask = synth::rect_mask(iw, ih, r0, r0 + static_cast<std::uint32_t>(rng.below(ih)), c0,
                                      c0 + static_cast<std::uint32_t>(rng.below(iw)));
            if (rng.below(15) == 0) d.mask = MaskImage(iw, ih);
            d.degenerate = d.mask.count() == 0;
            objects.push_back(std::move(d));
        }
        EngineConfig cfg;
        cfg.theta = 0.05 + 0.9 * rng.uniform();
        cfg.sigma_human = 0.05 + 0.9 * rng.uniform();
        cfg.sigma_other = 0.05 + 0.9 * rng.uniform();
        cfg.match_policy = policies[rng.below(3)];

        const auto masks = noun_masks(maps, nouns, cfg.theta);
        const auto out = classify_objects(objects, masks, nouns, cfg);
        const std::string tag = "instance " + std::to_string(inst);

        // partition
        std::size_t non_hidden = 0;
        std::set<std::string> matched;
        for (const auto& d : objects) {
            for (const auto& n : matched_nouns(d.lemma_tokens, nouns.nouns, cfg.match_policy)) matched.insert(n);
        }
        std::multiset<std::string> got_objects, want_objects;
        for (const auto& d : objects) want_objects.insert(normalize_object_name(d.name));
        for (const auto& a : out) {
            if (a.group == DependencyGroup::hidden) {
                o.check(nouns.nouns.count(a.subject) && !matched.count(a.subject), tag + " hidden " + a.subject);
                continue;
            }
            ++non_hidden;
            got_objects.insert(a.object_name);
            o.check(a.group == group_of(a.is_explicit, a.guided), tag + " group table");
            const auto lemmas = lemma_tokens(a.object_name);
            const bool in_nouns = !matched_nouns(lemmas, nouns.nouns, cfg.match_policy).empty();
            o.check(a.is_explicit == in_nouns, tag + " explicit flag " + a.subject);
            if (cfg.match_policy == MatchPolicy::full_string) {
                const bool g13 = a.group == DependencyGroup::explicitly_guided || a.group == DependencyGroup::explicitly_independent;
                o.check(g13 == (nouns.nouns.count(a.subject) > 0), tag + " G1/G3 subset of nouns " + a.subject);
            }
            o.check(a.best_coverage >= 0.0 && a.best_coverage <= 1.0, tag + " coverage range");
        }
        o.check(non_hidden == objects.size(), tag + " each object exactly once");
        o.check(got_objects == want_objects, tag + " object multiset");
        std::size_t hidden = 0;
        for (const auto& n : nouns.nouns) hidden += !matched.count(n);
        o.check(out.size() == objects.size() + hidden, tag + " hidden count");

        // order independence
        auto shuffled = objects;
        std::reverse(shuffled.begin(), shuffled.end());
        o.check(classify_objects(shuffled, masks, nouns, cfg) == out, tag + " order dependence");

        // brute-force coverage and the guidance rule
        for (const auto& d : objects) {
            ++objects_seen;
            if (d.mask.count() == 0) continue;
            double best = 0, witness = 0;
            bool guided = false;
            for (const auto& m : masks) {
                const double c = oracle_coverage(d.mask, m.mask);
                const auto resampled = resample_nearest(m.mask, d.mask.width, d.mask.height);
                o.check(coverage(d.mask, resampled) == c, tag + " coverage vs oracle");
                ++coverage_checks;
                const bool human = human_words().count(m.lemma) && d.lemma_tokens.size() == 1 &&
                                   human_words().count(d.lemma_tokens[0]);
                if (c >= (human ? cfg.sigma_human : cfg.sigma_other)) {
                    guided = true;
                    witness = std::max(witness, c);
                }
                best = std::max(best, c);
            }
            const auto g = is_guided(d, masks, cfg.sigma_human, cfg.sigma_other);
            o.check(g.guided == guided, tag + " guided vs oracle " + d.name);
            o.check(g.best_coverage == (guided ? witness : best), tag + " best coverage vs oracle");
        }

        // monotonicity in theta and sigma
        auto guided_set = [&](const std::vector<WordAttentionMask>& ms, double sh, double so) {
            std::vector<bool> v;
            for (const auto& d : objects) v.push_back(d.mask.count() && is_guided(d, ms, sh, so).guided);
            return v;
        };
        const auto base = guided_set(masks, cfg.sigma_human, cfg.sigma_other);
        const double theta_up = std::min(0.999, cfg.theta + 0.5 * rng.uniform());
        const auto masks_up = noun_masks(maps, nouns, theta_up);
        for (std::size_t k = 0; k < masks.size(); ++k) {
            const auto& a = masks[k].mask;
            const auto& b = masks_up[k].mask;
            for (std::size_t p = 0; p < a.bits.size(); ++p) o.check(!b.bits[p] || a.bits[p], tag + " theta adds pixels");
        }
        const auto at_theta = guided_set(masks_up, cfg.sigma_human, cfg.sigma_other);
        const double up = 0.3 * rng.uniform();
        const auto at_sigma = guided_set(masks, std::min(1.0, cfg.sigma_human + up), std::min(1.0, cfg.sigma_other + up));
        for (std::size_t k = 0; k < objects.size(); ++k) {
            o.check(!at_theta[k] || base[k], tag + " theta monotonicity");
            o.check(!at_sigma[k] || base[k], tag + " sigma monotonicity");
        }
    }
    o.detail = std::to_string(kClassificationInstances) + " instances, " + std::to_string(objects_seen) + " objects, " +
               std::to_string(coverage_checks) + " coverage checks";
}

// ---------------------------------------------------- determinism/performance

void determinism_performance(Outcome& o) {
    const auto dir = synth::scratch_dir("acceptance-performance");
    synth::write_image_bundle(dir / "perf.json", kPerformanceTriplets, 24, kPerformanceSize, kPerformanceSize, 7);
    std::string reference;
    std::ostringstream timing;
    for (const char* threads : {"1", "4", "8"}) {
        const auto out = dir / (std::string("disparity-") + threads + ".json");
        const auto t0 = std::chrono::steady_clock::now();
        const int code = run_cli({"disparity", "--manifest", (dir / "perf.json").string(), "--metrics", "ssim,diffpix",
                                  "--threads", threads, "--out", out.string()});
        const double s = seconds_since(t0);
        timing << (timing.tellp() ? ", " : "") << threads << "t " << std::fixed << std::setprecision(1) << s << "s";
        o.check(code == 0, std::string("exit code with ") + threads + " threads");
        o.check(s <= kPerformanceBudget, std::string(threads) + " threads took " + std::to_string(s) + "s");
        if (code != 0) continue;
        const auto text = read_file(out);
        const auto rows = json::parse(text)["rows"];
        o.check(rows.size() == 2 && rows[0]["n_pairs"] == kPerformanceTriplets && rows[1]["n_pairs"] == kPerformanceTriplets,
                "pair count");
        if (reference.empty()) reference = text;
        else o.check(text == reference, std::string("output with ") + threads + " threads differs");
    }
    o.detail = std::to_string(2 * kPerformanceTriplets) + " pairs at " + std::to_string(kPerformanceSize) + "px; " +
               timing.str() + "; hardware threads " + std::to_string(std::thread::hardware_concurrency());
    fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"metric_identity", metric_identity},
        {"chi_square", chi_square},
        {"fixture_oracle", fixture_oracle},
        {"directional", directional},
        {"classification", classification},
        {"determinism_performance", determinism_performance},
    };
    std::set<std::string> wanted(argv + 1, argv + argc);
    for (const auto& w : wanted) {
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == w; })) {
            std::cerr << "unknown criterion: " << w << "\n";
            return 2;
        }
    }
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(name)) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.failures.push_back(std::string("exception: ") + e.what());
        }
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.2f", seconds_since(t0));
        std::cout << (o.failures.empty() ? "PASS " : "FAIL ") << name << " (" << secs << "s)";
        if (o.failures.empty()) {
            std::cout << ' ' << o.detail;
        } else {
            ++failed;
            std::cout << ' ' << o.failures.size() << " failures:";
            for (std::size_t i = 0; i < std::min<std::size_t>(o.failures.size(), 5); ++i) std::cout << " [" << o.failures[i] << "]";
        }
        std::cout << std::endl;
    }
    return failed ? 1 : 0;
}
