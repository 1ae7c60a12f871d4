#include <doctest.h>

#include <json.hpp>

#include "biastrace/atomic_file.hpp"
#include "biastrace/depgroups.hpp"
#include "biastrace/disparity.hpp"
#include "biastrace/error.hpp"
#include "biastrace/manifest.hpp"
#include "biastrace/objstats.hpp"
#include "biastrace/report.hpp"
#include "synth.hpp"

using namespace biastrace;
using namespace biastrace::report;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

objstats::BiasScoreEntry entry(std::string name, double score, std::int64_t cm, std::int64_t cf) {
    return {std::move(name), score, cm, cf, true};
}

fs::path fixture_analysis() {
    static const fs::path dir = [] {
        const auto d = synth::scratch_dir("report");
        synth::write_gcc_mini(d / "gcc-mini.json");
        const auto m = load_manifest(d / "gcc-mini.json");
        const auto out = d / "analysis";
        json meta = {{"dataset", m.name}};
        write_file_atomic(out / "disparity.json",
                          json{{"metadata", meta}, {"rows", disparity::table_to_json(disparity::disparity_table(m, {}))}}.dump());
        auto obj = objstats::to_json(objstats::analyze_objects(m, m.config));
        obj["metadata"] = meta;
        write_file_atomic(out / "objstats.json", obj.dump());
        write_file_atomic(out / "groups.json", depgroups::to_json(depgroups::analyze_groups(m, m.config)).dump());
        return out;
    }();
    return dir;
}

}  // namespace

TEST_CASE("round half to even on the exact binary value") {
    CHECK(fixed_half_even(0.125, 2) == "0.12");
    CHECK(fixed_half_even(0.375, 2) == "0.38");
    CHECK(fixed_half_even(2.5, 0) == "2");
    CHECK(fixed_half_even(3.5, 0) == "4");
    CHECK(fixed_half_even(-0.125, 2) == "-0.12");
    CHECK(fixed_half_even(1.005, 2) == "1.00");  // binary value sits below the tie
    CHECK(fixed_half_even(0.0005, 3) == "0.001");  // and this one above
    CHECK(fixed_half_even(0.6666666, 3) == "0.667");
    CHECK(fixed_half_even(66.666666, 2) == "66.67");
    CHECK(fixed_half_even(100.0, 2) == "100.00");
    CHECK(fixed_half_even(0.9996, 3) == "1.000");
    CHECK(fixed_half_even(-0.0001, 3) == "0.000");  // no negative zero in tables
}

TEST_CASE("scientific p-values") {
    CHECK(sci3(0.00982) == "9.82e-03");
    CHECK(sci3(0.0) == "0.00e+00");
    CHECK(sci3(1.0) == "1.00e+00");
    CHECK(sci3(0.05) == "5.00e-02");
    CHECK(sci3(123456.0) == "1.23e+05");
    CHECK(sci3(0.99999) == "1.00e+00");
    CHECK(sci3(1.2345e-120) == "1.23e-120");
}

TEST_CASE("bias chart colours and reference line") {
    const auto one = render_bias_chart({entry("tie", 1.0, 3, 0)}, 10, "t");
    CHECK(occurrences(one, "fill=\"#1f77b4\"") == 1);
    CHECK(occurrences(one, "width=\"400\"") == 1);
    CHECK(occurrences(one, "#ff7f0e") == 0);

    const auto mixed = render_bias_chart(
        {entry("tie", 0.9, 9, 1), entry("veil", 0.1, 1, 9), entry("cup", 0.5, 2, 2), entry("dog", 0.6, 3, 2)}, 10, "t");
    CHECK(occurrences(mixed, "fill=\"#1f77b4\"") == 2);
    CHECK(occurrences(mixed, "fill=\"#ff7f0e\"") == 1);
    CHECK(occurrences(mixed, "fill=\"#999999\"") == 1);
    CHECK(mixed.find("class=\"reference\" x1=\"410\"") != std::string::npos);
    CHECK(mixed.find("stroke=\"#2ca02c\"") != std::string::npos);
    CHECK(mixed.find(">tie<") < mixed.find(">dog<"));
    CHECK(mixed.find(">cup<") < mixed.find(">veil<"));
    CHECK(render_bias_chart({entry("tie", 0.9, 9, 1), entry("veil", 0.1, 1, 9), entry("cup", 0.5, 2, 2),
                             entry("dog", 0.6, 3, 2)},
                            10, "t") == mixed);

    const auto top1 = render_bias_chart({entry("tie", 0.9, 9, 1), entry("veil", 0.1, 1, 9), entry("dog", 0.6, 3, 2)}, 1, "t");
    CHECK(top1.find(">dog<") == std::string::npos);

    objstats::BiasScoreEntry unsupported{"x", 1.0, 1, 0, false};
    try {
        render_bias_chart({unsupported}, 5, "t");
        FAIL("expected EmptyEntries");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyEntries);
    }
}

TEST_CASE("tables from the fixture analysis") {
    const auto bundle = load_bundle(fixture_analysis());
    REQUIRE(bundle.disparity);
    REQUIRE(bundle.objstats);
    REQUIRE(bundle.groups);
    CHECK(bundle.metadata.at("dataset") == "gcc-mini");

    const auto md = render_tables(bundle, Format::markdown).at("report.md");
    CHECK(md.find("| neutral_vs_feminine | 12 |") != std::string::npos);
    CHECK(md.find("| neutral_vs_masculine | 12 |") != std::string::npos);
    CHECK(render_tables(bundle, Format::markdown) == render_tables(load_bundle(fixture_analysis()), Format::markdown));

    const auto tables = build_tables(bundle);
    std::vector<std::string> names;
    for (const auto& t : tables) names.push_back(t.name);
    CHECK(names == std::vector<std::string>{"disparity", "cooccurrence_similarity", "chi_square", "bias_scores",
                                            "group_coverage", "group_counts", "group_intersection",
                                            "group_bias_scores"});
    const auto& d = tables[0];
    REQUIRE(d.rows.size() == 2);
    for (const auto& c : d.rows[0]) CHECK_FALSE(c.empty());

    const auto csv = render_tables(bundle, Format::csv);
    CHECK(csv.size() == tables.size());
    CHECK(csv.at("disparity.csv").rfind("pair,n_pairs,prompt,denoising,ssim,diff_pix,resnet,clip,dino,split_product\n", 0) == 0);

    const auto j = json::parse(render_tables(bundle, Format::json).at("report.json"));
    const auto& row = j["tables"]["disparity"]["rows"][0];
    CHECK(row["n_pairs"] == 12);
    CHECK(fixed_half_even(bundle.disparity->at(0).ssim.value(), 3) == fixed_half_even(row["ssim"].get<double>(), 3));
}

TEST_CASE("every rendered cell equals the bundle value at its precision") {
    const auto bundle = load_bundle(fixture_analysis());
    const auto t = disparity_table(*bundle.disparity);
    for (std::size_t r = 0; r < 2; ++r) {
        const auto& row = bundle.disparity->at(r);
        CHECK(t.rows[r][2] == fixed_half_even(*row.prompt_sim, 3));
        CHECK(t.rows[r][4] == fixed_half_even(*row.ssim, 3));
        CHECK(t.rows[r][5] == fixed_half_even(*row.diff_pix, 2));
    }
    const auto bias = bias_table(bundle.objstats->at("bias_scores"));
    std::size_t scored = 0;
    for (const auto& e : bundle.objstats->at("bias_scores")) scored += !e.at("score").is_null();
    CHECK(bias.rows.size() == scored);
}

TEST_CASE("missing sections") {
    auto bundle = load_bundle(fixture_analysis());
    bundle.groups.reset();
    try {
        build_tables(bundle);
        FAIL("expected MissingSection");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingSection);
    }
    const auto empty = synth::scratch_dir("report-empty");
    CHECK_THROWS_AS(load_bundle(empty), Error);
}

TEST_CASE("write report is byte stable") {
    const auto bundle = load_bundle(fixture_analysis());
    const auto a = synth::scratch_dir("report-a"), b = synth::scratch_dir("report-b");
    const std::set<Format> all = {Format::csv, Format::json, Format::markdown, Format::svg};
    const auto files = write_report(bundle, all, 10, a);
    CHECK(write_report(bundle, all, 10, b) == files);
    CHECK(std::find(files.begin(), files.end(), "bias_chart.svg") != files.end());
    CHECK(std::find(files.begin(), files.end(), "report.md") != files.end());
    for (const auto& f : files) CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
}
