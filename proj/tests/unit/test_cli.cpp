#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "biastrace/atomic_file.hpp"
#include "biastrace/cli.hpp"
#include "biastrace/manifest.hpp"
#include "synth.hpp"

using namespace biastrace;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const fs::path& fixture() {
    static const fs::path p = [] {
        const auto d = synth::scratch_dir("cli");
        synth::write_gcc_mini(d / "gcc-mini.json");
        return d / "gcc-mini.json";
    }();
    return p;
}

std::vector<std::string> listing(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) names.push_back(fs::relative(e.path(), dir).generic_string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

TEST_CASE("exit codes") {
    CHECK(run({"validate", "--manifest", fixture().string()}).code == 0);

    const auto usage = run({"disparity"});
    CHECK(usage.code == 2);
    CHECK(usage.err.find("--manifest") != std::string::npos);

    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
    CHECK(run({"groups", "--manifest", fixture().string(), "--out", "x.json", "--theta", "1.5"}).code == 2);
    CHECK(run({"validate", "--manifest", (fixture().parent_path() / "absent.json").string()}).code == 1);
}

TEST_CASE("validation failures exit 1 and leave a report") {
    const auto d = synth::scratch_dir("cli-broken");
    synth::write_gcc_mini(d / "m.json");
    fs::remove(d / "m" / "t01-n" / "image.png");
    const auto r = run({"validate", "--manifest", (d / "m.json").string(), "--out", (d / "v.json").string()});
    CHECK(r.code == 1);
    const auto v = json::parse(read_file(d / "v.json"));
    CHECK(v.dump().find("t01-n/image.png") != std::string::npos);

    const auto all = run({"all", "--manifest", (d / "m.json").string(), "--out", (d / "out").string()});
    CHECK(all.code == 1);
    CHECK_FALSE(fs::exists(d / "out" / "disparity.json"));
}

TEST_CASE("all writes five artifacts and is thread independent") {
    const auto d = synth::scratch_dir("cli-all");
    REQUIRE(run({"all", "--manifest", fixture().string(), "--out", (d / "a").string(), "--threads", "1"}).code == 0);
    REQUIRE(run({"all", "--manifest", fixture().string(), "--out", (d / "b").string(), "--threads", "4"}).code == 0);
    std::vector<std::string> top;
    for (const auto& e : fs::directory_iterator(d / "a")) top.push_back(e.path().filename().string());
    std::sort(top.begin(), top.end());
    CHECK(top == std::vector<std::string>{"disparity.json", "groups.json", "objstats.json", "report", "validation.json"});
    const auto files = listing(d / "a");
    CHECK(files == listing(d / "b"));
    for (const auto& f : files) CHECK_MESSAGE(read_file(d / "a" / f) == read_file(d / "b" / f), f);
    for (const auto& f : files) CHECK_MESSAGE(f.find(".tmp") == std::string::npos, f);
}

TEST_CASE("subcommands") {
    const auto d = synth::scratch_dir("cli-sub");
    const auto m = fixture().string();
    REQUIRE(run({"disparity", "--manifest", m, "--metrics", "prompt,ssim", "--out", (d / "d.json").string(), "--csv",
                 (d / "d.csv").string()})
                .code == 0);
    const auto dj = json::parse(read_file(d / "d.json"));
    CHECK(dj["rows"].size() == 2);
    CHECK(dj["rows"][0].contains("ssim"));
    CHECK(dj["metadata"]["dataset"] == "gcc-mini");
    CHECK_FALSE(dj["metadata"]["config"].contains("threads"));
    CHECK(read_file(d / "d.csv").rfind("pair,", 0) == 0);
    CHECK(run({"disparity", "--manifest", m, "--metrics", "nope", "--out", (d / "x.json").string()}).code == 2);

    REQUIRE(run({"objects", "--manifest", m, "--out", (d / "o.json").string(), "--min-max-count", "3"}).code == 0);
    CHECK(json::parse(read_file(d / "o.json"))["min_max_count"] == 3);

    REQUIRE(run({"groups", "--manifest", m, "--out", (d / "g.json").string(), "--match-policy", "head-noun"}).code == 0);
    const auto gj = json::parse(read_file(d / "g.json"));
    CHECK(gj["images"].size() == 36);
    CHECK(gj["metadata"]["config"]["match_policy"] == "head-noun");

    write_file_atomic(d / "in" / "objstats.json", read_file(d / "o.json"));
    write_file_atomic(d / "in" / "disparity.json", read_file(d / "d.json"));
    write_file_atomic(d / "in" / "groups.json", read_file(d / "g.json"));
    REQUIRE(run({"report", "--in", (d / "in").string(), "--formats", "md,svg", "--out", (d / "r").string()}).code == 0);
    CHECK(fs::exists(d / "r" / "report.md"));
    CHECK(fs::exists(d / "r" / "bias_chart.svg"));
    CHECK_FALSE(fs::exists(d / "r" / "report.json"));
}

TEST_CASE("promptgen from a caption file") {
    const auto d = synth::scratch_dir("cli-promptgen");
    write_file_atomic(d / "captions.txt", "a person riding a horse\na cowboy riding a horse\npeople at a market\n");
    REQUIRE(run({"promptgen", "--captions", (d / "captions.txt").string(), "--seeds", "5", "--out",
                 (d / "p.json").string()})
                .code == 0);
    const auto m = load_manifest(d / "p.json");
    CHECK(m.triplets.size() == 10);
    CHECK(m.seeds_per_triplet == 5);
    const auto again = d / "q.json";
    run({"promptgen", "--captions", (d / "captions.txt").string(), "--seeds", "5", "--out", again.string()});
    CHECK(read_file(d / "p.json") == read_file(again));

    write_file_atomic(d / "prof.txt", "an ecologist studies the ecosystem\tecologist\n");
    REQUIRE(run({"promptgen", "--captions", (d / "prof.txt").string(), "--mode", "profession", "--out",
                 (d / "r.json").string()})
                .code == 0);
    CHECK(load_manifest(d / "r.json").triplets[0].member(GenderVariant::feminine).text ==
          "an female ecologist studies the ecosystem");
}

TEST_CASE("config precedence") {
    const auto d = synth::scratch_dir("cli-config");
    auto m = load_manifest(fixture());
    m.config.theta = 0.5;
    m.root_dir = fs::absolute(m.resolved_root);
    save_manifest(m, d / "m.json");
    REQUIRE(run({"groups", "--manifest", (d / "m.json").string(), "--out", (d / "a.json").string()}).code == 0);
    CHECK(json::parse(read_file(d / "a.json"))["metadata"]["config"]["theta"] == 0.5);
    REQUIRE(run({"groups", "--manifest", (d / "m.json").string(), "--out", (d / "b.json").string(), "--theta", "0.4"})
                .code == 0);
    CHECK(json::parse(read_file(d / "b.json"))["metadata"]["config"]["theta"] == 0.4);
}

TEST_CASE("structured logs") {
    const auto r = run({"--log-json", "validate", "--manifest", fixture().string()});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.err);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        CHECK(json::accept(line));
        ++n;
    }
    CHECK(n >= 1);
}
