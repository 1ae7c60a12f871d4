#include "biastrace/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "biastrace/atomic_file.hpp"
#include "biastrace/bundle.hpp"
#include "biastrace/depgroups.hpp"
#include "biastrace/disparity.hpp"
#include "biastrace/error.hpp"
#include "biastrace/manifest.hpp"
#include "biastrace/objstats.hpp"
#include "biastrace/promptgen.hpp"
#include "biastrace/report.hpp"
#include "biastrace/version.hpp"

namespace biastrace::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Logger {
public:
    Logger(std::ostream& err, bool structured) : err_(err), structured_(structured) {}

    void info(const std::string& event, const std::string& message, json fields = json::object()) const {
        emit("info", event, message, std::move(fields));
    }
    void error(const std::string& event, const std::string& message, json fields = json::object()) const {
        emit("error", event, message, std::move(fields));
    }

private:
    void emit(const char* level, const std::string& event, const std::string& message, json fields) const {
        if (structured_) {
            fields["level"] = level;
            fields["event"] = event;
            fields["message"] = message;
            err_ << fields.dump() << '\n';
        } else {
            err_ << "biastrace: " << (std::string_view(level) == "error" ? "error: " : "") << message << '\n';
        }
    }

    std::ostream& err_;
    bool structured_;
};

struct Overrides {
    std::optional<double> theta;
    std::optional<double> sigma_human;
    std::optional<double> sigma_other;
    std::optional<double> diffpix_tau;
    std::optional<std::int64_t> min_max_count;
    std::optional<std::int64_t> min_objects_chi;
    std::optional<std::string> match_policy;
    bool exclude_persons = false;
    bool yates = false;
    std::optional<std::uint32_t> threads;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::uint32_t parse_threads(const std::string& s, const char* what) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw UsageError(std::string(what) + " must be a thread count");
    if (v == 0) v = std::max(1u, std::thread::hardware_concurrency());
    return v;
}

// flags > BIASTRACE_THREADS (threads only) > manifest config > defaults
EngineConfig resolve_config(const DatasetManifest& m, const Overrides& o) {
    EngineConfig c = m.config;
    if (const char* env = std::getenv("BIASTRACE_THREADS"); env && *env) c.threads = parse_threads(env, "BIASTRACE_THREADS");
    if (o.theta) c.theta = *o.theta;
    if (o.sigma_human) c.sigma_human = *o.sigma_human;
    if (o.sigma_other) c.sigma_other = *o.sigma_other;
    if (o.diffpix_tau) c.diffpix_tau = *o.diffpix_tau;
    if (o.min_max_count) c.min_max_count = *o.min_max_count;
    if (o.min_objects_chi) c.min_objects_chi = *o.min_objects_chi;
    if (o.match_policy) {
        auto p = parse_match_policy(*o.match_policy);
        if (!p) throw UsageError("unknown match policy '" + *o.match_policy + "'");
        c.match_policy = *p;
    }
    if (o.exclude_persons) c.exclude_persons = true;
    if (o.yates) c.yates = true;
    if (o.threads) c.threads = *o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : *o.threads;
    if (c.threads == 0) c.threads = 1;
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

json metadata(const DatasetManifest& m, const EngineConfig& c) {
    json j;
    j["dataset"] = m.name;
    j["engine_version"] = kEngineVersion;
    j["schema_version"] = m.schema_version;
    json cfg = config_to_json(c);
    cfg.erase("threads");  // output must not depend on the worker count
    j["config"] = std::move(cfg);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        const std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        j["timestamp"] = buf;
    }
    return j;
}

void write_json(const fs::path& path, const json& j, const Logger& log) {
    write_file_atomic(path, j.dump(2) + "\n");
    log.info("write", "wrote " + path.filename().string(), {{"file", path.filename().string()}});
}

void write_text(const fs::path& path, const std::string& s, const Logger& log) {
    write_file_atomic(path, s);
    log.info("write", "wrote " + path.filename().string(), {{"file", path.filename().string()}});
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.filename().string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back(line);
    }
    return lines;
}

std::string triplet_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%05zu", i);
    return buf;
}

// ---- subcommands -----------------------------------------------------------

struct PromptgenArgs {
    std::string captions;
    std::string lexicon;
    std::string mode = "caption";
    std::uint32_t seeds = 1;
    std::int64_t base_seed = 0;
    std::string name;
    std::string out;
};

int cmd_promptgen(const PromptgenArgs& a, const Logger& log) {
    const auto lines = read_lines(a.captions);
    std::vector<TripletRecord> triplets;
    if (a.mode == "caption") {
        const auto lexicon = a.lexicon.empty() ? promptgen::default_lexicon() : promptgen::load_lexicon(a.lexicon);
        const auto selected = promptgen::select_neutral_captions(lines, lexicon);
        for (std::size_t i = 0; i < selected.size(); ++i) {
            triplets.push_back(
                promptgen::make_caption_triplet(selected[i].caption, selected[i].swap_positions, triplet_id(i), 0));
        }
        log.info("select", std::to_string(selected.size()) + " of " + std::to_string(lines.size()) +
                               " captions are gender neutral",
                 {{"selected", selected.size()}, {"captions", lines.size()}});
    } else if (a.mode == "profession") {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto tab = lines[i].find('\t');
            if (tab == std::string::npos) {
                throw Error(ErrorCode::SchemaError, "line " + std::to_string(i + 1) + " is not 'prompt<TAB>profession'");
            }
            triplets.push_back(promptgen::make_profession_triplet(lines[i].substr(0, tab), lines[i].substr(tab + 1),
                                                                  triplet_id(i), 0));
        }
    } else {
        throw UsageError("--mode must be caption or profession");
    }
    const std::string name = a.name.empty() ? fs::path(a.captions).stem().string() : a.name;
    const auto m = promptgen::emit_prompt_manifest(triplets, a.seeds, a.base_seed, name, a.out);
    log.info("write", "wrote " + std::to_string(m.triplets.size()) + " triplets (" + std::to_string(m.prompt_count()) +
                          " prompts) to " + fs::path(a.out).filename().string(),
             {{"triplets", m.triplets.size()}, {"prompts", m.prompt_count()}});
    return kOk;
}

ValidationReport run_validate(const DatasetManifest& m, const EngineConfig& c, const Logger& log) {
    auto r = validate_bundle(m, c.threads);
    if (r.ok()) {
        log.info("validate", "bundle ok: " + std::to_string(m.prompt_count()) + " prompts",
                 {{"prompts", m.prompt_count()}});
    } else {
        for (const auto& e : r.entries) {
            log.error("validate", (e.prompt_id.empty() ? std::string() : e.prompt_id + ": ") +
                                      (e.file.empty() ? std::string() : e.file + ": ") + e.kind + ": " + e.message,
                      {{"prompt_id", e.prompt_id}, {"file", e.file}, {"kind", e.kind}});
        }
    }
    return r;
}

json run_disparity(const DatasetManifest& m, const EngineConfig& c, const std::set<disparity::Metric>& metrics,
                   std::vector<disparity::DisparityRow>* rows_out = nullptr) {
    disparity::DisparityOptions opts;
    opts.metrics = metrics;
    opts.diffpix_tau = c.diffpix_tau;
    opts.threads = c.threads;
    auto rows = disparity::disparity_table(m, opts);
    json j;
    j["metadata"] = metadata(m, c);
    j["rows"] = disparity::table_to_json(rows);
    if (rows_out) *rows_out = std::move(rows);
    return j;
}

json run_objects(const DatasetManifest& m, const EngineConfig& c) {
    json j = objstats::to_json(objstats::analyze_objects(m, c));
    j["metadata"] = metadata(m, c);
    return j;
}

json run_groups(const DatasetManifest& m, const EngineConfig& c) {
    json j = depgroups::to_json(depgroups::analyze_groups(m, c));
    j["metadata"] = metadata(m, c);
    return j;
}

std::set<disparity::Metric> parse_metrics(const std::string& s) {
    if (s.empty()) return disparity::all_metrics();
    std::set<disparity::Metric> out;
    for (const auto& item : split_list(s)) {
        auto m = disparity::parse_metric(item);
        if (!m) throw UsageError("unknown metric '" + item + "'");
        out.insert(*m);
    }
    if (out.empty()) throw UsageError("--metrics is empty");
    return out;
}

std::set<report::Format> parse_formats(const std::string& s) {
    std::set<report::Format> out;
    for (const auto& item : split_list(s)) {
        auto f = report::parse_format(item);
        if (!f) throw UsageError("unknown format '" + item + "'");
        out.insert(*f);
    }
    if (out.empty()) throw UsageError("--formats is empty");
    return out;
}

void add_config_options(CLI::App* cmd, Overrides& o, bool thresholds, bool objects) {
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores); overrides BIASTRACE_THREADS");
    if (objects) {
        cmd->add_option("--min-max-count", o.min_max_count, "Keep objects whose max(C_m, C_f) reaches this count");
        cmd->add_option("--min-objects-chi", o.min_objects_chi, "Skip chi-square below this many distinct objects");
        cmd->add_flag("--exclude-persons", o.exclude_persons, "Drop person words from the counts");
        cmd->add_flag("--yates", o.yates, "Yates continuity correction for 2x2 tables");
    }
    if (thresholds) {
        cmd->add_option("--theta", o.theta, "Attention binarization threshold");
        cmd->add_option("--sigma-human", o.sigma_human, "Coverage threshold for human object and word");
        cmd->add_option("--sigma-other", o.sigma_other, "Coverage threshold otherwise");
        cmd->add_option("--match-policy", o.match_policy, "full-string | head-noun | any-token");
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gender-bias evaluation engine for text-to-image generation bundles", "biastrace"};
    app.set_version_flag("--version", std::string(kEngineVersion));
    app.require_subcommand(1);
    bool log_json = false;
    app.add_flag("--log-json", log_json, "Emit logs as one JSON object per line on stderr");

    PromptgenArgs pg;
    auto* c_promptgen = app.add_subcommand("promptgen", "Build triplet prompts and a skeleton manifest");
    c_promptgen->add_option("--captions", pg.captions, "Caption file, one per line (profession mode: prompt<TAB>profession)")
        ->required()
        ->check(CLI::ExistingFile);
    c_promptgen->add_option("--lexicon", pg.lexicon, "Human-word lexicon JSON")->check(CLI::ExistingFile);
    c_promptgen->add_option("--mode", pg.mode, "caption | profession")->check(CLI::IsMember({"caption", "profession"}));
    c_promptgen->add_option("--seeds", pg.seeds, "Seeds per triplet")->check(CLI::PositiveNumber);
    c_promptgen->add_option("--base-seed", pg.base_seed, "First seed");
    c_promptgen->add_option("--name", pg.name, "Dataset name (default: caption file stem)");
    c_promptgen->add_option("--out", pg.out, "Manifest to write")->required();

    std::string manifest_path, out_path, csv_path, metrics, in_dir, formats = "csv,json,markdown,svg";
    std::size_t top_k = 10;
    Overrides ov;

    auto* c_validate = app.add_subcommand("validate", "Check every artifact referenced by a manifest");
    c_validate->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_validate->add_option("--out", out_path, "Write the validation report here");
    add_config_options(c_validate, ov, false, false);

    auto* c_disparity = app.add_subcommand("disparity", "Representational disparity table");
    c_disparity->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_disparity->add_option("--metrics", metrics, "Comma list of prompt,denoise,ssim,diffpix,features,split");
    c_disparity->add_option("--diffpix-tau", ov.diffpix_tau, "Local SSIM threshold for Diff.Pix");
    c_disparity->add_option("--out", out_path, "Output JSON")->required();
    c_disparity->add_option("--csv", csv_path, "Also write a CSV table");
    add_config_options(c_disparity, ov, false, false);

    auto* c_objects = app.add_subcommand("objects", "Object co-occurrence statistics and bias scores");
    c_objects->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_objects->add_option("--out", out_path, "Output JSON")->required();
    c_objects->add_option("--csv", csv_path, "Also write the bias scores as CSV");
    add_config_options(c_objects, ov, false, true);

    auto* c_groups = app.add_subcommand("groups", "Prompt-image dependency groups");
    c_groups->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_groups->add_option("--out", out_path, "Output JSON")->required();
    add_config_options(c_groups, ov, true, true);

    auto* c_report = app.add_subcommand("report", "Render tables and charts from analysis outputs");
    c_report->add_option("--in", in_dir, "Directory holding disparity.json, objstats.json, groups.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_report->add_option("--formats", formats, "Comma list of csv,json,markdown,svg");
    c_report->add_option("--top-k", top_k, "Bars per side in bias charts")->check(CLI::PositiveNumber);
    c_report->add_option("--out", out_path, "Report directory")->required();

    auto* c_all = app.add_subcommand("all", "validate, disparity, objects, groups and report in one run");
    c_all->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_all->add_option("--out", out_path, "Output directory")->required();
    c_all->add_option("--metrics", metrics, "Comma list of disparity metrics");
    c_all->add_option("--diffpix-tau", ov.diffpix_tau, "Local SSIM threshold for Diff.Pix");
    c_all->add_option("--top-k", top_k, "Bars per side in bias charts")->check(CLI::PositiveNumber);
    add_config_options(c_all, ov, true, true);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    const Logger log(err, log_json);
    try {
        if (*c_promptgen) return cmd_promptgen(pg, log);
        if (*c_report) {
            const auto fmts = parse_formats(formats);
            const auto bundle = report::load_bundle(in_dir);
            const auto written = report::write_report(bundle, fmts, top_k, out_path);
            log.info("report", "wrote " + std::to_string(written.size()) + " report files", {{"files", written}});
            return kOk;
        }

        const auto manifest = load_manifest(manifest_path);
        const auto config = resolve_config(manifest, ov);

        if (*c_validate) {
            const auto r = run_validate(manifest, config, log);
            if (!out_path.empty()) write_json(out_path, to_json(r), log);
            return r.ok() ? kOk : kFailure;
        }
        if (*c_disparity) {
            const auto ms = parse_metrics(metrics);
            std::vector<disparity::DisparityRow> rows;
            write_json(out_path, run_disparity(manifest, config, ms, &rows), log);
            if (!csv_path.empty()) write_text(csv_path, report::to_csv(report::disparity_table(rows)), log);
            return kOk;
        }
        if (*c_objects) {
            const auto j = run_objects(manifest, config);
            write_json(out_path, j, log);
            if (!csv_path.empty()) write_text(csv_path, report::to_csv(report::bias_table(j.at("bias_scores"))), log);
            return kOk;
        }
        if (*c_groups) {
            write_json(out_path, run_groups(manifest, config), log);
            return kOk;
        }
        if (*c_all) {
            const auto ms = parse_metrics(metrics);
            const fs::path dir(out_path);
            const auto r = run_validate(manifest, config, log);
            write_json(dir / "validation.json", to_json(r), log);
            if (!r.ok()) return kFailure;
            write_json(dir / "disparity.json", run_disparity(manifest, config, ms), log);
            write_json(dir / "objstats.json", run_objects(manifest, config), log);
            write_json(dir / "groups.json", run_groups(manifest, config), log);
            const auto bundle = report::load_bundle(dir);
            const auto written = report::write_report(
                bundle, {report::Format::csv, report::Format::json, report::Format::markdown, report::Format::svg},
                top_k, dir / "report");
            log.info("report", "wrote " + std::to_string(written.size()) + " report files", {{"files", written}});
            return kOk;
        }
    } catch (const UsageError& e) {
        log.error("usage", e.what());
        return kUsage;
    } catch (const Error& e) {
        log.error("failure", e.what(), {{"code", std::string(to_string(e.code()))}});
        return kFailure;
    } catch (const std::exception& e) {
        log.error("failure", e.what());
        return kFailure;
    }
    return kUsage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace biastrace::cli
