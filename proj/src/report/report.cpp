#include "biastrace/report.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"

namespace biastrace::report {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kVariants[] = {"neutral", "feminine", "masculine"};
const char* const kGroups[] = {"explicitly_guided", "implicitly_guided", "explicitly_independent",
                               "implicitly_independent", "hidden"};
const char* const kPairTests[] = {"neutral_feminine", "neutral_masculine", "feminine_masculine"};

json parse_json_file(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, p.filename().string() + ": " + e.what());
    }
}

std::string format_cell(CellKind kind, const json& v) {
    if (v.is_null()) return "";
    switch (kind) {
        case CellKind::text: return v.is_string() ? v.get<std::string>() : v.dump();
        case CellKind::flag: return v.get<bool>() ? "yes" : "no";
        case CellKind::integer: return std::to_string(v.get<std::int64_t>());
        case CellKind::similarity: return fixed_half_even(v.get<double>(), 3);
        case CellKind::percent: return fixed_half_even(v.get<double>(), 2);
        case CellKind::statistic: return fixed_half_even(v.get<double>(), 3);
        case CellKind::p_value: return sci3(v.get<double>());
    }
    return "";
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

const json& section(const std::optional<json>& s, const char* name) {
    if (!s) throw Error(ErrorCode::MissingSection, std::string(name) + " results are missing");
    return *s;
}

const json& at(const json& j, const char* key, const char* section_name) {
    if (!j.contains(key)) throw Error(ErrorCode::MissingSection, std::string(section_name) + " lacks '" + key + "'");
    return j.at(key);
}

void add_row(Table& t, const std::vector<json>& cells) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row.push_back(format_cell(t.columns[i].kind, cells[i]));
    t.rows.push_back(std::move(row));
}

void add_chi_rows(Table& t, const std::string& scope, const json& set) {
    auto one = [&](const std::string& test, const json& r) {
        const bool applied = r.at("applied").get<bool>();
        add_row(t, {scope, test, applied, r.at("n_objects"), applied ? r.at("statistic") : json(nullptr),
                    applied ? r.at("dof") : json(nullptr), applied ? r.at("p_value") : json(nullptr),
                    r.at("skip_reason")});
    };
    one("triplet", set.at("triplet"));
    for (const char* p : kPairTests) {
        if (set.at("pairs").contains(p)) one(p, set.at("pairs").at(p));
    }
}

void add_bias_rows(Table& t, const std::vector<json>& prefix, const json& list) {
    for (const auto& e : list) {
        if (e.at("score").is_null()) continue;
        auto cells = prefix;
        for (const char* k : {"object", "c_m", "c_f", "score", "supported"}) cells.push_back(e.at(k));
        add_row(t, cells);
    }
}

std::vector<Column> bias_columns() {
    return {{"object", CellKind::text},
            {"c_m", CellKind::integer},
            {"c_f", CellKind::integer},
            {"score", CellKind::similarity},
            {"supported", CellKind::flag}};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

bool numeric(CellKind k) { return k != CellKind::text && k != CellKind::flag; }

json cell_json(CellKind k, const std::string& s) {
    if (s.empty()) return nullptr;
    switch (k) {
        case CellKind::text: return s;
        case CellKind::flag: return s == "yes";
        case CellKind::integer: return std::strtoll(s.c_str(), nullptr, 10);
        default: return std::strtod(s.c_str(), nullptr);
    }
}

}  // namespace

std::optional<Format> parse_format(std::string_view s) noexcept {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    if (s == "markdown" || s == "md") return Format::markdown;
    if (s == "svg") return Format::svg;
    return std::nullopt;
}

std::string_view to_string(Format f) noexcept {
    switch (f) {
        case Format::csv: return "csv";
        case Format::json: return "json";
        case Format::markdown: return "markdown";
        case Format::svg: return "svg";
    }
    return "csv";
}

Table disparity_table(const std::vector<disparity::DisparityRow>& rows) {
    std::vector<std::string> features;
    for (const char* f : {"resnet", "clip", "dino"}) {
        for (const auto& r : rows) {
            if (r.feature_sims.count(f)) {
                features.emplace_back(f);
                break;
            }
        }
    }
    std::set<std::string> extra;
    for (const auto& r : rows) {
        for (const auto& [k, _] : r.feature_sims) {
            if (std::find(features.begin(), features.end(), k) == features.end()) extra.insert(k);
        }
    }
    features.insert(features.end(), extra.begin(), extra.end());

    Table t{"disparity", "Representational disparity", {}, {}};
    t.columns = {{"pair", CellKind::text},        {"n_pairs", CellKind::integer}, {"prompt", CellKind::similarity},
                 {"denoising", CellKind::similarity}, {"ssim", CellKind::similarity}, {"diff_pix", CellKind::percent}};
    for (const auto& f : features) t.columns.push_back({f, CellKind::similarity});
    t.columns.push_back({"split_product", CellKind::similarity});
    for (const auto& r : rows) {
        std::vector<json> cells = {std::string(disparity::to_string(r.pair)), r.n_pairs, opt(r.prompt_sim),
                                   opt(r.denoise_sim), opt(r.ssim), opt(r.diff_pix)};
        for (const auto& f : features) {
            auto it = r.feature_sims.find(f);
            cells.push_back(it == r.feature_sims.end() ? json(nullptr) : json(it->second));
        }
        cells.push_back(opt(r.split_product));
        std::vector<std::string> row;
        for (std::size_t i = 0; i < cells.size(); ++i) row.push_back(format_cell(t.columns[i].kind, cells[i]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i].name);
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
        out += "\n";
    }
    return out;
}

Table bias_table(const json& bias_scores) {
    Table t{"bias_scores", "Bias scores", bias_columns(), {}};
    add_bias_rows(t, {}, bias_scores);
    return t;
}

ReportBundle load_bundle(const fs::path& dir) {
    ReportBundle b;
    auto take_metadata = [&](const json& j) {
        if (b.metadata.empty() && j.is_object() && j.contains("metadata")) b.metadata = j.at("metadata");
    };
    if (fs::exists(dir / "disparity.json")) {
        const auto j = parse_json_file(dir / "disparity.json");
        take_metadata(j);
        b.disparity = disparity::table_from_json(j.is_array() ? j : j.at("rows"));
    }
    if (fs::exists(dir / "objstats.json")) {
        auto j = parse_json_file(dir / "objstats.json");
        take_metadata(j);
        b.objstats = std::move(j);
    }
    if (fs::exists(dir / "groups.json")) {
        auto j = parse_json_file(dir / "groups.json");
        take_metadata(j);
        b.groups = std::move(j);
    }
    if (!b.disparity && !b.objstats && !b.groups) {
        throw Error(ErrorCode::MissingSection, "no analysis results found in " + dir.filename().string());
    }
    return b;
}

std::vector<Table> build_tables(const ReportBundle& bundle) {
    if (!bundle.disparity) throw Error(ErrorCode::MissingSection, "disparity results are missing");
    const json& obj = section(bundle.objstats, "objstats");
    const json& grp = section(bundle.groups, "groups");
    const json& stats = at(grp, "statistics", "groups");

    std::vector<Table> tables;
    tables.push_back(disparity_table(*bundle.disparity));

    Table sim{"cooccurrence_similarity", "Co-occurrence similarity", {}, {}};
    sim.columns = {{"pair", CellKind::text},
                   {"s_o", CellKind::similarity},
                   {"n_pairs", CellKind::integer},
                   {"skipped_empty", CellKind::integer}};
    for (const auto& [pair, s] : at(obj, "similarity", "objstats").items()) {
        add_row(sim, {pair, s.at("value"), s.at("n_pairs"), s.at("skipped_empty")});
    }
    tables.push_back(std::move(sim));

    Table chi{"chi_square", "Chi-square tests", {}, {}};
    chi.columns = {{"scope", CellKind::text},     {"test", CellKind::text},    {"applied", CellKind::flag},
                   {"n_objects", CellKind::integer}, {"statistic", CellKind::statistic}, {"dof", CellKind::integer},
                   {"p_value", CellKind::p_value},   {"skip_reason", CellKind::text}};
    add_chi_rows(chi, "objects", at(obj, "chi_square", "objstats"));
    const json& groups = at(stats, "groups", "groups");
    for (const char* g : kGroups) {
        if (groups.contains(g)) add_chi_rows(chi, g, groups.at(g).at("chi_square"));
    }
    tables.push_back(std::move(chi));

    tables.push_back(bias_table(at(obj, "bias_scores", "objstats")));

    const json& variants = at(stats, "variants", "groups");
    Table cov{"group_coverage", "Images containing each dependency group (%)", {}, {}};
    cov.columns = {{"variant", CellKind::text}, {"n_images", CellKind::integer}};
    for (const char* g : kGroups) cov.columns.push_back({g, CellKind::percent});
    Table counts{"group_counts", "Distinct objects per dependency group", {}, {}};
    counts.columns = {{"variant", CellKind::text}};
    for (const char* g : kGroups) counts.columns.push_back({g, CellKind::integer});
    counts.columns.push_back({"nouns", CellKind::integer});
    Table inter{"group_intersection", "Intersection ratio of distinct objects (%)", {}, {}};
    inter.columns = {{"variant", CellKind::text}, {"over", CellKind::text}};
    std::vector<std::string> set_names(std::begin(kGroups), std::end(kGroups));
    set_names.emplace_back("nouns");
    for (const auto& s : set_names) inter.columns.push_back({s, CellKind::percent});

    for (const char* v : kVariants) {
        if (!variants.contains(v)) continue;
        const json& vs = variants.at(v);
        std::vector<json> c = {v, vs.at("n_images")};
        for (const char* g : kGroups) c.push_back(vs.at("image_percent").at(g));
        add_row(cov, c);
        std::vector<json> n = {v};
        for (const char* g : kGroups) n.push_back(vs.at("distinct").at(g));
        n.push_back(vs.at("noun_count"));
        add_row(counts, n);
        for (const auto& a : set_names) {
            std::vector<json> r = {v, a};
            for (const auto& b : set_names) r.push_back(vs.at("intersection").at(a).at(b));
            add_row(inter, r);
        }
    }
    tables.push_back(std::move(cov));
    tables.push_back(std::move(counts));
    tables.push_back(std::move(inter));

    Table gbias{"group_bias_scores", "Bias scores per dependency group", {}, {}};
    gbias.columns = bias_columns();
    gbias.columns.insert(gbias.columns.begin(), Column{"group", CellKind::text});
    for (const char* g : kGroups) {
        if (groups.contains(g)) add_bias_rows(gbias, {g}, groups.at(g).at("bias_scores"));
    }
    tables.push_back(std::move(gbias));
    return tables;
}

std::map<std::string, std::string> render_tables(const ReportBundle& bundle, Format format) {
    const auto tables = build_tables(bundle);
    std::map<std::string, std::string> files;
    switch (format) {
        case Format::csv:
            for (const auto& t : tables) files[t.name + ".csv"] = to_csv(t);
            break;
        case Format::json: {
            json j;
            j["metadata"] = bundle.metadata;
            for (const auto& t : tables) {
                json rows = json::array();
                for (const auto& row : t.rows) {
                    json r = json::object();
                    for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i].name] = cell_json(t.columns[i].kind, row[i]);
                    rows.push_back(std::move(r));
                }
                json cols = json::array();
                for (const auto& c : t.columns) cols.push_back(c.name);
                j["tables"][t.name] = {{"title", t.title}, {"columns", cols}, {"rows", rows}};
            }
            files["report.json"] = j.dump(2) + "\n";
            break;
        }
        case Format::markdown: {
            std::ostringstream out;
            out << "# biastrace report\n\n";
            if (bundle.metadata.contains("dataset")) out << "Dataset: " << bundle.metadata.at("dataset").get<std::string>() << "\n\n";
            for (const auto& t : tables) {
                out << "## " << t.title << "\n\n|";
                for (const auto& c : t.columns) out << ' ' << md_field(c.name) << " |";
                out << "\n|";
                for (const auto& c : t.columns) out << (numeric(c.kind) ? " ---: |" : " --- |");
                out << '\n';
                for (const auto& row : t.rows) {
                    out << '|';
                    for (const auto& cell : row) out << ' ' << md_field(cell) << " |";
                    out << '\n';
                }
                out << '\n';
            }
            files["report.md"] = out.str();
            break;
        }
        case Format::svg:
            throw Error(ErrorCode::InvalidArgument, "svg is not a table format");
    }
    return files;
}

std::vector<std::string> write_report(const ReportBundle& bundle, const std::set<Format>& formats, std::size_t k,
                                      const fs::path& out_dir) {
    std::map<std::string, std::string> files;
    for (auto f : formats) {
        if (f == Format::svg) continue;
        auto rendered = render_tables(bundle, f);
        files.insert(rendered.begin(), rendered.end());
    }
    if (formats.count(Format::svg)) {
        const json& obj = section(bundle.objstats, "objstats");
        auto overall = objstats::bias_list_from_json(at(obj, "bias_scores", "objstats"));
        auto chart = [&](const std::vector<objstats::BiasScoreEntry>& entries, const std::string& name,
                         const std::string& title) {
            try {
                files[name] = render_bias_chart(entries, k, title);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyEntries) throw;
            }
        };
        chart(overall, "bias_chart.svg", "Bias scores");
        if (bundle.groups) {
            const json& groups = at(at(*bundle.groups, "statistics", "groups"), "groups", "groups");
            for (const char* g : kGroups) {
                if (!groups.contains(g)) continue;
                chart(objstats::bias_list_from_json(groups.at(g).at("bias_scores")),
                      std::string("bias_chart_") + g + ".svg", std::string("Bias scores: ") + g);
            }
        }
    }
    std::vector<std::string> names;
    for (const auto& [name, contents] : files) {
        write_file_atomic(out_dir / name, contents);
        names.push_back(name);
    }
    return names;
}

}  // namespace biastrace::report
