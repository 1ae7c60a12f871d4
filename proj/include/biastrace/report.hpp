#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "biastrace/disparity.hpp"
#include "biastrace/objstats.hpp"

namespace biastrace::report {

/// Fixed-point decimal string of `v` with `decimals` places, rounded half to
/// even on the exact binary value.
std::string fixed_half_even(double v, int decimals);
/// Scientific notation with three significant digits, e.g. "9.82e-03".
std::string sci3(double v);

/// Analysis outputs as read from disk. Sections are optional so partial runs
/// can be inspected; rendering checks what it needs.
struct ReportBundle {
    nlohmann::json metadata = nlohmann::json::object();
    std::optional<std::vector<disparity::DisparityRow>> disparity;
    std::optional<nlohmann::json> objstats;
    std::optional<nlohmann::json> groups;
};

/// Reads disparity.json, objstats.json and groups.json (whichever exist).
ReportBundle load_bundle(const std::filesystem::path& analysis_dir);

enum class CellKind { text, flag, integer, similarity, percent, statistic, p_value };

struct Column {
    std::string name;
    CellKind kind = CellKind::text;
};

/// A rendered table: every cell is already formatted; empty = no value.
struct Table {
    std::string name;
    std::string title;
    std::vector<Column> columns;
    std::vector<std::vector<std::string>> rows;
};

Table disparity_table(const std::vector<disparity::DisparityRow>& rows);
/// Scored entries of a bias-score list as written by the objects step.
Table bias_table(const nlohmann::json& bias_scores);
std::string to_csv(const Table& t);

/// Tables in a fixed order. Throws MissingSection when a section is absent.
std::vector<Table> build_tables(const ReportBundle& bundle);

enum class Format { csv, json, markdown, svg };
std::optional<Format> parse_format(std::string_view s) noexcept;
std::string_view to_string(Format f) noexcept;

/// File name -> contents for one table format (csv, json or markdown).
std::map<std::string, std::string> render_tables(const ReportBundle& bundle, Format format);

/// Horizontal bar chart of the k most masculine- and feminine-skewed
/// supported entries. Throws EmptyEntries when nothing survives filtering.
std::string render_bias_chart(const std::vector<objstats::BiasScoreEntry>& entries, std::size_t k,
                              const std::string& title);

/// Renders the requested formats into `out_dir`; returns written file names
/// relative to `out_dir`, sorted.
std::vector<std::string> write_report(const ReportBundle& bundle, const std::set<Format>& formats, std::size_t k,
                                      const std::filesystem::path& out_dir);

}  // namespace biastrace::report
