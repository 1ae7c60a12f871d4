#include <algorithm>
#include <map>
#include <sstream>

#include "biastrace/error.hpp"
#include "biastrace/report.hpp"

namespace biastrace::report {
namespace {

constexpr double kWidth = 720.0;
constexpr double kLabelRight = 204.0;
constexpr double kBarLeft = 210.0;
constexpr double kBarSpan = 400.0;
constexpr double kTop = 44.0;
constexpr double kRow = 22.0;
constexpr double kBarHeight = 16.0;
constexpr double kBottom = 44.0;

constexpr const char* kMasculine = "#1f77b4";
constexpr const char* kFeminine = "#ff7f0e";
constexpr const char* kBalanced = "#999999";
constexpr const char* kReference = "#2ca02c";

std::string num(double v) {
    std::string s = fixed_half_even(v, 2);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_bias_chart(const std::vector<objstats::BiasScoreEntry>& entries, std::size_t k,
                              const std::string& title) {
    const auto ranking = objstats::bias_ranking(entries, k);
    std::map<std::string, objstats::BiasScoreEntry> picked;
    for (const auto& e : ranking.top_masculine) picked.emplace(e.object, e);
    for (const auto& e : ranking.top_feminine) picked.emplace(e.object, e);
    if (picked.empty()) throw Error(ErrorCode::EmptyEntries, "no supported bias-score entries to plot");
    std::vector<objstats::BiasScoreEntry> bars;
    for (auto& [_, e] : picked) bars.push_back(std::move(e));
    std::stable_sort(bars.begin(), bars.end(), [](const auto& a, const auto& b) { return *a.score > *b.score; });

    const double height = kTop + kRow * static_cast<double>(bars.size()) + kBottom;
    const double axis_y = kTop + kRow * static_cast<double>(bars.size()) + 4.0;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height)
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out << "  <text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& e = bars[i];
        const double score = *e.score;
        const double y = kTop + kRow * static_cast<double>(i);
        const char* fill = score > 0.5 ? kMasculine : score < 0.5 ? kFeminine : kBalanced;
        const std::string label = fixed_half_even(score, 3);
        out << "  <text x=\"" << num(kLabelRight) << "\" y=\"" << num(y + 12) << "\" text-anchor=\"end\">"
            << escape(e.object) << "</text>\n";
        out << "  <rect x=\"" << num(kBarLeft) << "\" y=\"" << num(y) << "\" width=\"" << num(score * kBarSpan)
            << "\" height=\"" << num(kBarHeight) << "\" fill=\"" << fill << "\"><title>" << escape(e.object)
            << " BS=" << label << " (C_m=" << e.c_m << ", C_f=" << e.c_f << ")</title></rect>\n";
        out << "  <text x=\"" << num(kBarLeft + score * kBarSpan + 4) << "\" y=\"" << num(y + 12) << "\">" << label
            << "</text>\n";
    }
    out << "  <line x1=\"" << num(kBarLeft) << "\" y1=\"" << num(axis_y) << "\" x2=\"" << num(kBarLeft + kBarSpan)
        << "\" y2=\"" << num(axis_y) << "\" stroke=\"#333333\"/>\n";
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double x = kBarLeft + t * kBarSpan;
        out << "  <line x1=\"" << num(x) << "\" y1=\"" << num(axis_y) << "\" x2=\"" << num(x) << "\" y2=\""
            << num(axis_y + 4) << "\" stroke=\"#333333\"/>\n";
        out << "  <text x=\"" << num(x) << "\" y=\"" << num(axis_y + 18) << "\" text-anchor=\"middle\">"
            << fixed_half_even(t, 2) << "</text>\n";
    }
    const double ref = kBarLeft + 0.5 * kBarSpan;
    out << "  <line class=\"reference\" x1=\"" << num(ref) << "\" y1=\"" << num(kTop - 6) << "\" x2=\"" << num(ref)
        << "\" y2=\"" << num(axis_y) << "\" stroke=\"" << kReference
        << "\" stroke-width=\"2\" stroke-dasharray=\"4 3\"/>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace biastrace::report
