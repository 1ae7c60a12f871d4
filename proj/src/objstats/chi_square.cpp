#include <algorithm>
#include <cmath>
#include <limits>

#include "biastrace/error.hpp"
#include "biastrace/objstats.hpp"

namespace biastrace::objstats {
namespace {

constexpr int kMaxIterations = 100000;
constexpr double kEps = 1e-16;

// P(a, x) by its power series; converges quickly for x < a + 1.
double lower_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Lentz continued fraction; used for x >= a + 1.
double upper_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a)) {
        throw Error(ErrorCode::InvalidArgument, "regularized_gamma_q needs a > 0 and x >= 0");
    }
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - lower_series(a, x), 0.0, 1.0);
    return std::clamp(upper_fraction(a, x), 0.0, 1.0);
}

double chi_square_p_value(double statistic, std::int64_t dof) {
    if (dof < 1) throw Error(ErrorCode::InvalidArgument, "chi-square dof must be >= 1");
    if (!(statistic >= 0.0)) throw Error(ErrorCode::InvalidArgument, "chi-square statistic must be >= 0");
    return regularized_gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
}

ChiSquareResult chi_square_test(const std::vector<CooccurrenceTable>& tables, std::int64_t min_objects, bool yates) {
    if (tables.size() < 2) throw Error(ErrorCode::InvalidArgument, "chi-square needs at least two tables");
    ChiSquareResult r;
    for (const auto& t : tables) r.variants.emplace_back(to_string(t.variant));

    // Columns: union of object names with a nonzero grand total.
    std::map<std::string, std::int64_t> column_total;
    for (const auto& t : tables) {
        for (const auto& [name, c] : t.totals) {
            if (c < 0) throw Error(ErrorCode::InvalidArgument, "negative count for '" + name + "'");
            column_total[name] += c;
        }
    }
    std::vector<std::string> columns;
    for (const auto& [name, total] : column_total) {
        if (total > 0) columns.push_back(name);
    }
    r.n_objects = columns.size();
    if (static_cast<std::int64_t>(columns.size()) < min_objects) {
        r.applied = false;
        r.skip_reason = "only " + std::to_string(columns.size()) + " distinct objects (< " +
                        std::to_string(min_objects) + ")";
        return r;
    }
    if (columns.size() < 2) throw Error(ErrorCode::DegenerateTable, "fewer than two object columns");

    std::vector<double> row_total(tables.size(), 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        for (const auto& name : columns) {
            auto it = tables[i].totals.find(name);
            if (it != tables[i].totals.end()) row_total[i] += static_cast<double>(it->second);
        }
        if (row_total[i] == 0.0) {
            throw Error(ErrorCode::DegenerateTable, std::string(to_string(tables[i].variant)) + " row has no objects");
        }
        grand += row_total[i];
    }

    const std::int64_t dof = static_cast<std::int64_t>(tables.size() - 1) * static_cast<std::int64_t>(columns.size() - 1);
    const bool correct = yates && dof == 1;
    double stat = 0.0;
    for (const auto& name : columns) {
        const double col = static_cast<double>(column_total[name]);
        for (std::size_t i = 0; i < tables.size(); ++i) {
            auto it = tables[i].totals.find(name);
            const double obs = it == tables[i].totals.end() ? 0.0 : static_cast<double>(it->second);
            const double exp = row_total[i] * col / grand;
            double diff = std::fabs(obs - exp);
            if (correct) diff = std::max(0.0, diff - 0.5);
            stat += diff * diff / exp;
        }
    }
    r.statistic = stat;
    r.dof = dof;
    r.p_value = chi_square_p_value(stat, dof);
    r.applied = true;
    return r;
}

}  // namespace biastrace::objstats
