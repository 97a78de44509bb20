#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "emitcast/dataio.hpp"
#include "emitcast/error.hpp"

namespace emitcast {

// ---------------------------------------------------------------------------
// Standard deviational ellipse
// ---------------------------------------------------------------------------

struct WeightedPoint {
    double x = 0.0;
    double y = 0.0;
    double weight = 1.0;
};

/// One-standard-deviation ellipse. theta is the direction of the major axis,
/// counter-clockwise from +x, in [0, pi).
struct EllipseSummary {
    double center_x = 0.0;
    double center_y = 0.0;
    double theta = 0.0;
    double sigma_major = 0.0;
    double sigma_minor = 0.0;
    double area = 0.0;
};

inline EllipseSummary sde(const std::vector<WeightedPoint>& points) {
    if (points.size() < 3) throw InputError("an ellipse needs at least three points");
    double wsum = 0.0;
    for (const auto& p : points) {
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
            throw InputError("ellipse weights must be finite and non-negative");
        wsum += p.weight;
    }
    if (!(wsum > 0.0)) throw InputError("ellipse weights sum to zero");

    EllipseSummary e;
    for (const auto& p : points) {
        e.center_x += p.weight * p.x;
        e.center_y += p.weight * p.y;
    }
    e.center_x /= wsum;
    e.center_y /= wsum;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        const double dx = p.x - e.center_x;
        const double dy = p.y - e.center_y;
        sxx += p.weight * dx * dx;
        syy += p.weight * dy * dy;
        sxy += p.weight * dx * dy;
    }
    sxx /= wsum;
    syy /= wsum;
    sxy /= wsum;
    if (sxx == 0.0 && syy == 0.0) return e;  // all mass at one point

    double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    if (theta < 0.0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
    const double mid = 0.5 * (sxx + syy);
    const double rad = std::hypot(0.5 * (sxx - syy), sxy);
    e.theta = theta;
    e.sigma_major = std::sqrt(mid + rad);
    e.sigma_minor = std::sqrt(std::max(mid - rad, 0.0));
    e.area = std::numbers::pi * e.sigma_major * e.sigma_minor;
    return e;
}

using Coordinates = std::map<std::string, std::pair<double, double>>;

inline Coordinates load_coordinates(const std::filesystem::path& path) {
    auto doc = read_csv(path);
    require_header(doc, {"province", "longitude", "latitude"});
    Coordinates out;
    for (const auto& row : doc.rows) {
        auto x = detail::parse_double(row.fields[1]);
        auto y = detail::parse_double(row.fields[2]);
        if (!x || !y) throw InputError(detail::where(doc, row, "longitude") + ": not a number");
        if (!out.emplace(row.fields[0], std::make_pair(*x, *y)).second)
            throw InputError(detail::where(doc, row, "province") + ": duplicate province");
    }
    return out;
}

struct CentroidStep {
    int year = 0;
    EllipseSummary ellipse;
    /// Centre movement since the previous year; zero for the first year.
    double drift_x = 0.0;
    double drift_y = 0.0;
};

/// Yearly emission-weighted ellipses over province centroids.
inline std::vector<CentroidStep> centroid_path(
    const std::map<int, std::map<std::string, double>>& emissions_by_year,
    const Coordinates& coords) {
    std::vector<CentroidStep> out;
    for (const auto& [year, by_province] : emissions_by_year) {
        std::vector<WeightedPoint> pts;
        for (const auto& [province, value] : by_province) {
            auto it = coords.find(province);
            if (it == coords.end())
                throw InputError("no coordinates for province '" + province + "'");
            pts.push_back({it->second.first, it->second.second, value});
        }
        CentroidStep step{year, sde(pts), 0.0, 0.0};
        if (!out.empty()) {
            step.drift_x = step.ellipse.center_x - out.back().ellipse.center_x;
            step.drift_y = step.ellipse.center_y - out.back().ellipse.center_y;
        }
        out.push_back(step);
    }
    return out;
}

inline Table to_table(const std::vector<CentroidStep>& path) {
    Table t;
    t.columns = {"year", "center_x", "center_y", "theta", "sigma_major", "sigma_minor", "area",
                 "drift_x", "drift_y"};
    for (const auto& s : path)
        t.rows.push_back({std::int64_t{s.year}, s.ellipse.center_x, s.ellipse.center_y,
                          s.ellipse.theta, s.ellipse.sigma_major, s.ellipse.sigma_minor,
                          s.ellipse.area, s.drift_x, s.drift_y});
    return t;
}

// ---------------------------------------------------------------------------
// Group variance tests
// ---------------------------------------------------------------------------

struct GroupSummary {
    std::string name;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

inline GroupSummary summarize(std::string name, const std::vector<double>& values) {
    GroupSummary g{std::move(name), values.size(), 0.0, 0.0};
    if (g.n < 2) throw InputError("group '" + g.name + "' needs at least two observations");
    for (double v : values) g.mean += v;
    g.mean /= double(g.n);
    double ss = 0.0;
    for (double v : values) ss += (v - g.mean) * (v - g.mean);
    g.sd = std::sqrt(ss / double(g.n - 1));
    return g;
}

enum class TestMethod { welch, classic_anova };

inline std::string_view to_string(TestMethod m) {
    return m == TestMethod::welch ? "welch" : "classic_anova";
}

struct WelchResult {
    double f = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::welch;
};

/// Upper tail of the F(df1, df2) distribution.
inline double f_survival(double f, double df1, double df2) {
    if (!(f > 0.0)) return 1.0;
    return boost::math::ibeta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

namespace detail {

inline void check_groups(const std::vector<GroupSummary>& groups) {
    if (groups.size() < 2) throw InputError("a variance test needs at least two groups");
    for (const auto& g : groups) {
        if (g.n < 2) throw InputError("group '" + g.name + "' needs at least two observations");
        if (!(g.sd > 0.0) || !std::isfinite(g.sd))
            throw InputError("group '" + g.name + "' has zero or invalid standard deviation");
        if (!std::isfinite(g.mean)) throw InputError("group '" + g.name + "' has invalid mean");
    }
}

}  // namespace detail

/// Welch's heteroscedastic one-way ANOVA from group summaries.
inline WelchResult welch_test(const std::vector<GroupSummary>& groups) {
    detail::check_groups(groups);
    const double k = double(groups.size());
    double wsum = 0.0, wmean = 0.0;
    for (const auto& g : groups) {
        const double w = double(g.n) / (g.sd * g.sd);
        wsum += w;
        wmean += w * g.mean;
    }
    wmean /= wsum;
    double a = 0.0, lambda = 0.0;
    for (const auto& g : groups) {
        const double w = double(g.n) / (g.sd * g.sd);
        a += w * (g.mean - wmean) * (g.mean - wmean);
        const double h = 1.0 - w / wsum;
        lambda += h * h / double(g.n - 1);
    }
    a /= (k - 1.0);
    const double b = 1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda;
    WelchResult r;
    r.method = TestMethod::welch;
    r.f = a / b;
    r.df1 = k - 1.0;
    r.df2 = (k * k - 1.0) / (3.0 * lambda);
    r.p_value = f_survival(r.f, r.df1, r.df2);
    return r;
}

/// Pooled-variance one-way ANOVA from group summaries.
inline WelchResult classic_anova(const std::vector<GroupSummary>& groups) {
    detail::check_groups(groups);
    double n_total = 0.0, grand = 0.0;
    for (const auto& g : groups) {
        n_total += double(g.n);
        grand += double(g.n) * g.mean;
    }
    grand /= n_total;
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        ssb += double(g.n) * (g.mean - grand) * (g.mean - grand);
        ssw += double(g.n - 1) * g.sd * g.sd;
    }
    const double k = double(groups.size());
    WelchResult r;
    r.method = TestMethod::classic_anova;
    r.df1 = k - 1.0;
    r.df2 = n_total - k;
    r.f = (ssb / r.df1) / (ssw / r.df2);
    r.p_value = f_survival(r.f, r.df1, r.df2);
    return r;
}

inline WelchResult run_test(const std::vector<GroupSummary>& groups, TestMethod m) {
    return m == TestMethod::welch ? welch_test(groups) : classic_anova(groups);
}

// ---------------------------------------------------------------------------
// Groupings
// ---------------------------------------------------------------------------

enum class GroupScheme { digital_economy, region_ecw, industry_structure_ratio, new_productivity };

inline std::optional<GroupScheme> parse_group_scheme(std::string_view s) {
    if (s == "digital_economy") return GroupScheme::digital_economy;
    if (s == "region_ecw") return GroupScheme::region_ecw;
    if (s == "industry_structure_ratio") return GroupScheme::industry_structure_ratio;
    if (s == "new_productivity") return GroupScheme::new_productivity;
    return std::nullopt;
}

inline std::string_view to_string(GroupScheme s) {
    switch (s) {
        case GroupScheme::digital_economy: return "digital_economy";
        case GroupScheme::region_ecw: return "region_ecw";
        case GroupScheme::industry_structure_ratio: return "industry_structure_ratio";
        case GroupScheme::new_productivity: return "new_productivity";
    }
    return "?";
}

struct Observation {
    std::string province;
    int year = 0;
    double value = 0.0;
};

/// Fixed province -> group table; groups keep their first-appearance order.
struct GroupingTable {
    std::vector<std::string> groups;
    std::map<std::string, std::string> group_of;
};

inline GroupingTable load_grouping_table(const std::filesystem::path& path) {
    auto doc = read_csv(path);
    require_header(doc, {"province", "group"});
    GroupingTable t;
    for (const auto& row : doc.rows) {
        if (!t.group_of.emplace(row.fields[0], row.fields[1]).second)
            throw InputError(detail::where(doc, row, "province") + ": duplicate province");
        if (std::find(t.groups.begin(), t.groups.end(), row.fields[1]) == t.groups.end())
            t.groups.push_back(row.fields[1]);
    }
    return t;
}

inline std::vector<GroupSummary> assign_groups(const std::vector<Observation>& obs,
                                               const GroupingTable& table) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& o : obs) {
        auto it = table.group_of.find(o.province);
        if (it == table.group_of.end())
            throw InputError("province '" + o.province + "' is missing from the grouping table");
        values[it->second].push_back(o.value);
    }
    std::vector<GroupSummary> out;
    for (const auto& g : table.groups)
        if (auto it = values.find(g); it != values.end()) out.push_back(summarize(g, it->second));
    return out;
}

using Covariate = std::map<std::pair<std::string, int>, double>;

/// Splits observations at the mean of their (province, year) covariate:
/// strictly above the mean is "high", the rest "low".
inline std::vector<GroupSummary> assign_groups_by_mean(const std::vector<Observation>& obs,
                                                       const Covariate& covariate) {
    std::vector<double> cov;
    for (const auto& o : obs) {
        auto it = covariate.find({o.province, o.year});
        if (it == covariate.end())
            throw InputError("no covariate for " + o.province + " " + std::to_string(o.year));
        cov.push_back(it->second);
    }
    if (cov.empty()) throw InputError("no observations to group");
    double mean = 0.0;
    for (double c : cov) mean += c;
    mean /= double(cov.size());
    std::vector<double> high, low;
    for (std::size_t i = 0; i < obs.size(); ++i) (cov[i] > mean ? high : low).push_back(obs[i].value);
    if (high.empty() || low.empty())
        throw InputError("mean split puts every observation in one group; the covariate needs distinct values");
    return {summarize("high", high), summarize("low", low)};
}

/// Tertiary-to-secondary output ratio G3/G2 per province-year.
inline Covariate industry_structure_ratio(const EconomicPanel& econ) {
    Covariate out;
    for (const auto& r : econ.records()) out[{r.province, r.year}] = r.gdp[2] / r.gdp[1];
    return out;
}

inline Covariate load_covariate(const std::filesystem::path& path) {
    auto doc = read_csv(path);
    require_header(doc, {"province", "year", "value"});
    Covariate out;
    for (const auto& row : doc.rows) {
        auto y = detail::parse_int(row.fields[1]);
        auto v = detail::parse_double(row.fields[2]);
        if (!y) throw InputError(detail::where(doc, row, "year") + ": not an integer");
        if (!v) throw InputError(detail::where(doc, row, "value") + ": not a number");
        out[{row.fields[0], static_cast<int>(*y)}] = *v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Published group summary tables
// ---------------------------------------------------------------------------

struct GroupTableFixture {
    std::string table;
    TestMethod method = TestMethod::welch;
    double published_f = 0.0;
    double published_p = 0.0;
    /// False for tables whose printed numbers contradict each other.
    bool consistent = true;
    std::vector<GroupSummary> groups;
};

inline std::vector<GroupTableFixture> load_group_fixtures(const std::filesystem::path& path) {
    auto doc = read_csv(path);
    require_header(doc, {"table", "group", "n", "mean", "sd", "f", "p", "method", "status"});
    std::vector<GroupTableFixture> out;
    for (const auto& row : doc.rows) {
        if (out.empty() || out.back().table != row.fields[0]) {
            GroupTableFixture fx;
            fx.table = row.fields[0];
            auto f = detail::parse_double(row.fields[5]);
            auto p = detail::parse_double(row.fields[6]);
            if (!f || !p) throw InputError(detail::where(doc, row, "f") + ": not a number");
            fx.published_f = *f;
            fx.published_p = *p;
            if (row.fields[7] == "welch") fx.method = TestMethod::welch;
            else if (row.fields[7] == "classic_anova") fx.method = TestMethod::classic_anova;
            else throw InputError(detail::where(doc, row, "method") + ": unknown method");
            fx.consistent = row.fields[8] != "DISCREPANCY";
            out.push_back(std::move(fx));
        }
        auto n = detail::parse_int(row.fields[2]);
        auto m = detail::parse_double(row.fields[3]);
        auto s = detail::parse_double(row.fields[4]);
        if (!n || *n < 0 || !m || !s)
            throw InputError(detail::where(doc, row, "n") + ": malformed group summary");
        out.back().groups.push_back({row.fields[1], static_cast<std::size_t>(*n), *m, *s});
    }
    return out;
}

inline Table to_table(const std::vector<GroupSummary>& groups, const WelchResult& r) {
    Table t;
    t.columns = {"group", "n", "mean", "sd", "method", "F", "df1", "df2", "p_value"};
    for (const auto& g : groups)
        t.rows.push_back({g.name, static_cast<std::int64_t>(g.n), g.mean, g.sd,
                          std::string(to_string(r.method)), r.f, r.df1, r.df2, r.p_value});
    return t;
}

}  // namespace emitcast
