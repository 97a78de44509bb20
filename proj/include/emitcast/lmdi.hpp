#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emitcast/accounting.hpp"
#include "emitcast/dataio.hpp"
#include "emitcast/error.hpp"

namespace emitcast {

/// Logarithmic mean (b - a) / ln(b / a), with L(a, a) = a.
inline double log_mean(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw InputError("log_mean needs two positive finite arguments");
    if (a == b) return a;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double u = hi / lo - 1.0;
    if (u < 1e-4) return lo * (1.0 + u / 2.0 - u * u / 12.0 + u * u * u / 24.0);
    return (hi - lo) / std::log(hi / lo);
}

/// Placeholder emission for cells that are zero in one year only.
inline constexpr double kZeroCellValue = 1e-10;

struct DecompositionRow {
    int year = 0;  // later year t of the pair (t-1, t)
    double dC_s = 0.0;
    double dC_f = 0.0;
    double dC_e = 0.0;
    double dC_n = 0.0;
    double dC_r = 0.0;
    double dC_p = 0.0;
    double total = 0.0;

    double effects_sum() const { return dC_s + dC_f + dC_e + dC_n + dC_r + dC_p; }

    DecompositionRow& operator+=(const DecompositionRow& o) {
        dC_s += o.dC_s;
        dC_f += o.dC_f;
        dC_e += o.dC_e;
        dC_n += o.dC_n;
        dC_r += o.dC_r;
        dC_p += o.dC_p;
        total += o.total;
        return *this;
    }
};

struct DecompositionTable {
    std::string province;
    std::vector<DecompositionRow> rows;
    DecompositionRow cumulative;
};

namespace detail {

constexpr std::size_t kFactorCount = 6;  // s f e n r p

inline std::array<double, kFactorCount> factor_values(const FactorCell& c) {
    return {c.share, c.coefficient, c.intensity, c.gdp_share, c.gdp_per_capita, c.population};
}

/// Replaces zero factors so the cell's product equals kZeroCellValue.
inline std::array<double, kFactorCount> lift_zero_cell(std::array<double, kFactorCount> f) {
    std::size_t first_zero = kFactorCount;
    double rest = 1.0;
    for (std::size_t k = 0; k < kFactorCount; ++k) {
        if (f[k] == 0.0) {
            if (first_zero == kFactorCount) first_zero = k;
            f[k] = 1.0;
        } else {
            rest *= f[k];
        }
    }
    f[first_zero] = kZeroCellValue / rest;
    return f;
}

inline void check_cell(const FactorCell& c, int year) {
    for (double v : factor_values(c))
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InputError("negative or non-finite identity factor in " + std::to_string(year) +
                             " (" + std::string(to_string(c.sector)) + ", " +
                             std::string(to_string(c.energy)) + ")");
}

}  // namespace detail

/// Additive LMDI-I split of C_t - C_{t-1}. The coefficient effect dC_f is
/// zero by construction because coefficients must not vary between years.
inline DecompositionRow decompose_pair(const YearFactors& prev, const YearFactors& curr) {
    if (prev.cells.size() != curr.cells.size())
        throw InputError("cell sets differ between " + std::to_string(prev.year) + " and " +
                         std::to_string(curr.year));
    DecompositionRow row;
    row.year = curr.year;
    double c_prev_total = 0.0;
    double c_curr_total = 0.0;
    std::size_t lifted = 0;
    for (std::size_t k = 0; k < prev.cells.size(); ++k) {
        const auto& a = prev.cells[k];
        const auto& b = curr.cells[k];
        if (a.sector != b.sector || a.energy != b.energy)
            throw InputError("cell sets differ between " + std::to_string(prev.year) + " and " +
                             std::to_string(curr.year));
        detail::check_cell(a, prev.year);
        detail::check_cell(b, curr.year);
        if (a.coefficient != b.coefficient)
            throw InputError("emission coefficient for " + std::string(to_string(a.energy)) +
                             " changes between " + std::to_string(prev.year) + " and " +
                             std::to_string(curr.year) +
                             "; the decomposition assumes fixed coefficients");
        const double ca = a.emissions();
        const double cb = b.emissions();
        c_prev_total += ca;
        c_curr_total += cb;
        if (ca == 0.0 && cb == 0.0) continue;
        auto fa = detail::factor_values(a);
        auto fb = detail::factor_values(b);
        double wa = ca, wb = cb;
        if (ca == 0.0) {
            fa = detail::lift_zero_cell(fa);
            wa = kZeroCellValue;
            ++lifted;
        }
        if (cb == 0.0) {
            fb = detail::lift_zero_cell(fb);
            wb = kZeroCellValue;
            ++lifted;
        }
        const double w = log_mean(wa, wb);
        row.dC_s += w * std::log(fb[0] / fa[0]);
        row.dC_e += w * std::log(fb[2] / fa[2]);
        row.dC_n += w * std::log(fb[3] / fa[3]);
        row.dC_r += w * std::log(fb[4] / fa[4]);
        row.dC_p += w * std::log(fb[5] / fa[5]);
    }
    row.total = c_curr_total - c_prev_total;
    const double tol = 1e-9 * std::abs(row.total) + 1e-12 * (c_prev_total + c_curr_total) +
                       2.0 * kZeroCellValue * double(lifted);
    if (!(std::abs(row.effects_sum() - row.total) <= tol)) {
        std::ostringstream os;
        os << "LMDI additivity violated for " << curr.year << ": effects sum "
           << row.effects_sum() << " vs change " << row.total;
        throw InvariantError(os.str());
    }
    return row;
}

inline DecompositionTable decompose_series(const std::vector<YearFactors>& years) {
    if (years.size() < 2) throw InputError("decomposition needs at least two years");
    DecompositionTable t;
    t.province = years.front().province;
    t.cumulative.year = years.back().year;
    for (std::size_t i = 1; i < years.size(); ++i) {
        if (years[i].year != years[i - 1].year + 1)
            throw InputError("years " + std::to_string(years[i - 1].year) + " and " +
                             std::to_string(years[i].year) + " are not consecutive");
        t.rows.push_back(decompose_pair(years[i - 1], years[i]));
        t.cumulative += t.rows.back();
    }
    return t;
}

inline Table to_table(const DecompositionTable& t) {
    Table out;
    out.columns = {"year", "dC_s", "dC_f", "dC_e", "dC_n", "dC_r", "dC_p", "total"};
    auto add = [&](Cell year, const DecompositionRow& r) {
        out.rows.push_back({std::move(year), r.dC_s, r.dC_f, r.dC_e, r.dC_n, r.dC_r, r.dC_p, r.total});
    };
    for (const auto& r : t.rows) add(std::int64_t{r.year}, r);
    add(std::string("cumulative"), t.cumulative);
    return out;
}

// ---------------------------------------------------------------------------
// Published effect tables
// ---------------------------------------------------------------------------

struct EffectFixtureRow {
    int year = 0;
    double structure = 0.0;
    double intensity = 0.0;
    double per_capita_gdp = 0.0;
    double population = 0.0;
    double industrial_structure = 0.0;
    double gross = 0.0;

    double effects_sum() const {
        return structure + intensity + per_capita_gdp + population + industrial_structure;
    }
};

inline std::vector<EffectFixtureRow> load_effect_fixture(const std::filesystem::path& path) {
    auto doc = read_csv(path);
    require_header(doc, {"year", "structure", "intensity", "per_capita_gdp", "population",
                         "industrial_structure", "gross"});
    std::vector<EffectFixtureRow> out;
    for (const auto& row : doc.rows) {
        EffectFixtureRow r;
        auto y = detail::parse_int(row.fields[0]);
        if (!y) throw InputError(detail::where(doc, row, "year") + ": not an integer");
        r.year = static_cast<int>(*y);
        double* slots[] = {&r.structure, &r.intensity, &r.per_capita_gdp, &r.population,
                           &r.industrial_structure, &r.gross};
        for (std::size_t c = 0; c < 6; ++c) {
            auto v = detail::parse_double(row.fields[c + 1]);
            if (!v) throw InputError(detail::where(doc, row, doc.header[c + 1]) + ": not a number");
            *slots[c] = *v;
        }
        out.push_back(r);
    }
    if (out.empty()) throw InputError(path.string() + ": no rows");
    return out;
}

struct FixtureCheck {
    int year = 0;
    double effects_sum = 0.0;
    double gross = 0.0;
    bool ok = false;
};

inline std::vector<FixtureCheck> verify_effect_fixture(const std::vector<EffectFixtureRow>& rows,
                                                       double tolerance = 0.01) {
    std::vector<FixtureCheck> out;
    for (const auto& r : rows) {
        const double s = r.effects_sum();
        out.push_back({r.year, s, r.gross, std::abs(s - r.gross) <= tolerance + 1e-9});
    }
    return out;
}

}  // namespace emitcast
