#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "emitcast/dataio.hpp"
#include "emitcast/error.hpp"
#include "emitcast/tsa.hpp"

namespace emitcast {

struct EmissionPoint {
    int year = 0;
    double emissions = 0.0;  // 10^4 t CO2

    friend bool operator==(const EmissionPoint&, const EmissionPoint&) = default;
};

struct EmissionSeries {
    std::string province = "ALL";
    std::string sector = "ALL";
    std::vector<EmissionPoint> points;
    std::vector<std::string> warnings;

    std::vector<int> years() const {
        std::vector<int> out;
        for (const auto& pt : points) out.push_back(pt.year);
        return out;
    }

    TimeSeries series() const {
        if (points.empty()) throw InputError("empty emission series");
        std::vector<double> v;
        for (const auto& pt : points) v.push_back(pt.emissions);
        return TimeSeries(points.front().year, std::move(v));
    }
};

/// Record filter. Empty fields select everything.
struct Scope {
    std::string province;
    std::vector<Sector> sectors;

    bool includes(const EnergyKey& k) const {
        if (!province.empty() && k.province != province) return false;
        return sectors.empty() || std::find(sectors.begin(), sectors.end(), k.sector) != sectors.end();
    }

    std::string sector_label() const {
        if (sectors.empty() || sectors.size() == kAllSectors.size()) return "ALL";
        std::string out;
        for (Sector s : kAllSectors)
            if (std::find(sectors.begin(), sectors.end(), s) != sectors.end()) {
                if (!out.empty()) out += '+';
                out += to_string(s);
            }
        return out;
    }
};

/// Residential power and heat are indirect emissions already counted at the
/// generating plant, so they carry no factor here.
inline bool excluded_from_accounting(Sector s, Energy e) {
    return s == Sector::residential && (e == Energy::power || e == Energy::heat);
}

inline double effective_factor(const EmissionFactorTable& factors, const EnergyKey& k) {
    if (excluded_from_accounting(k.sector, k.energy)) return 0.0;
    return factors.factor(k.energy, k.year) * EmissionFactorTable::kCarbonToCo2;
}

inline std::size_t excluded_record_count(const EnergyPanel& panel, const Scope& scope = {}) {
    std::size_t n = 0;
    for (const auto& r : panel.records())
        if (scope.includes(r.key) && excluded_from_accounting(r.key.sector, r.key.energy) &&
            r.consumption && *r.consumption > 0.0)
            ++n;
    return n;
}

/// EC(year) = sum over records in scope of E * r * 44/12, accumulated in key order.
inline EmissionSeries compute_emissions(const EnergyPanel& panel, const EmissionFactorTable& factors,
                                        const Scope& scope = {}) {
    if (panel.has_gaps())
        throw InputError("energy panel has missing values; apply a missing-value policy first");
    std::map<int, double> totals;
    for (const auto& r : panel.records()) {
        if (!scope.includes(r.key)) continue;
        if (!factors.has(r.key.energy))
            throw InputError("missing emission factor for energy '" +
                             std::string(to_string(r.key.energy)) + "'");
        totals[r.key.year] += *r.consumption * effective_factor(factors, r.key);
    }
    if (totals.empty())
        throw InputError("no energy records in scope" +
                         (scope.province.empty() ? std::string() : " for " + scope.province));
    EmissionSeries out;
    out.province = scope.province.empty() ? "ALL" : scope.province;
    out.sector = scope.sector_label();
    for (const auto& [year, v] : totals) out.points.push_back({year, v});
    if (auto n = excluded_record_count(panel, scope); n > 0)
        out.warnings.push_back(std::to_string(n) +
                               " residential power/heat records given zero emission factor");
    return out;
}

inline EmissionSeries aggregate_national(const std::vector<EmissionSeries>& parts) {
    if (parts.empty()) throw InputError("nothing to aggregate");
    EmissionSeries out;
    out.sector = parts.front().sector;
    out.points = parts.front().points;
    const auto years = parts.front().years();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].years() != years)
            throw InputError("year ranges differ between '" + parts.front().province + "' and '" +
                             parts[i].province + "'");
        if (parts[i].sector != out.sector) out.sector = "ALL";
        for (std::size_t t = 0; t < years.size(); ++t)
            out.points[t].emissions += parts[i].points[t].emissions;
    }
    for (const auto& p : parts)
        for (const auto& w : p.warnings) out.warnings.push_back(p.province + ": " + w);
    return out;
}

inline std::vector<EmissionSeries> emissions_by_province(const EnergyPanel& panel,
                                                         const EmissionFactorTable& factors,
                                                         const std::vector<Sector>& sectors = {}) {
    std::vector<EmissionSeries> out;
    for (const auto& p : panel.provinces()) out.push_back(compute_emissions(panel, factors, {p, sectors}));
    return out;
}

inline Table to_table(const EmissionSeries& s) {
    Table t;
    t.columns = {"province", "sector", "year", "emissions"};
    for (const auto& pt : s.points)
        t.rows.push_back({s.province, s.sector, std::int64_t{pt.year}, pt.emissions});
    return t;
}

// ---------------------------------------------------------------------------
// Identity factors: C = sum_ij s_ij f_ij e_i n_i r p
// ---------------------------------------------------------------------------

struct FactorCell {
    Sector sector = Sector::primary;
    Energy energy = Energy::coal;
    double share = 0.0;          // s_ij
    double coefficient = 0.0;    // f_ij
    double intensity = 0.0;      // e_i
    double gdp_share = 0.0;      // n_i
    double gdp_per_capita = 0.0; // r
    double population = 0.0;     // p

    double emissions() const {
        return share * coefficient * intensity * gdp_share * gdp_per_capita * population;
    }
};

struct YearFactors {
    std::string province;
    int year = 0;
    std::vector<FactorCell> cells;  // ordered by (sector, energy)

    double emissions() const {
        double c = 0.0;
        for (const auto& cell : cells) c += cell.emissions();
        return c;
    }
};

using IdentityFactors = std::vector<YearFactors>;

/// Factors for the three production sectors. Residential use has no GDP
/// counterpart and stays outside the identity. A sector with zero energy
/// gets uniform shares so that only its intensity is zero.
inline IdentityFactors derive_identity_factors(const EnergyPanel& panel, const EconomicPanel& econ,
                                               const EmissionFactorTable& factors) {
    if (panel.has_gaps())
        throw InputError("energy panel has missing values; apply a missing-value policy first");
    // (province, year) -> sector -> energy -> consumption
    std::map<std::pair<std::string, int>, std::map<Sector, std::map<Energy, double>>> grouped;
    for (const auto& r : panel.records())
        if (r.key.sector != Sector::residential)
            grouped[{r.key.province, r.key.year}][r.key.sector][r.key.energy] = *r.consumption;

    IdentityFactors out;
    for (const auto& [key, sectors] : grouped) {
        const auto& [province, year] = key;
        const auto& rec = econ.at(province, year);
        const double g = rec.gdp_total();
        const double pop = rec.population;
        YearFactors yf{province, year, {}};
        for (const auto& [sector, energies] : sectors) {
            double total = 0.0;
            for (const auto& [e, v] : energies) total += v;
            const double gi = rec.gdp_of(sector);
            for (const auto& [e, v] : energies) {
                FactorCell c;
                c.sector = sector;
                c.energy = e;
                c.share = total > 0.0 ? v / total : 1.0 / double(energies.size());
                if (!factors.has(e))
                    throw InputError("missing emission factor for energy '" +
                                     std::string(to_string(e)) + "'");
                c.coefficient = effective_factor(factors, {province, year, sector, e});
                c.intensity = total / gi;
                c.gdp_share = gi / g;
                c.gdp_per_capita = g / pop;
                c.population = pop;
                yf.cells.push_back(c);
            }
        }
        out.push_back(std::move(yf));
    }
    return out;
}

/// Factors of a single province, or of "ALL" for the national aggregate.
inline std::vector<YearFactors> factors_for(const IdentityFactors& f, const std::string& province) {
    std::vector<YearFactors> out;
    for (const auto& y : f)
        if (y.province == province) out.push_back(y);
    if (out.empty()) throw InputError("no identity factors for province '" + province + "'");
    return out;
}

/// Sums consumption over provinces into a single "ALL" pseudo-province.
inline EnergyPanel national_energy_panel(const EnergyPanel& panel) {
    if (panel.has_gaps())
        throw InputError("energy panel has missing values; apply a missing-value policy first");
    std::map<std::tuple<int, Sector, Energy>, double> sums;
    for (const auto& r : panel.records())
        sums[{r.key.year, r.key.sector, r.key.energy}] += *r.consumption;
    std::vector<EnergyRecord> records;
    for (const auto& [k, v] : sums)
        records.push_back({{"ALL", std::get<0>(k), std::get<1>(k), std::get<2>(k)}, v, 0});
    return EnergyPanel(std::move(records));
}

inline EconomicPanel national_economic_panel(const EconomicPanel& econ) {
    std::map<int, EconomicRecord> sums;
    for (const auto& r : econ.records()) {
        auto& s = sums[r.year];
        s.province = "ALL";
        s.year = r.year;
        for (std::size_t i = 0; i < 3; ++i) s.gdp[i] += r.gdp[i];
        s.population += r.population;
    }
    std::vector<EconomicRecord> records;
    for (auto& [y, r] : sums) records.push_back(r);
    return EconomicPanel(std::move(records));
}

}  // namespace emitcast
