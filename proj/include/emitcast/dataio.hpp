#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "emitcast/error.hpp"

namespace emitcast {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Sector { primary, secondary, tertiary, residential };
enum class Energy { coal, petroleum, natural_gas, power, heat, other };

inline constexpr std::array<Sector, 4> kAllSectors{Sector::primary, Sector::secondary,
                                                   Sector::tertiary, Sector::residential};
/// The three productive sectors that carry GDP.
inline constexpr std::array<Sector, 3> kIndustries{Sector::primary, Sector::secondary,
                                                   Sector::tertiary};
inline constexpr std::array<Energy, 6> kAllEnergies{Energy::coal,  Energy::petroleum,
                                                    Energy::natural_gas, Energy::power,
                                                    Energy::heat,  Energy::other};

inline std::string_view to_string(Sector s) {
    switch (s) {
        case Sector::primary: return "primary";
        case Sector::secondary: return "secondary";
        case Sector::tertiary: return "tertiary";
        case Sector::residential: return "residential";
    }
    return "?";
}

inline std::string_view to_string(Energy e) {
    switch (e) {
        case Energy::coal: return "coal";
        case Energy::petroleum: return "petroleum";
        case Energy::natural_gas: return "natural_gas";
        case Energy::power: return "power";
        case Energy::heat: return "heat";
        case Energy::other: return "other";
    }
    return "?";
}

inline std::optional<Sector> parse_sector(std::string_view text) {
    for (Sector s : kAllSectors)
        if (to_string(s) == text) return s;
    return std::nullopt;
}

inline std::optional<Energy> parse_energy(std::string_view text) {
    for (Energy e : kAllEnergies)
        if (to_string(e) == text) return e;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Minimal CSV reading
// ---------------------------------------------------------------------------

struct CsvRow {
    std::size_t line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

struct CsvDocument {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::optional<double> parse_double(const std::string& text) {
    if (text.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(const std::string& text) {
    if (text.empty()) return std::nullopt;
    char* end = nullptr;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size()) return std::nullopt;
    return v;
}

inline std::string where(const CsvDocument& doc, const CsvRow& row, std::string_view column) {
    std::ostringstream os;
    os << doc.source << ": row " << row.line << ", column '" << column << "'";
    return os.str();
}

}  // namespace detail

/// Parses CSV text. Blank lines and lines starting with '#' (provenance headers)
/// are skipped; the first remaining line is the header.
inline CsvDocument parse_csv(std::istream& in, std::string source) {
    CsvDocument doc;
    doc.source = std::move(source);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = detail::split_csv_line(line);
        if (!have_header) {
            doc.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != doc.header.size()) {
            std::ostringstream os;
            os << doc.source << ": row " << lineno << " has " << fields.size()
               << " fields, expected " << doc.header.size();
            throw InputError(os.str());
        }
        doc.rows.push_back({lineno, std::move(fields)});
    }
    if (!have_header) throw InputError(doc.source + ": empty file, no header");
    return doc;
}

inline CsvDocument read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_csv(in, path.string());
}

inline void require_header(const CsvDocument& doc, const std::vector<std::string>& expected) {
    if (doc.header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        std::string got;
        for (const auto& h : doc.header) got += (got.empty() ? "" : ",") + h;
        throw InputError(doc.source + ": header mismatch, expected '" + want + "' but found '" +
                         got + "'");
    }
}

// ---------------------------------------------------------------------------
// Energy panel
// ---------------------------------------------------------------------------

struct EnergyKey {
    std::string province;
    int year = 0;
    Sector sector = Sector::primary;
    Energy energy = Energy::coal;

    auto tie() const { return std::tie(province, year, sector, energy); }
    friend bool operator<(const EnergyKey& a, const EnergyKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const EnergyKey& a, const EnergyKey& b) { return a.tie() == b.tie(); }
};

struct EnergyRecord {
    EnergyKey key;
    /// Empty marks a gap in the source data.
    std::optional<double> consumption;
    std::size_t source_line = 0;

    friend bool operator==(const EnergyRecord& a, const EnergyRecord& b) {
        return a.key == b.key && a.consumption == b.consumption;
    }
};

/// Province x year x sector x energy consumption records, kept sorted by key
/// (province, year, sector, energy) in enum order.
class EnergyPanel {
public:
    EnergyPanel() = default;

    explicit EnergyPanel(std::vector<EnergyRecord> records) : records_(std::move(records)) {
        std::stable_sort(records_.begin(), records_.end(),
                         [](const EnergyRecord& a, const EnergyRecord& b) { return a.key < b.key; });
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (r.consumption && (*r.consumption < 0.0 || !std::isfinite(*r.consumption))) {
                std::ostringstream os;
                os << "negative or non-finite consumption at row " << r.source_line << " ("
                   << describe(r.key) << ")";
                throw InputError(os.str());
            }
            if (i > 0 && records_[i - 1].key == r.key) {
                std::ostringstream os;
                os << "duplicate key (" << describe(r.key) << ") at rows "
                   << records_[i - 1].source_line << " and " << r.source_line;
                throw InputError(os.str());
            }
        }
        for (const auto& p : provinces()) {
            auto ys = years(p);
            if (ys.back() - ys.front() + 1 != static_cast<int>(ys.size()))
                throw InputError("years for province '" + p + "' are not contiguous");
        }
    }

    const std::vector<EnergyRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    std::vector<std::string> provinces() const {
        std::vector<std::string> out;
        for (const auto& r : records_)
            if (out.empty() || out.back() != r.key.province) out.push_back(r.key.province);
        return out;
    }

    std::vector<int> years(const std::string& province) const {
        std::set<int> ys;
        for (const auto& r : records_)
            if (r.key.province == province) ys.insert(r.key.year);
        return {ys.begin(), ys.end()};
    }

    std::vector<int> all_years() const {
        std::set<int> ys;
        for (const auto& r : records_) ys.insert(r.key.year);
        return {ys.begin(), ys.end()};
    }

    std::vector<EnergyKey> gaps() const {
        std::vector<EnergyKey> out;
        for (const auto& r : records_)
            if (!r.consumption) out.push_back(r.key);
        return out;
    }

    bool has_gaps() const {
        return std::any_of(records_.begin(), records_.end(),
                           [](const EnergyRecord& r) { return !r.consumption; });
    }

    friend bool operator==(const EnergyPanel& a, const EnergyPanel& b) {
        return a.records_ == b.records_;
    }

    static std::string describe(const EnergyKey& k) {
        std::ostringstream os;
        os << k.province << ", " << k.year << ", " << to_string(k.sector) << ", "
           << to_string(k.energy);
        return os.str();
    }

private:
    std::vector<EnergyRecord> records_;
};

inline const std::vector<std::string>& energy_panel_header() {
    static const std::vector<std::string> h{"province", "year", "sector", "energy", "consumption"};
    return h;
}

inline EnergyPanel parse_energy_panel(const CsvDocument& doc) {
    require_header(doc, energy_panel_header());
    std::vector<EnergyRecord> records;
    records.reserve(doc.rows.size());
    for (const auto& row : doc.rows) {
        const auto& f = row.fields;
        EnergyRecord rec;
        rec.source_line = row.line;
        rec.key.province = f[0];
        if (rec.key.province.empty())
            throw InputError(detail::where(doc, row, "province") + ": empty province");
        auto year = detail::parse_int(f[1]);
        if (!year) throw InputError(detail::where(doc, row, "year") + ": not an integer");
        rec.key.year = static_cast<int>(*year);
        auto sector = parse_sector(f[2]);
        if (!sector)
            throw InputError(detail::where(doc, row, "sector") + ": unknown sector '" + f[2] + "'");
        rec.key.sector = *sector;
        auto energy = parse_energy(f[3]);
        if (!energy)
            throw InputError(detail::where(doc, row, "energy") + ": unknown energy '" + f[3] + "'");
        rec.key.energy = *energy;
        if (!f[4].empty()) {
            auto v = detail::parse_double(f[4]);
            if (!v) throw InputError(detail::where(doc, row, "consumption") + ": not a number");
            if (*v < 0.0)
                throw InputError(detail::where(doc, row, "consumption") +
                                 ": negative consumption");
            rec.consumption = *v;
        }
        records.push_back(std::move(rec));
    }
    return EnergyPanel(std::move(records));
}

inline EnergyPanel load_energy_panel(const std::filesystem::path& path) {
    return parse_energy_panel(read_csv(path));
}

enum class MissingPolicy { fail, linear, zero };

inline std::optional<MissingPolicy> parse_missing_policy(std::string_view s) {
    if (s == "fail") return MissingPolicy::fail;
    if (s == "linear") return MissingPolicy::linear;
    if (s == "zero") return MissingPolicy::zero;
    return std::nullopt;
}

inline std::string_view to_string(MissingPolicy p) {
    switch (p) {
        case MissingPolicy::fail: return "fail";
        case MissingPolicy::linear: return "linear";
        case MissingPolicy::zero: return "zero";
    }
    return "?";
}

/// Fills gaps within each (province, sector, energy) series along years.
/// `linear` interpolates interior gaps and holds boundary gaps at the nearest
/// observed value.
inline EnergyPanel interpolate_missing(const EnergyPanel& panel, MissingPolicy policy) {
    if (!panel.has_gaps()) return panel;
    if (policy == MissingPolicy::fail) {
        std::string msg = "panel has missing consumption values:";
        for (const auto& k : panel.gaps()) msg += " [" + EnergyPanel::describe(k) + "]";
        throw InputError(msg);
    }
    std::vector<EnergyRecord> out = panel.records();
    if (policy == MissingPolicy::zero) {
        for (auto& r : out)
            if (!r.consumption) r.consumption = 0.0;
        return EnergyPanel(std::move(out));
    }
    // Group indices by series; records are sorted by (province, year, ...) so
    // each group comes out in increasing year order.
    std::map<std::tuple<std::string, Sector, Energy>, std::vector<std::size_t>> series;
    for (std::size_t i = 0; i < out.size(); ++i)
        series[{out[i].key.province, out[i].key.sector, out[i].key.energy}].push_back(i);
    for (auto& [key, idx] : series) {
        std::vector<std::size_t> known;
        for (auto i : idx)
            if (out[i].consumption) known.push_back(i);
        if (known.empty())
            throw InputError("cannot interpolate series with no observed values (" +
                             std::get<0>(key) + ", " + std::string(to_string(std::get<1>(key))) +
                             ", " + std::string(to_string(std::get<2>(key))) + ")");
        for (auto i : idx) {
            if (out[i].consumption) continue;
            int y = out[i].key.year;
            const EnergyRecord* lo = nullptr;
            const EnergyRecord* hi = nullptr;
            for (auto k : known) {
                if (out[k].key.year < y) lo = &out[k];
                if (out[k].key.year > y && !hi) hi = &out[k];
            }
            double v;
            if (lo && hi) {
                double t = double(y - lo->key.year) / double(hi->key.year - lo->key.year);
                v = *lo->consumption + t * (*hi->consumption - *lo->consumption);
            } else {
                v = lo ? *lo->consumption : *hi->consumption;
            }
            out[i].consumption = v;
        }
    }
    return EnergyPanel(std::move(out));
}

// ---------------------------------------------------------------------------
// Economic panel
// ---------------------------------------------------------------------------

struct EconomicRecord {
    std::string province;
    int year = 0;
    std::array<double, 3> gdp{};  // primary, secondary, tertiary
    double population = 0.0;

    double gdp_total() const { return gdp[0] + gdp[1] + gdp[2]; }
    double gdp_of(Sector s) const {
        if (s == Sector::residential) throw InputError("residential sector has no GDP");
        return gdp[static_cast<std::size_t>(s)];
    }
};

class EconomicPanel {
public:
    EconomicPanel() = default;

    explicit EconomicPanel(std::vector<EconomicRecord> records) {
        for (auto& r : records) {
            for (double g : r.gdp)
                if (!(g > 0.0) || !std::isfinite(g))
                    throw InputError("non-positive GDP component for " + r.province + " " +
                                     std::to_string(r.year));
            if (!(r.population > 0.0) || !std::isfinite(r.population))
                throw InputError("non-positive population for " + r.province + " " +
                                 std::to_string(r.year));
            auto key = std::make_pair(r.province, r.year);
            if (index_.count(key))
                throw InputError("duplicate economic record for " + r.province + " " +
                                 std::to_string(r.year));
            index_[key] = 0;
            records_.push_back(std::move(r));
        }
        std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
            return std::tie(a.province, a.year) < std::tie(b.province, b.year);
        });
        for (std::size_t i = 0; i < records_.size(); ++i)
            index_[{records_[i].province, records_[i].year}] = i;
    }

    const std::vector<EconomicRecord>& records() const noexcept { return records_; }

    const EconomicRecord& at(const std::string& province, int year) const {
        auto it = index_.find({province, year});
        if (it == index_.end())
            throw InputError("no economic record for " + province + " " + std::to_string(year));
        return records_[it->second];
    }

    bool contains(const std::string& province, int year) const {
        return index_.count({province, year}) > 0;
    }

    std::vector<std::string> provinces() const {
        std::vector<std::string> out;
        for (const auto& r : records_)
            if (out.empty() || out.back() != r.province) out.push_back(r.province);
        return out;
    }

private:
    std::vector<EconomicRecord> records_;
    std::map<std::pair<std::string, int>, std::size_t> index_;
};

inline EconomicPanel parse_economic_panel(const CsvDocument& doc) {
    require_header(doc, {"province", "year", "gdp_primary", "gdp_secondary", "gdp_tertiary",
                         "population"});
    std::vector<EconomicRecord> records;
    static const char* names[] = {"province", "year", "gdp_primary", "gdp_secondary",
                                  "gdp_tertiary", "population"};
    for (const auto& row : doc.rows) {
        EconomicRecord r;
        r.province = row.fields[0];
        auto year = detail::parse_int(row.fields[1]);
        if (!year) throw InputError(detail::where(doc, row, "year") + ": not an integer");
        r.year = static_cast<int>(*year);
        std::array<double, 4> v{};
        for (std::size_t c = 0; c < 4; ++c) {
            auto d = detail::parse_double(row.fields[c + 2]);
            if (!d) throw InputError(detail::where(doc, row, names[c + 2]) + ": not a number");
            if (!(*d > 0.0))
                throw InputError(detail::where(doc, row, names[c + 2]) + ": must be positive");
            v[c] = *d;
        }
        r.gdp = {v[0], v[1], v[2]};
        r.population = v[3];
        records.push_back(std::move(r));
    }
    return EconomicPanel(std::move(records));
}

inline EconomicPanel load_economic_panel(const std::filesystem::path& path) {
    return parse_economic_panel(read_csv(path));
}

// ---------------------------------------------------------------------------
// Emission factors
// ---------------------------------------------------------------------------

/// Per-energy carbon coefficients r_j (tC per unit standard coal). Either one
/// time-invariant value per energy, or a yearly history; years past the
/// history use the mean of the ten most recent observed years.
class EmissionFactorTable {
public:
    static constexpr double kCarbonToCo2 = 44.0 / 12.0;
    static constexpr std::size_t kProjectionWindow = 10;

    void set(Energy e, double factor) {
        check(e, factor);
        auto& slot = table_[index(e)];
        if (slot.constant || !slot.yearly.empty())
            throw InputError("duplicate emission factor for " + std::string(to_string(e)));
        slot.constant = factor;
    }

    void set(Energy e, int year, double factor) {
        check(e, factor);
        auto& slot = table_[index(e)];
        if (slot.constant || slot.yearly.count(year))
            throw InputError("duplicate emission factor for " + std::string(to_string(e)) +
                             " in " + std::to_string(year));
        slot.yearly[year] = factor;
        slot.projected = std::nullopt;
    }

    bool has(Energy e) const {
        const auto& slot = table_[index(e)];
        return slot.constant.has_value() || !slot.yearly.empty();
    }

    double factor(Energy e, int year) const {
        const auto& slot = table_[index(e)];
        if (slot.constant) return *slot.constant;
        if (slot.yearly.empty())
            throw InputError("missing emission factor for energy '" + std::string(to_string(e)) +
                             "'");
        if (auto it = slot.yearly.find(year); it != slot.yearly.end()) return it->second;
        if (year > slot.yearly.rbegin()->first) return projected(slot);
        throw InputError("no emission factor for '" + std::string(to_string(e)) + "' in " +
                         std::to_string(year));
    }

    /// True when every present energy carries a single, year-independent factor.
    bool time_invariant() const {
        for (const auto& slot : table_)
            if (!slot.yearly.empty()) return false;
        return true;
    }

private:
    struct Slot {
        std::optional<double> constant;
        std::map<int, double> yearly;
        mutable std::optional<double> projected;
    };

    static std::size_t index(Energy e) { return static_cast<std::size_t>(e); }

    static void check(Energy e, double factor) {
        if (!(factor >= 0.0) || !std::isfinite(factor))
            throw InputError("emission factor for " + std::string(to_string(e)) +
                             " must be finite and non-negative");
    }

    static double projected(const Slot& slot) {
        if (!slot.projected) {
            double sum = 0.0;
            std::size_t n = 0;
            for (auto it = slot.yearly.rbegin(); it != slot.yearly.rend() && n < kProjectionWindow;
                 ++it, ++n)
                sum += it->second;
            slot.projected = sum / double(n);
        }
        return *slot.projected;
    }

    std::array<Slot, 6> table_{};
};

inline EmissionFactorTable parse_factor_table(const CsvDocument& doc) {
    EmissionFactorTable t;
    const bool yearly = doc.header == std::vector<std::string>{"energy", "year", "factor"};
    if (!yearly) require_header(doc, {"energy", "factor"});
    for (const auto& row : doc.rows) {
        auto e = parse_energy(row.fields[0]);
        if (!e)
            throw InputError(detail::where(doc, row, "energy") + ": unknown energy '" +
                             row.fields[0] + "'");
        auto v = detail::parse_double(row.fields.back());
        if (!v) throw InputError(detail::where(doc, row, "factor") + ": not a number");
        if (yearly) {
            auto y = detail::parse_int(row.fields[1]);
            if (!y) throw InputError(detail::where(doc, row, "year") + ": not an integer");
            t.set(*e, static_cast<int>(*y), *v);
        } else {
            t.set(*e, *v);
        }
    }
    return t;
}

inline EmissionFactorTable load_factor_table(const std::filesystem::path& path) {
    return parse_factor_table(read_csv(path));
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct BpConfig {
    std::size_t input_width = 4;
    std::vector<std::size_t> hidden{1, 3};
    double learning_rate = 0.1;
    std::size_t max_epochs = 5000;
    double target_mse = 1e-6;
    bool scaled_bias_update = false;
};

struct RunConfig {
    double train_fraction = 0.70;
    int forecast_end_year = 2035;
    double gdp_growth = 0.04;
    int gdp_growth_from_year = 2024;
    int arima_max_p = 3;
    int arima_max_d = 2;
    int arima_max_q = 3;
    /// When no differencing order passes the ADF test, fall back to d = max_d
    /// instead of failing.
    bool arima_order_fallback = true;
    BpConfig bp;
    std::uint64_t seed = 2024;
    MissingPolicy missing_policy = MissingPolicy::fail;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw InputError("train_fraction must lie in (0, 1)");
        if (arima_max_p < 0 || arima_max_p > 3 || arima_max_q < 0 || arima_max_q > 3)
            throw InputError("arima_max_p and arima_max_q must lie in [0, 3]");
        if (arima_max_d < 0 || arima_max_d > 2) throw InputError("arima_max_d must lie in [0, 2]");
        if (bp.input_width == 0) throw InputError("bp_input_width must be >= 1");
        for (auto h : bp.hidden)
            if (h == 0) throw InputError("bp_hidden sizes must be >= 1");
        if (!(bp.learning_rate > 0.0)) throw InputError("bp_learning_rate must be positive");
        if (!std::isfinite(gdp_growth) || gdp_growth <= -1.0)
            throw InputError("gdp_growth must be a finite rate above -1");
    }

    void validate_horizon(int last_observed_year) const {
        if (forecast_end_year < last_observed_year)
            throw InputError("forecast_end_year precedes the last observed year");
    }
};

namespace detail {

inline std::string format_double_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Canonical `key=value` rendering, one key per line in fixed order. Used for
/// writing config files and hashing them into run manifests.
inline std::string config_text(const RunConfig& c) {
    std::ostringstream os;
    std::string hidden;
    for (auto h : c.bp.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
    os << "train_fraction=" << detail::format_double_exact(c.train_fraction) << '\n'
       << "forecast_end_year=" << c.forecast_end_year << '\n'
       << "gdp_growth=" << detail::format_double_exact(c.gdp_growth) << '\n'
       << "gdp_growth_from_year=" << c.gdp_growth_from_year << '\n'
       << "arima_max_p=" << c.arima_max_p << '\n'
       << "arima_max_d=" << c.arima_max_d << '\n'
       << "arima_max_q=" << c.arima_max_q << '\n'
       << "arima_order_fallback=" << (c.arima_order_fallback ? "true" : "false") << '\n'
       << "bp_input_width=" << c.bp.input_width << '\n'
       << "bp_hidden=" << hidden << '\n'
       << "bp_learning_rate=" << detail::format_double_exact(c.bp.learning_rate) << '\n'
       << "bp_max_epochs=" << c.bp.max_epochs << '\n'
       << "bp_target_mse=" << detail::format_double_exact(c.bp.target_mse) << '\n'
       << "bp_scaled_bias_update=" << (c.bp.scaled_bias_update ? "true" : "false") << '\n'
       << "seed=" << c.seed << '\n'
       << "missing_policy=" << to_string(c.missing_policy) << '\n';
    return os.str();
}

inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
    RunConfig c;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw InputError(source + ": line " + std::to_string(lineno) + ": " + msg);
    };
    auto as_double = [&](const std::string& v) {
        auto d = detail::parse_double(v);
        if (!d) fail("expected a number, got '" + v + "'");
        return *d;
    };
    auto as_int = [&](const std::string& v) {
        auto d = detail::parse_int(v);
        if (!d) fail("expected an integer, got '" + v + "'");
        return *d;
    };
    auto as_bool = [&](const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail("expected true/false, got '" + v + "'");
        return false;
    };
    auto as_size = [&](const std::string& v) {
        auto d = as_int(v);
        if (d < 0) fail("expected a non-negative integer, got '" + v + "'");
        return static_cast<std::size_t>(d);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        if (key == "train_fraction") c.train_fraction = as_double(val);
        else if (key == "forecast_end_year") c.forecast_end_year = static_cast<int>(as_int(val));
        else if (key == "gdp_growth") c.gdp_growth = as_double(val);
        else if (key == "gdp_growth_from_year") c.gdp_growth_from_year = static_cast<int>(as_int(val));
        else if (key == "arima_max_p") c.arima_max_p = static_cast<int>(as_int(val));
        else if (key == "arima_max_d") c.arima_max_d = static_cast<int>(as_int(val));
        else if (key == "arima_max_q") c.arima_max_q = static_cast<int>(as_int(val));
        else if (key == "arima_order_fallback") c.arima_order_fallback = as_bool(val);
        else if (key == "bp_input_width") c.bp.input_width = as_size(val);
        else if (key == "bp_hidden") {
            c.bp.hidden.clear();
            for (const auto& part : detail::split_csv_line(val)) c.bp.hidden.push_back(as_size(part));
        }
        else if (key == "bp_learning_rate") c.bp.learning_rate = as_double(val);
        else if (key == "bp_max_epochs") c.bp.max_epochs = as_size(val);
        else if (key == "bp_target_mse") c.bp.target_mse = as_double(val);
        else if (key == "bp_scaled_bias_update") c.bp.scaled_bias_update = as_bool(val);
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(as_int(val));
        else if (key == "missing_policy") {
            auto p = parse_missing_policy(val);
            if (!p) fail("missing_policy must be fail, linear or zero");
            c.missing_policy = *p;
        }
        else fail("unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_config(in, path.string());
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    bool empty() const noexcept { return rows.empty(); }
};

enum class TableFormat { csv, json };

inline std::optional<TableFormat> parse_table_format(std::string_view s) {
    if (s == "csv") return TableFormat::csv;
    if (s == "json") return TableFormat::json;
    return std::nullopt;
}

inline std::string_view extension(TableFormat f) { return f == TableFormat::csv ? ".csv" : ".json"; }

/// Six significant digits; -0 prints as 0.
inline std::string format_number(double v) {
    if (v == 0.0) return "0";
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string render_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_number(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else {
                if (v.find_first_of(",\"\n") == std::string::npos) return v;
                std::string q = "\"";
                for (char ch : v) {
                    if (ch == '"') q += '"';
                    q += ch;
                }
                return q + "\"";
            }
        },
        c);
}

inline std::string render_table(const Table& table, TableFormat format) {
    if (table.empty()) throw InputError("refusing to export an empty table");
    for (const auto& row : table.rows)
        if (row.size() != table.columns.size())
            throw InvariantError("table row width does not match its header");
    if (format == TableFormat::csv) {
        std::string out;
        for (std::size_t i = 0; i < table.columns.size(); ++i)
            out += (i ? "," : "") + table.columns[i];
        out += '\n';
        for (const auto& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + render_cell(row[i]);
            out += '\n';
        }
        return out;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto& name = table.columns[i];
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        if (std::isfinite(v)) obj[name] = std::strtod(format_number(v).c_str(), nullptr);
                        else obj[name] = nullptr;
                    } else {
                        obj[name] = v;
                    }
                },
                row[i]);
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

/// Writes `content` via a sibling temporary file and rename, so readers never
/// observe a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for " + path.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

inline void export_table(const Table& table, const std::filesystem::path& path, TableFormat format) {
    write_file_atomic(path, render_table(table, format));
}

inline Table to_table(const EnergyPanel& panel) {
    Table t{energy_panel_header(), {}};
    for (const auto& r : panel.records()) {
        Cell consumption = r.consumption ? Cell{*r.consumption} : Cell{std::string{}};
        t.rows.push_back({r.key.province, std::int64_t{r.key.year},
                          std::string(to_string(r.key.sector)),
                          std::string(to_string(r.key.energy)), consumption});
    }
    return t;
}

}  // namespace emitcast
