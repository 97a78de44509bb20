#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "emitcast/accounting.hpp"
#include "emitcast/analysis.hpp"
#include "emitcast/dataio.hpp"
#include "emitcast/error.hpp"
#include "emitcast/hybrid.hpp"
#include "emitcast/lmdi.hpp"
#include "emitcast/rng.hpp"

namespace emitcast {

namespace fs = std::filesystem;

/// Runs fn(0..n-1) on up to `workers` threads. Results come back in index
/// order; the lowest-index failure is rethrown after all work stops.
template <class F>
auto parallel_map(std::size_t n, std::size_t workers, F fn) {
    using R = decltype(fn(std::size_t{}));
    std::vector<std::optional<R>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// File-name form of a series name: lower case, '/' and spaces become '_'.
inline std::string slug(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (c == '/' || c == ' ') out += '_';
        else out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

struct CommonOptions {
    std::optional<fs::path> config;
    fs::path data_dir = "data/sample";
    std::optional<fs::path> fixtures_dir;
    fs::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    TableFormat format = TableFormat::csv;
    std::size_t workers = 1;
};

struct Inputs {
    RunConfig config;
    std::string config_hash;
    EnergyPanel energy;
    EconomicPanel econ;
    EmissionFactorTable factors;
    fs::path fixtures_dir;
    /// Content hashes of every input and fixture file read, by file name.
    std::map<std::string, std::string> file_versions;

    std::string use_fixture(const std::string& name) {
        const fs::path p = fixtures_dir / name;
        file_versions[name] = hex64(fnv1a(read_text(p)));
        return p.string();
    }
};

inline Inputs load_inputs(const CommonOptions& opt) {
    Inputs in;
    fs::path config_path = opt.config ? *opt.config : opt.data_dir / "config.txt";
    if (opt.config || fs::exists(config_path)) in.config = load_config(config_path);
    if (opt.seed) in.config.seed = *opt.seed;
    in.config_hash = hex64(fnv1a(config_text(in.config)));
    in.fixtures_dir = opt.fixtures_dir ? *opt.fixtures_dir : opt.data_dir.parent_path() / "fixtures";

    auto track = [&](const fs::path& p) {
        in.file_versions[p.filename().string()] = hex64(fnv1a(read_text(p)));
        return p;
    };
    in.energy = interpolate_missing(load_energy_panel(track(opt.data_dir / "energy_panel.csv")),
                                    in.config.missing_policy);
    in.econ = load_economic_panel(track(opt.data_dir / "economic_panel.csv"));
    in.factors = load_factor_table(track(opt.data_dir / "factors.csv"));
    return in;
}

/// Collects outputs in a sibling staging directory and swaps it into place
/// only on commit, so failed runs leave nothing behind.
class OutputStage {
public:
    explicit OutputStage(fs::path out) : final_(std::move(out)) {
        staging_ = final_;
        staging_ += ".staging";
        std::error_code ec;
        fs::remove_all(staging_, ec);
        fs::create_directories(staging_, ec);
        if (ec) throw IoError("cannot create " + staging_.string() + ": " + ec.message());
    }
    OutputStage(const OutputStage&) = delete;
    OutputStage& operator=(const OutputStage&) = delete;

    ~OutputStage() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    void write(const fs::path& rel, const std::string& content) {
        const fs::path p = staging_ / rel;
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
        write_file_atomic(p, content);
    }

    void table(const fs::path& rel_stem, const Table& t, TableFormat format) {
        fs::path rel = rel_stem;
        rel += extension(format);
        write(rel, render_table(t, format));
    }

    void commit() {
        std::error_code ec;
        fs::remove_all(final_, ec);
        if (ec) throw IoError("cannot replace " + final_.string() + ": " + ec.message());
        fs::rename(staging_, final_, ec);
        if (ec) throw IoError("cannot move outputs into " + final_.string() + ": " + ec.message());
        committed_ = true;
    }

private:
    fs::path final_;
    fs::path staging_;
    bool committed_ = false;
};

inline nlohmann::ordered_json manifest_header(const Inputs& in, std::string_view command) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_hash"] = in.config_hash;
    j["seed"] = in.config.seed;
    nlohmann::ordered_json versions = nlohmann::ordered_json::object();
    for (const auto& [k, v] : in.file_versions) versions[k] = v;
    j["fixture_versions"] = versions;
    return j;
}

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

struct AccountResult {
    std::vector<EmissionSeries> provinces;
    std::vector<EmissionSeries> sectors;
    EmissionSeries national;
};

inline AccountResult account(const Inputs& in) {
    AccountResult r;
    r.provinces = emissions_by_province(in.energy, in.factors);
    for (Sector s : kAllSectors) r.sectors.push_back(compute_emissions(in.energy, in.factors, {"", {s}}));
    r.national = aggregate_national(r.provinces);
    r.national.warnings.clear();
    if (auto n = excluded_record_count(in.energy); n > 0)
        r.national.warnings.push_back(std::to_string(n) +
                                      " residential power/heat records given zero emission factor");
    return r;
}

inline void write_account(OutputStage& out, const AccountResult& r, TableFormat f) {
    for (const auto& s : r.provinces) out.table("emissions/province_" + slug(s.province), to_table(s), f);
    for (const auto& s : r.sectors) out.table("emissions/sector_" + slug(s.sector), to_table(s), f);
    out.table("emissions/national", to_table(r.national), f);
}

// ---------------------------------------------------------------------------
// Forecasting
// ---------------------------------------------------------------------------

struct NamedSeries {
    std::string name;
    TimeSeries series;
};

struct NamedForecast {
    std::string name;
    HybridForecaster forecaster;
};

inline std::vector<NamedForecast> build_forecasts(const std::vector<NamedSeries>& series,
                                                  const RunConfig& cfg, std::size_t workers) {
    return parallel_map(series.size(), workers, [&](std::size_t i) {
        const auto& s = series[i];
        try {
            return NamedForecast{s.name, HybridForecaster::build(
                                             s.series, HybridConfig::from(cfg, substream_seed(cfg.seed, s.name)))};
        } catch (const Error& e) {
            detail::rethrow_in_stage("forecast " + s.name, e);
        }
    });
}

inline std::vector<NamedSeries> emission_series(const AccountResult& acc) {
    std::vector<NamedSeries> out{{"national", acc.national.series()}};
    for (const auto& s : acc.sectors) out.push_back({"sector/" + s.sector, s.series()});
    for (const auto& s : acc.provinces) out.push_back({"province/" + s.province, s.series()});
    return out;
}

// ---------------------------------------------------------------------------
// National driver projections for the decomposition
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell_name(const FactorCell& c) {
    return std::string(to_string(c.sector)) + "_" + std::string(to_string(c.energy));
}

}  // namespace detail

/// Driver series of the identity, read off observed national factors.
inline std::vector<NamedSeries> driver_series(const std::vector<YearFactors>& observed) {
    std::map<std::string, std::vector<double>> v;
    std::vector<std::string> order;
    for (const auto& y : observed) {
        std::map<std::string, double> row;
        auto put = [&](const std::string& name, double x) {
            if (row.emplace(name, x).second && y.year == observed.front().year) order.push_back(name);
        };
        put("driver/population", y.cells.front().population);
        put("driver/gdp", y.cells.front().gdp_per_capita * y.cells.front().population);
        for (const auto& c : y.cells) {
            put("driver/intensity_" + std::string(to_string(c.sector)), c.intensity);
            put("driver/gdp_share_" + std::string(to_string(c.sector)), c.gdp_share);
            put("driver/share_" + detail::cell_name(c), c.share);
        }
        if (row.size() != order.size())
            throw InputError("identity cells change between years; cannot build driver series");
        for (const auto& [name, x] : row) v[name].push_back(x);
    }
    std::vector<NamedSeries> out;
    for (const auto& name : order) out.push_back({name, TimeSeries(observed.front().year, v[name])});
    return out;
}

/// Future identity factors assembled from driver forecasts. Shares are
/// clamped at zero and renormalised; GDP follows its forecast up to
/// `gdp_growth_from_year` and grows at the configured rate afterwards.
inline std::vector<YearFactors> project_factors(const std::vector<YearFactors>& observed,
                                                const std::vector<NamedForecast>& drivers,
                                                const RunConfig& cfg) {
    const int last = observed.back().year;
    const int end = cfg.forecast_end_year;
    if (end <= last) return {};
    std::map<std::string, TimeSeries> fc;
    for (const auto& d : drivers) fc[d.name] = d.forecaster.forecast_to(end);
    auto value = [&](const std::string& name, int year) {
        auto it = fc.find(name);
        if (it == fc.end()) throw InvariantError("missing driver forecast " + name);
        return it->second.at_year(year);
    };
    std::vector<YearFactors> out;
    const auto& tmpl = observed.back();
    double gdp = tmpl.cells.front().gdp_per_capita * tmpl.cells.front().population;
    for (int year = last + 1; year <= end; ++year) {
        gdp = year >= cfg.gdp_growth_from_year ? gdp * (1.0 + cfg.gdp_growth) : value("driver/gdp", year);
        const double pop = value("driver/population", year);
        if (!(pop > 0.0) || !(gdp > 0.0))
            throw NumericalError("projected population or GDP is not positive in " + std::to_string(year));
        YearFactors yf{tmpl.province, year, tmpl.cells};
        std::map<Sector, double> share_sum, gdp_share;
        double gdp_share_sum = 0.0;
        for (Sector s : kIndustries) {
            const auto name = "driver/gdp_share_" + std::string(to_string(s));
            if (!fc.count(name)) continue;
            gdp_share[s] = std::max(0.0, value(name, year));
            gdp_share_sum += gdp_share[s];
        }
        if (!(gdp_share_sum > 0.0))
            throw NumericalError("projected GDP shares vanish in " + std::to_string(year));
        for (auto& c : yf.cells) {
            c.share = std::max(0.0, value("driver/share_" + detail::cell_name(c), year));
            share_sum[c.sector] += c.share;
        }
        std::map<Sector, std::size_t> cells_in;
        for (const auto& c : yf.cells) ++cells_in[c.sector];
        for (auto& c : yf.cells) {
            c.share = share_sum[c.sector] > 0.0 ? c.share / share_sum[c.sector]
                                                : 1.0 / double(cells_in[c.sector]);
            c.intensity = std::max(0.0, value("driver/intensity_" + std::string(to_string(c.sector)), year));
            c.gdp_share = gdp_share[c.sector] / gdp_share_sum;
            c.gdp_per_capita = gdp / pop;
            c.population = pop;
        }
        out.push_back(std::move(yf));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial and group analyses
// ---------------------------------------------------------------------------

/// Province emissions by year, observed first and then combined forecasts
/// (clamped at zero) where available.
inline std::map<int, std::map<std::string, double>> province_emission_map(
    const AccountResult& acc, const std::vector<NamedForecast>& forecasts, int end_year) {
    std::map<int, std::map<std::string, double>> m;
    for (const auto& s : acc.provinces)
        for (const auto& pt : s.points) m[pt.year][s.province] = pt.emissions;
    for (const auto& f : forecasts) {
        if (f.name.rfind("province/", 0) != 0) continue;
        const std::string province = f.name.substr(9);
        if (end_year <= f.forecaster.series().end_year()) continue;
        const auto ts = f.forecaster.forecast_to(end_year);
        for (std::size_t i = 0; i < ts.size(); ++i) m[ts.year(i)][province] = std::max(0.0, ts[i]);
    }
    return m;
}

inline std::vector<Observation> observations(const std::map<int, std::map<std::string, double>>& m) {
    std::vector<Observation> out;
    for (const auto& [year, by_p] : m)
        for (const auto& [p, v] : by_p) out.push_back({p, year, v});
    return out;
}

/// Emissions per unit of GDP for every observed province-year.
inline std::vector<Observation> intensity_observations(const AccountResult& acc, const EconomicPanel& econ) {
    std::vector<Observation> out;
    for (const auto& s : acc.provinces)
        for (const auto& pt : s.points)
            out.push_back({s.province, pt.year, pt.emissions / econ.at(s.province, pt.year).gdp_total()});
    return out;
}

struct GroupTestReport {
    GroupScheme scheme;
    std::string variable;
    std::vector<GroupSummary> groups;
    WelchResult result;
};

inline GroupTestReport run_group_test(Inputs& in, GroupScheme scheme, const std::vector<Observation>& obs,
                                      std::string variable, const std::optional<fs::path>& covariate) {
    GroupTestReport r{scheme, std::move(variable), {}, {}};
    switch (scheme) {
        case GroupScheme::digital_economy:
            r.groups = assign_groups(obs, load_grouping_table(in.use_fixture("groups_digital_economy.csv")));
            break;
        case GroupScheme::region_ecw:
            r.groups = assign_groups(obs, load_grouping_table(in.use_fixture("groups_region_ecw.csv")));
            break;
        case GroupScheme::industry_structure_ratio:
            r.groups = assign_groups_by_mean(obs, industry_structure_ratio(in.econ));
            break;
        case GroupScheme::new_productivity:
            if (!covariate) throw InputError("new_productivity grouping needs --covariate FILE");
            in.file_versions[covariate->filename().string()] = hex64(fnv1a(read_text(*covariate)));
            r.groups = assign_groups_by_mean(obs, load_covariate(*covariate));
            break;
    }
    r.result = welch_test(r.groups);
    return r;
}

inline std::string format_test_line(const std::string& label, const WelchResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s method=%s F=%.3f df1=%.0f df2=%.2f p=%.4f", label.c_str(),
                  std::string(to_string(r.method)).c_str(), r.f, r.df1, r.df2, r.p_value);
    return buf;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void write_manifest(OutputStage& out, const nlohmann::ordered_json& j) {
    out.write("manifest.json", j.dump(2) + "\n");
}

inline int cmd_account(const CommonOptions& opt, std::ostream& log) {
    Inputs in = load_inputs(opt);
    const auto acc = account(in);
    OutputStage out(opt.out_dir);
    write_account(out, acc, opt.format);
    auto m = manifest_header(in, "account");
    m["warnings"] = acc.national.warnings;
    write_manifest(out, m);
    out.commit();
    for (const auto& w : acc.national.warnings) log << "warning: " << w << '\n';
    log << "wrote " << acc.provinces.size() << " province, " << acc.sectors.size()
        << " sector and 1 national emission tables to " << opt.out_dir.string() << '\n';
    return 0;
}

inline std::vector<NamedSeries> select_series(const std::vector<NamedSeries>& all, const std::string& selection) {
    std::vector<NamedSeries> out;
    for (const auto& token : detail::split_csv_line(selection)) {
        const auto t = detail::trim(token);
        const auto before = out.size();
        for (const auto& s : all) {
            const bool match = t == "all" || s.name == t ||
                               (t == "sectors" && s.name.rfind("sector/", 0) == 0) ||
                               (t == "provinces" && s.name.rfind("province/", 0) == 0);
            if (match && std::none_of(out.begin(), out.end(), [&](const NamedSeries& o) { return o.name == s.name; }))
                out.push_back(s);
        }
        if (out.size() == before && t != "all") throw InputError("unknown series '" + t + "'");
    }
    return out;
}

inline int cmd_forecast(const CommonOptions& opt, std::optional<int> to_year, const std::string& series_spec,
                        std::ostream& log) {
    Inputs in = load_inputs(opt);
    const int end = to_year.value_or(in.config.forecast_end_year);
    const auto acc = account(in);
    const int last = acc.national.points.back().year;
    if (end <= last)
        throw InputError("nothing to forecast: --to-year " + std::to_string(end) +
                         " is not after the last observed year " + std::to_string(last));
    if (end - last > kMaxForecastHorizon)
        throw InputError("forecast horizon of " + std::to_string(end - last) + " years exceeds the " +
                         std::to_string(kMaxForecastHorizon) + "-year extrapolation limit");
    const auto chosen = select_series(emission_series(acc), series_spec);
    const auto fcs = build_forecasts(chosen, in.config, opt.workers);
    OutputStage out(opt.out_dir);
    auto m = manifest_header(in, "forecast");
    m["to_year"] = end;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& f : fcs) {
        out.table("forecast/" + slug(f.name), to_table(f.forecaster.rows(end)), opt.format);
        per[f.name] = manifest_entry(f.forecaster);
    }
    m["per_series"] = per;
    write_manifest(out, m);
    out.commit();
    for (const auto& f : fcs)
        log << f.name << ": ARIMA" << f.forecaster.model().order.str() << ", " << end << " = "
            << format_number(f.forecaster.forecast_to(end).values.back()) << '\n';
    return 0;
}

inline std::vector<YearFactors> observed_factors(const Inputs& in, const std::string& province) {
    if (province == "ALL")
        return factors_for(derive_identity_factors(national_energy_panel(in.energy),
                                                   national_economic_panel(in.econ), in.factors),
                           "ALL");
    return factors_for(derive_identity_factors(in.energy, in.econ, in.factors), province);
}

inline int cmd_verify_fixture(const fs::path& fixture, std::ostream& log) {
    const auto checks = verify_effect_fixture(load_effect_fixture(fixture));
    bool all_ok = true;
    for (const auto& c : checks) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %d effects_sum=%.2f gross=%.2f", c.ok ? "PASS" : "FAIL", c.year,
                      c.effects_sum, c.gross);
        log << buf << '\n';
        all_ok = all_ok && c.ok;
    }
    return all_ok ? 0 : 2;
}

inline int cmd_decompose(const CommonOptions& opt, const std::string& province, std::ostream& log) {
    Inputs in = load_inputs(opt);
    const auto years = observed_factors(in, province);
    if (years.size() < 2) throw InputError("decomposition needs at least 2 years");
    const auto table = decompose_series(years);
    OutputStage out(opt.out_dir);
    out.table("decomposition/" + slug(province), to_table(table), opt.format);
    auto m = manifest_header(in, "decompose");
    m["province"] = province;
    write_manifest(out, m);
    out.commit();
    log << "decomposed " << table.rows.size() << " year pairs for " << province
        << "; cumulative change " << format_number(table.cumulative.total) << '\n';
    return 0;
}

inline int cmd_spatial(const CommonOptions& opt, std::ostream& log) {
    Inputs in = load_inputs(opt);
    const auto acc = account(in);
    const auto coords = load_coordinates(in.use_fixture("province_coords.csv"));
    const auto path = centroid_path(province_emission_map(acc, {}, 0), coords);
    OutputStage out(opt.out_dir);
    out.table("spatial/ellipses", to_table(path), opt.format);
    write_manifest(out, manifest_header(in, "spatial"));
    out.commit();
    const auto& a = path.front().ellipse;
    const auto& b = path.back().ellipse;
    log << "centre moved by (" << format_number(b.center_x - a.center_x) << ", "
        << format_number(b.center_y - a.center_y) << ") from " << path.front().year << " to "
        << path.back().year << '\n';
    return 0;
}

inline int cmd_group_fixture(const fs::path& fixture, const CommonOptions& opt, bool write, std::ostream& log) {
    const auto tables = load_group_fixtures(fixture);
    Table t;
    t.columns = {"table", "method", "F", "df1", "df2", "p_value", "published_F", "published_p", "status"};
    for (const auto& fx : tables) {
        const auto r = run_test(fx.groups, fx.method);
        std::string line = format_test_line(fx.table, r);
        if (!fx.consistent) line += " DISCREPANCY (printed summaries do not reproduce the published F)";
        log << line << '\n';
        t.rows.push_back({fx.table, std::string(to_string(r.method)), r.f, r.df1, r.df2, r.p_value,
                          fx.published_f, fx.published_p, std::string(fx.consistent ? "ok" : "DISCREPANCY")});
    }
    if (write) {
        OutputStage out(opt.out_dir);
        out.table("group_tests/fixture_report", t, opt.format);
        nlohmann::ordered_json m;
        m["command"] = "group-test";
        m["fixture_versions"] = {{fixture.filename().string(), hex64(fnv1a(read_text(fixture)))}};
        write_manifest(out, m);
        out.commit();
    }
    return 0;
}

inline int cmd_group_test(const CommonOptions& opt, GroupScheme scheme, std::string variable,
                          const std::optional<fs::path>& covariate, std::ostream& log) {
    Inputs in = load_inputs(opt);
    const auto acc = account(in);
    if (variable.empty()) variable = scheme == GroupScheme::digital_economy ? "emissions" : "intensity";
    std::vector<Observation> obs;
    if (variable == "emissions") obs = observations(province_emission_map(acc, {}, 0));
    else if (variable == "intensity") obs = intensity_observations(acc, in.econ);
    else throw InputError("--variable must be emissions or intensity");
    const auto rep = run_group_test(in, scheme, obs, variable, covariate);
    OutputStage out(opt.out_dir);
    out.table("group_tests/" + std::string(to_string(scheme)), to_table(rep.groups, rep.result), opt.format);
    auto m = manifest_header(in, "group-test");
    m["scheme"] = to_string(scheme);
    m["variable"] = variable;
    write_manifest(out, m);
    out.commit();
    log << format_test_line(std::string(to_string(scheme)) + " (" + variable + ")", rep.result) << '\n';
    return 0;
}

inline int cmd_pipeline(const CommonOptions& opt, std::ostream& log) {
    Inputs in = load_inputs(opt);
    const auto& cfg = in.config;
    OutputStage out(opt.out_dir);
    auto stage = [&](const std::string& name, auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            detail::rethrow_in_stage(name, e);
        }
    };

    // 1. accounting
    const auto acc = stage("account", [&] { return account(in); });
    write_account(out, acc, opt.format);
    const int first = acc.national.points.front().year;
    const int last = acc.national.points.back().year;
    cfg.validate_horizon(last);
    const int end = cfg.forecast_end_year;

    // 2. forecasts of emissions and of the national drivers
    const auto national_observed = stage("decompose", [&] { return observed_factors(in, "ALL"); });
    auto series = emission_series(acc);
    const auto drivers = driver_series(national_observed);
    series.insert(series.end(), drivers.begin(), drivers.end());
    const auto fcs = stage("forecast", [&] { return build_forecasts(series, cfg, opt.workers); });
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& f : fcs) {
        out.table("forecast/" + slug(f.name), to_table(f.forecaster.rows(end)), opt.format);
        auto entry = manifest_entry(f.forecaster);
        per[f.name] = entry;
    }

    // 3. spatial ellipses over observed and forecast years
    const auto emap = province_emission_map(acc, fcs, end);
    const auto path = stage("spatial", [&] {
        return centroid_path(emap, load_coordinates(in.use_fixture("province_coords.csv")));
    });
    out.table("spatial/ellipses", to_table(path), opt.format);

    // 4. group tests
    std::vector<GroupTestReport> tests = stage("group-test", [&] {
        const auto intensity = intensity_observations(acc, in.econ);
        return std::vector<GroupTestReport>{
            run_group_test(in, GroupScheme::digital_economy, observations(emap), "emissions", std::nullopt),
            run_group_test(in, GroupScheme::region_ecw, intensity, "intensity", std::nullopt),
            run_group_test(in, GroupScheme::industry_structure_ratio, intensity, "intensity", std::nullopt)};
    });
    for (const auto& t : tests)
        out.table("group_tests/" + std::string(to_string(t.scheme)), to_table(t.groups, t.result), opt.format);

    // 5. decomposition, observed then projected
    std::vector<NamedForecast> driver_fcs;
    for (const auto& f : fcs)
        if (f.name.rfind("driver/", 0) == 0) driver_fcs.push_back(f);
    const auto decomposition = stage("decompose", [&] {
        auto all_years = national_observed;
        auto projected = project_factors(national_observed, driver_fcs, cfg);
        all_years.insert(all_years.end(), projected.begin(), projected.end());
        return decompose_series(all_years);
    });
    out.table("decomposition/all", to_table(decomposition), opt.format);

    // 6. summary
    const auto& national_fc = fcs.front().forecaster;
    const double e_first = acc.national.points.front().emissions;
    const double e_last = acc.national.points.back().emissions;
    const auto national_path = national_fc.forecast_to(end);
    const double e_end = national_path.values.back();
    int peak_year = last;
    double peak = e_last;
    for (std::size_t i = 0; i < national_path.size(); ++i)
        if (national_path[i] > peak) {
            peak = national_path[i];
            peak_year = national_path.year(i);
        }
    const auto split = national_fc.evaluate_split();
    std::ostringstream s;
    s << "Carbon emission accounting and projection summary\n"
      << "==================================================\n\n"
      << "1. Emissions (10^4 t CO2)\n"
      << "   observed " << first << ": " << format_number(e_first) << "\n"
      << "   observed " << last << ": " << format_number(e_last) << "\n"
      << "   hybrid forecast " << end << ": " << format_number(e_end) << "\n"
      << "   ratio " << end << "/" << first << ": " << format_number(e_end / e_first) << "x\n"
      << "   highest value in " << last << ".." << end << ": " << format_number(peak) << " in " << peak_year
      << "\n"
      << "   national model ARIMA" << national_fc.model().order.str() << ", test RMSE "
      << format_number(split.test.rmse) << " (ARIMA alone " << format_number(split.test_base.rmse) << ")\n";
    for (const auto& w : acc.national.warnings) s << "   note: " << w << "\n";
    const auto& c0 = path.front().ellipse;
    const auto& c1 = path.back().ellipse;
    s << "\n2. Spatial distribution\n"
      << "   centre " << path.front().year << ": (" << format_number(c0.center_x) << ", "
      << format_number(c0.center_y) << ")\n"
      << "   centre " << path.back().year << ": (" << format_number(c1.center_x) << ", "
      << format_number(c1.center_y) << ")\n"
      << "   net drift: dx=" << format_number(c1.center_x - c0.center_x)
      << " dy=" << format_number(c1.center_y - c0.center_y) << "\n"
      << "\n3. Group differences\n";
    for (const auto& t : tests) {
        s << "   " << format_test_line(std::string(to_string(t.scheme)) + " (" + t.variable + ")", t.result) << "\n";
        for (const auto& g : t.groups)
            s << "     " << g.name << ": n=" << g.n << " mean=" << format_number(g.mean)
              << " sd=" << format_number(g.sd) << "\n";
    }
    const auto& cum = decomposition.cumulative;
    s << "\n4. Decomposition " << first << "-" << end << " (cumulative, 10^4 t CO2)\n"
      << "   energy structure:     " << format_number(cum.dC_s) << "\n"
      << "   energy intensity:     " << format_number(cum.dC_e) << "\n"
      << "   industrial structure: " << format_number(cum.dC_n) << "\n"
      << "   per-capita GDP:       " << format_number(cum.dC_r) << "\n"
      << "   population:           " << format_number(cum.dC_p) << "\n"
      << "   total change:         " << format_number(cum.total) << "\n";
    out.write("summary.txt", s.str());

    auto m = manifest_header(in, "pipeline");
    m["per_series"] = per;
    write_manifest(out, m);
    out.commit();
    log << s.str();
    return 0;
}

}  // namespace emitcast
