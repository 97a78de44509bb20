// Command-line front end: account, forecast, decompose, spatial, group-test, pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emitcast/pipeline.hpp"

namespace {

using namespace emitcast;

void add_common(CLI::App* cmd, CommonOptions& opt, std::string& format, std::optional<std::string>& config,
                std::optional<std::string>& fixtures, std::optional<std::uint64_t>& seed) {
    cmd->add_option("--config", config, "run configuration (key=value); default <data-dir>/config.txt");
    cmd->add_option("--data-dir", opt.data_dir, "directory with energy_panel.csv, economic_panel.csv, factors.csv")
        ->capture_default_str();
    cmd->add_option("--fixtures-dir", fixtures, "grouping and coordinate tables; default <data-dir>/../fixtures");
    cmd->add_option("--out-dir", opt.out_dir, "output directory (replaced on success)")->capture_default_str();
    cmd->add_option("--seed", seed, "overrides the configured seed");
    cmd->add_option("--format", format, "csv or json")->capture_default_str();
    cmd->add_option("--workers", opt.workers, "worker threads for per-series work")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Carbon emission accounting, hybrid ARIMA-BP forecasting and LMDI decomposition"};
    app.require_subcommand(1);

    CommonOptions opt;
    std::string format = "csv";
    std::optional<std::string> config, fixtures;
    std::optional<std::uint64_t> seed;

    auto* account = app.add_subcommand("account", "emissions per province, sector and nation");
    auto* forecast = app.add_subcommand("forecast", "hybrid ARIMA-BP emission forecasts");
    auto* decompose = app.add_subcommand("decompose", "LMDI decomposition of emission changes");
    auto* spatial = app.add_subcommand("spatial", "standard deviational ellipses of province emissions");
    auto* group = app.add_subcommand("group-test", "Welch / ANOVA group difference tests");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage and write a summary");
    for (auto* c : {account, forecast, decompose, spatial, group, pipeline})
        add_common(c, opt, format, config, fixtures, seed);

    std::optional<int> to_year;
    std::string series = "national";
    forecast->add_option("--to-year", to_year, "last forecast year; default forecast_end_year");
    forecast->add_option("--series", series,
                         "comma list: national, sectors, provinces, all, or names like province/Beijing")
        ->capture_default_str();

    std::string province = "ALL";
    std::optional<std::string> verify_fixture;
    decompose->add_option("--province", province, "province name, or ALL for the national aggregate")
        ->capture_default_str();
    decompose->add_option("--verify-fixture", verify_fixture,
                          "check that each row of a published effect table sums to its gross effect");

    std::string scheme = "digital_economy";
    std::string variable;
    std::optional<std::string> group_fixture, covariate;
    group->add_option("--scheme", scheme, "digital_economy, region_ecw, industry_structure_ratio, new_productivity")
        ->capture_default_str();
    group->add_option("--variable", variable, "emissions or intensity; default depends on the scheme");
    group->add_option("--covariate", covariate, "province,year,value file for new_productivity");
    group->add_option("--fixture", group_fixture, "replay published group summary tables instead of panel data");

    CLI11_PARSE(app, argc, argv);

    try {
        auto fmt = parse_table_format(format);
        if (!fmt) throw InputError("--format must be csv or json");
        opt.format = *fmt;
        if (config) opt.config = *config;
        if (fixtures) opt.fixtures_dir = *fixtures;
        opt.seed = seed;
        if (opt.workers == 0) throw InputError("--workers must be at least 1");

        if (account->parsed()) return cmd_account(opt, std::cout);
        if (forecast->parsed()) return cmd_forecast(opt, to_year, series, std::cout);
        if (decompose->parsed()) {
            if (verify_fixture) return cmd_verify_fixture(*verify_fixture, std::cout);
            return cmd_decompose(opt, province, std::cout);
        }
        if (spatial->parsed()) return cmd_spatial(opt, std::cout);
        if (group->parsed()) {
            if (group_fixture) return cmd_group_fixture(*group_fixture, opt, true, std::cout);
            auto s = parse_group_scheme(scheme);
            if (!s) throw InputError("unknown --scheme '" + scheme + "'");
            std::optional<fs::path> cov;
            if (covariate) cov = *covariate;
            return cmd_group_test(opt, *s, variable, cov, std::cout);
        }
        if (pipeline->parsed()) return cmd_pipeline(opt, std::cout);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
