// Writes the synthetic sample panel under data/sample. Deterministic: the
// same binary always produces the same files.
//
//   make_sample_data <out-dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "emitcast/dataio.hpp"
#include "emitcast/rng.hpp"

namespace {

using namespace emitcast;

struct Province {
    const char* name;
    double scale;    // relative economic size
    double growth;   // mean real GDP growth
    double west;     // 0 east .. 1 west; drives faster late growth
};

// Scales and growth rates are invented; only the names are real.
const Province kProvinces[] = {
    {"Anhui", 0.9, 0.095, 0.4},        {"Beijing", 1.1, 0.085, 0.0},
    {"Chongqing", 0.7, 0.105, 0.8},    {"Fujian", 1.0, 0.095, 0.1},
    {"Gansu", 0.35, 0.095, 1.0},       {"Guangdong", 2.2, 0.090, 0.1},
    {"Guangxi", 0.65, 0.095, 0.7},     {"Guizhou", 0.45, 0.110, 0.9},
    {"Hainan", 0.15, 0.090, 0.2},      {"Hebei", 1.2, 0.085, 0.2},
    {"Heilongjiang", 0.6, 0.070, 0.3}, {"Henan", 1.4, 0.090, 0.4},
    {"Hubei", 1.1, 0.095, 0.5},        {"Hunan", 1.0, 0.095, 0.5},
    {"Inner Mongolia", 0.6, 0.100, 0.9},{"Jiangsu", 2.0, 0.095, 0.1},
    {"Jiangxi", 0.6, 0.095, 0.5},      {"Jilin", 0.5, 0.075, 0.3},
    {"Liaoning", 0.9, 0.070, 0.2},     {"Ningxia", 0.15, 0.100, 1.0},
    {"Qinghai", 0.1, 0.095, 1.0},      {"Shaanxi", 0.7, 0.105, 0.8},
    {"Shandong", 1.8, 0.085, 0.2},     {"Shanghai", 1.2, 0.080, 0.0},
    {"Shanxi", 0.6, 0.085, 0.5},       {"Sichuan", 1.1, 0.100, 0.8},
    {"Tianjin", 0.6, 0.080, 0.1},      {"Xinjiang", 0.4, 0.100, 1.0},
    {"Yunnan", 0.6, 0.100, 0.9},       {"Zhejiang", 1.5, 0.090, 0.1},
};

constexpr int kFirstYear = 2000;
constexpr int kLastYear = 2021;

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_sample_data <out-dir>\n";
        return 2;
    }
    const std::filesystem::path out = argv[1];
    std::filesystem::create_directories(out);

    std::ostringstream energy, econ;
    energy << "# Synthetic energy consumption panel (10^4 t standard coal). Generated by\n"
           << "# tools/make_sample_data.cpp; not real statistics.\n"
           << "province,year,sector,energy,consumption\n";
    econ << "# Synthetic economic panel: GDP by sector (10^8 yuan) and population (10^4 persons).\n"
         << "province,year,gdp_primary,gdp_secondary,gdp_tertiary,population\n";

    for (const auto& p : kProvinces) {
        Rng rng = make_rng(20240601, p.name);
        double gdp = 2000.0 * p.scale;
        double pop = 2500.0 * std::sqrt(p.scale) * uniform(rng, 0.8, 1.2);
        double tertiary_share = uniform(rng, 0.33, 0.45);
        double primary_share = uniform(rng, 0.10, 0.22);
        const double intensity0[3] = {uniform(rng, 0.15, 0.25), uniform(rng, 1.2, 1.8),
                                      uniform(rng, 0.25, 0.4)};
        const int gas_start = 2000 + int(uniform(rng, 0.0, 6.0));
        for (int year = kFirstYear; year <= kLastYear; ++year) {
            const double t = year - kFirstYear;
            const double g = p.growth - 0.002 * t * (1.0 - p.west) + uniform(rng, -0.01, 0.01);
            if (year > kFirstYear) {
                gdp *= 1.0 + g;
                pop *= 1.0 + 0.004 + 0.002 * p.west + uniform(rng, -0.002, 0.002);
                tertiary_share = std::min(0.70, tertiary_share + 0.006 + uniform(rng, -0.002, 0.003));
                primary_share = std::max(0.03, primary_share - 0.003 + uniform(rng, -0.001, 0.001));
            }
            const double secondary_share = 1.0 - tertiary_share - primary_share;
            const double gdp_by[3] = {gdp * primary_share, gdp * secondary_share, gdp * tertiary_share};
            char line[256];
            std::snprintf(line, sizeof line, "%s,%d,%.4f,%.4f,%.4f,%.3f\n", p.name, year, gdp_by[0],
                          gdp_by[1], gdp_by[2], pop);
            econ << line;

            // Energy mix drifts from coal toward gas and electricity.
            const double shift = t / double(kLastYear - kFirstYear);
            for (Sector s : kAllSectors) {
                double total;
                if (s == Sector::residential) {
                    total = pop * (0.12 + 0.10 * shift) * uniform(rng, 0.95, 1.05);
                } else {
                    const auto i = static_cast<std::size_t>(s);
                    const double decline = std::pow(1.0 - (0.035 - 0.015 * p.west), t);
                    total = gdp_by[i] * intensity0[i] * decline * uniform(rng, 0.95, 1.05);
                }
                double mix[6] = {0.62 - 0.22 * shift, 0.16, year >= gas_start ? 0.02 + 0.08 * shift : 0.0,
                                 0.12 + 0.10 * shift, 0.05, 0.03};
                if (s == Sector::primary) mix[1] += 0.10;
                double sum = 0.0;
                for (auto& m : mix) {
                    if (m > 0.0) m *= uniform(rng, 0.9, 1.1);
                    sum += m;
                }
                for (Energy e : kAllEnergies) {
                    const double v = total * mix[static_cast<std::size_t>(e)] / sum;
                    std::snprintf(line, sizeof line, "%s,%d,%s,%s,%.4f\n", p.name, year,
                                  std::string(to_string(s)).c_str(), std::string(to_string(e)).c_str(), v);
                    energy << line;
                }
            }
        }
    }

    const std::string factors =
        "# Synthetic carbon coefficients (t C per t standard coal); illustrative values only.\n"
        "energy,factor\n"
        "coal,0.7559\n"
        "petroleum,0.5857\n"
        "natural_gas,0.4483\n"
        "power,0.6000\n"
        "heat,0.7000\n"
        "other,0.3000\n";

    RunConfig cfg;
    const std::string config = "# Run configuration for the synthetic sample panel.\n" + config_text(cfg);

    write_file_atomic(out / "energy_panel.csv", energy.str());
    write_file_atomic(out / "economic_panel.csv", econ.str());
    write_file_atomic(out / "factors.csv", factors);
    write_file_atomic(out / "config.txt", config);
    std::cout << "wrote sample panel to " << out.string() << '\n';
    return 0;
}
