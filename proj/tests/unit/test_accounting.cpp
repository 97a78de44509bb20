#include <gtest/gtest.h>

#include "emitcast/accounting.hpp"
#include "sim.hpp"

using namespace emitcast;

namespace {

constexpr double kCo2 = 44.0 / 12.0;

EnergyRecord rec(std::string province, int year, Sector s, Energy e, double v) {
    return {{std::move(province), year, s, e}, v, 0};
}

EmissionFactorTable uniform_factors(double r) {
    EmissionFactorTable t;
    for (auto e : kAllEnergies) t.set(e, r);
    return t;
}

double brute_force(const EnergyPanel& panel, const EmissionFactorTable& f, int year) {
    double sum = 0.0;
    for (const auto& r : panel.records()) {
        if (r.key.year != year) continue;
        if (r.key.sector == Sector::residential &&
            (r.key.energy == Energy::power || r.key.energy == Energy::heat))
            continue;
        sum += *r.consumption * f.factor(r.key.energy, year) * 44.0 / 12.0;
    }
    return sum;
}

}  // namespace

TEST(ComputeEmissions, SingleRecordDirectFormula) {
    EnergyPanel p({rec("A", 2000, Sector::primary, Energy::coal, 100.0)});
    EmissionFactorTable f;
    f.set(Energy::coal, 0.5);
    auto s = compute_emissions(p, f);
    ASSERT_EQ(s.points.size(), 1u);
    EXPECT_NEAR(s.points[0].emissions, 183.3333, 1e-4);
    EXPECT_DOUBLE_EQ(s.points[0].emissions, 100.0 * 0.5 * kCo2);
}

TEST(ComputeEmissions, AllZeroConsumption) {
    Rng rng(1);
    auto p = testsupport::random_energy_panel(rng, 2, 2000, 3, 1.0);
    for (const auto& pt : compute_emissions(p, uniform_factors(0.5)).points)
        EXPECT_EQ(pt.emissions, 0.0);
}

TEST(ComputeEmissions, MixedPanelEqualsSumOfSingleRecordCalls) {
    std::vector<EnergyRecord> recs;
    Rng rng(2);
    for (Sector s : kIndustries)
        for (Energy e : {Energy::coal, Energy::natural_gas})
            recs.push_back(rec("A", 2010, s, e, testsupport::uniform(rng, 1, 500)));
    auto f = testsupport::random_factors(rng);
    double oracle = 0.0;
    for (const auto& r : recs) oracle += compute_emissions(EnergyPanel({r}), f).points[0].emissions;
    auto got = compute_emissions(EnergyPanel(recs), f).points[0].emissions;
    EXPECT_NEAR(got, oracle, 1e-12 * oracle);
}

TEST(ComputeEmissions, MissingFactorNamesEnergy) {
    EnergyPanel p({rec("A", 2000, Sector::primary, Energy::heat, 1.0)});
    EmissionFactorTable f;
    f.set(Energy::coal, 0.5);
    try {
        compute_emissions(p, f);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("heat"), std::string::npos);
    }
}

TEST(ComputeEmissions, ResidentialPowerHeatZeroWeightedWithWarning) {
    EnergyPanel p({rec("A", 2000, Sector::residential, Energy::coal, 10.0),
                   rec("A", 2000, Sector::residential, Energy::power, 10.0),
                   rec("A", 2000, Sector::residential, Energy::heat, 10.0)});
    auto s = compute_emissions(p, uniform_factors(0.5));
    EXPECT_DOUBLE_EQ(s.points[0].emissions, 10.0 * 0.5 * kCo2);
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_NE(s.warnings[0].find("2 residential"), std::string::npos);
}

TEST(ComputeEmissions, ScopeFilters) {
    Rng rng(3);
    auto p = testsupport::random_energy_panel(rng, 3, 2000, 2);
    auto f = testsupport::random_factors(rng);
    auto s = compute_emissions(p, f, {"P1", {Sector::secondary}});
    EXPECT_EQ(s.province, "P1");
    EXPECT_EQ(s.sector, "secondary");
    double oracle = 0.0;
    for (const auto& r : p.records())
        if (r.key.province == "P1" && r.key.sector == Sector::secondary && r.key.year == 2001)
            oracle += *r.consumption * f.factor(r.key.energy, 2001) * kCo2;
    EXPECT_NEAR(s.points[1].emissions, oracle, 1e-12 * oracle);
    EXPECT_THROW(compute_emissions(p, f, {"nowhere", {}}), InputError);
}

TEST(ComputeEmissions, GapsMustBeResolvedFirst) {
    EnergyPanel p({{{"A", 2000, Sector::primary, Energy::coal}, std::nullopt, 2}});
    EXPECT_THROW(compute_emissions(p, uniform_factors(1.0)), InputError);
}

TEST(ComputeEmissions, Linearity) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = testsupport::random_energy_panel(rng, 2, 2000, 3, 0.2);
        auto f = testsupport::random_factors(rng);
        const double alpha = testsupport::uniform(rng, 0.0, 10.0);
        std::vector<EnergyRecord> scaled = p.records();
        for (auto& r : scaled) r.consumption = *r.consumption * alpha;
        auto base = compute_emissions(p, f);
        auto s = compute_emissions(EnergyPanel(scaled), f);
        for (std::size_t t = 0; t < base.points.size(); ++t)
            EXPECT_NEAR(s.points[t].emissions, alpha * base.points[t].emissions,
                        1e-12 * alpha * base.points[t].emissions + 1e-300);
    }
}

TEST(ComputeEmissions, RandomPanelsMatchBruteForce) {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        auto p = testsupport::random_energy_panel(rng, 4, 2000, 3, 0.1);
        auto f = testsupport::random_factors(rng);
        auto s = compute_emissions(p, f);
        for (const auto& pt : s.points) {
            const double oracle = brute_force(p, f, pt.year);
            EXPECT_NEAR(pt.emissions, oracle, 1e-12 * oracle);
        }
    }
}

TEST(AggregateNational, PointwiseSum) {
    EmissionSeries a{"A", "ALL", {{2000, 1}, {2001, 2}}, {}};
    EmissionSeries b{"B", "ALL", {{2000, 3}, {2001, 4}}, {}};
    auto n = aggregate_national({a, b});
    EXPECT_EQ(n.province, "ALL");
    EXPECT_EQ(n.points, (std::vector<EmissionPoint>{{2000, 4}, {2001, 6}}));
    EXPECT_EQ(aggregate_national({a}).points, a.points);
}

TEST(AggregateNational, MisalignedYearsRejected) {
    EmissionSeries a{"A", "ALL", {{2000, 1}, {2001, 2}}, {}};
    EmissionSeries b{"B", "ALL", {{2001, 3}, {2002, 4}}, {}};
    EXPECT_THROW(aggregate_national({a, b}), InputError);
    EXPECT_THROW(aggregate_national({}), InputError);
}

TEST(AggregateNational, ThirtyProvincesMatchFlatSum) {
    Rng rng(6);
    auto p = testsupport::random_energy_panel(rng, 30, 2000, 4);
    auto f = testsupport::random_factors(rng);
    auto n = aggregate_national(emissions_by_province(p, f));
    for (const auto& pt : n.points) {
        const double oracle = brute_force(p, f, pt.year);
        EXPECT_NEAR(pt.emissions, oracle, 1e-12 * oracle);
    }
}

TEST(AggregateNational, ProvinceAndSectorTotalsAgree) {
    Rng rng(7);
    auto p = testsupport::random_energy_panel(rng, 5, 2000, 3);
    auto f = testsupport::random_factors(rng);
    auto national = compute_emissions(p, f);
    auto by_province = aggregate_national(emissions_by_province(p, f));
    std::vector<EmissionSeries> sectors;
    for (Sector s : kAllSectors) sectors.push_back(compute_emissions(p, f, {"", {s}}));
    auto by_sector = aggregate_national(sectors);
    EXPECT_EQ(by_sector.sector, "ALL");
    for (std::size_t t = 0; t < national.points.size(); ++t) {
        const double c = national.points[t].emissions;
        EXPECT_NEAR(by_province.points[t].emissions, c, 1e-12 * c);
        EXPECT_NEAR(by_sector.points[t].emissions, c, 1e-12 * c);
    }
}

TEST(IdentityFactors, SingleCellDegenerate) {
    EnergyPanel p({rec("A", 2000, Sector::secondary, Energy::coal, 50.0)});
    EconomicPanel econ({{"A", 2000, {1.0, 20.0, 3.0}, 7.0}});
    EmissionFactorTable f;
    f.set(Energy::coal, 0.7);
    auto id = derive_identity_factors(p, econ, f);
    ASSERT_EQ(id.size(), 1u);
    ASSERT_EQ(id[0].cells.size(), 1u);
    const auto& c = id[0].cells[0];
    EXPECT_EQ(c.share, 1.0);
    EXPECT_DOUBLE_EQ(c.intensity, 50.0 / 20.0);
    EXPECT_DOUBLE_EQ(c.gdp_share, 20.0 / 24.0);
    EXPECT_DOUBLE_EQ(c.gdp_per_capita, 24.0 / 7.0);
    EXPECT_EQ(c.population, 7.0);
    EXPECT_NEAR(id[0].emissions(), compute_emissions(p, f).points[0].emissions, 1e-12 * 50.0);
}

TEST(IdentityFactors, SharesThirtySeventy) {
    EnergyPanel p({rec("A", 2000, Sector::primary, Energy::coal, 30.0),
                   rec("A", 2000, Sector::primary, Energy::power, 70.0)});
    EconomicPanel econ({{"A", 2000, {1.0, 1.0, 1.0}, 1.0}});
    auto id = derive_identity_factors(p, econ, uniform_factors(0.5));
    EXPECT_DOUBLE_EQ(id[0].cells[0].share, 0.3);
    EXPECT_DOUBLE_EQ(id[0].cells[1].share, 0.7);
}

TEST(IdentityFactors, ReconstructionAndShareSums) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = testsupport::random_energy_panel(rng, 3, 2000, 3, 0.15);
        auto econ = testsupport::random_economic_panel(rng, 3, 2000, 3);
        auto f = testsupport::random_factors(rng);
        auto id = derive_identity_factors(p, econ, f);
        for (const auto& y : id) {
            auto c = compute_emissions(p, f, {y.province, {kIndustries.begin(), kIndustries.end()}})
                         .points[std::size_t(y.year - 2000)]
                         .emissions;
            EXPECT_NEAR(y.emissions(), c, 1e-12 * std::max(c, 1e-300));
            std::map<Sector, double> share_sum;
            std::map<Sector, double> gdp_share;
            for (const auto& cell : y.cells) {
                share_sum[cell.sector] += cell.share;
                gdp_share[cell.sector] = cell.gdp_share;
                for (double v : {cell.share, cell.coefficient, cell.intensity, cell.gdp_share,
                                 cell.gdp_per_capita, cell.population}) {
                    EXPECT_TRUE(std::isfinite(v));
                    EXPECT_GE(v, 0.0);
                }
            }
            double n_sum = 0.0;
            for (auto [s, v] : share_sum) EXPECT_NEAR(v, 1.0, 1e-12);
            for (auto [s, v] : gdp_share) n_sum += v;
            EXPECT_NEAR(n_sum, 1.0, 1e-12);
        }
    }
}

TEST(IdentityFactors, MissingEconomicRecord) {
    EnergyPanel p({rec("A", 2000, Sector::primary, Energy::coal, 30.0)});
    EconomicPanel econ({{"B", 2000, {1.0, 1.0, 1.0}, 1.0}});
    EXPECT_THROW(derive_identity_factors(p, econ, uniform_factors(0.5)), InputError);
}

TEST(IdentityFactors, NationalAggregateReconstructs) {
    Rng rng(9);
    auto p = testsupport::random_energy_panel(rng, 4, 2000, 3);
    auto econ = testsupport::random_economic_panel(rng, 4, 2000, 3);
    auto f = testsupport::random_factors(rng);
    auto id = derive_identity_factors(national_energy_panel(p), national_economic_panel(econ), f);
    auto years = factors_for(id, "ALL");
    ASSERT_EQ(years.size(), 3u);
    auto c = compute_emissions(p, f, {"", {kIndustries.begin(), kIndustries.end()}});
    for (std::size_t t = 0; t < years.size(); ++t)
        EXPECT_NEAR(years[t].emissions(), c.points[t].emissions, 1e-12 * c.points[t].emissions);
    EXPECT_THROW(factors_for(id, "P0"), InputError);
}
