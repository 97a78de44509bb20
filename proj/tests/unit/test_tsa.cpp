#include <gtest/gtest.h>

#include <cmath>

#include "emitcast/tsa.hpp"
#include "sim.hpp"

using namespace emitcast;
using testsupport::simulate_arima;

TEST(Difference, Arithmetic) {
    TimeSeries s(2000, {1, 3, 6, 10});
    auto d1 = difference(s, 1);
    EXPECT_EQ(d1.values, (std::vector<double>{2, 3, 4}));
    EXPECT_EQ(d1.start_year, 2001);
    auto d2 = difference(d1, 1);
    EXPECT_EQ(d2.values, (std::vector<double>{1, 1}));
    EXPECT_EQ(difference(s, 2), d2);
    EXPECT_EQ(difference(s, 0), s);
}

TEST(Difference, OrderTooLarge) {
    TimeSeries s(2000, {1, 2, 3});
    EXPECT_THROW(difference(s, 3), InputError);
    EXPECT_THROW(difference(s, -1), InputError);
}

TEST(Difference, InvertedByCumulativeSum) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        TimeSeries s(1990 + trial, testsupport::gaussian_noise(rng, 30, 5.0));
        auto back = cumulative_sum(difference(s, 1), s.values.front());
        ASSERT_EQ(back.size(), s.size());
        EXPECT_EQ(back.start_year, s.start_year);
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(back[i], s[i], 1e-9);
    }
}

TEST(TimeSeriesType, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(TimeSeries(2000, {}), InputError);
    EXPECT_THROW(TimeSeries(2000, {1.0, NAN}), InputError);
    TimeSeries s(2000, {1, 2});
    EXPECT_EQ(s.at_year(2001), 2.0);
    EXPECT_THROW(s.at_year(2002), InputError);
}

TEST(Aic, Arithmetic) {
    EXPECT_EQ(aic(0.0, 0), 0.0);
    EXPECT_EQ(aic(-10.0, 2), 24.0);
    EXPECT_LT(aic(-5.0, 3), aic(-6.0, 3));
    EXPECT_THROW(aic(0.0, -1), InputError);
}

TEST(Acf, WhiteNoiseWithinBartlettBand) {
    Rng rng(2);
    TimeSeries s(0, testsupport::gaussian_noise(rng, 1000));
    auto r = acf(s, 5);
    EXPECT_EQ(r[0], 1.0);
    for (std::size_t k = 1; k <= 5; ++k) EXPECT_LT(std::abs(r[k]), 3.0 / std::sqrt(1000.0)) << k;
}

TEST(Acf, Ar1MatchesTheory) {
    auto s = simulate_arima(3, 2000, {0.8}, 0, {});
    auto r = acf(s, 3);
    EXPECT_NEAR(r[1], 0.8, 0.05);
    EXPECT_NEAR(r[2], 0.64, 0.07);
}

TEST(Acf, BoundedAndPacfLagOne) {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        auto s = simulate_arima(rng(), 60, {testsupport::uniform(rng, -0.9, 0.9)}, 0,
                                {testsupport::uniform(rng, -0.9, 0.9)});
        auto r = acf(s, 10);
        auto p = pacf(s, 10);
        EXPECT_EQ(r[0], 1.0);
        EXPECT_EQ(p[1], r[1]);
        for (double v : r) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
        for (double v : p) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
    }
}

TEST(Acf, Ar1PacfCutsOff) {
    auto s = simulate_arima(5, 2000, {0.6}, 0, {});
    auto p = pacf(s, 4);
    EXPECT_NEAR(p[1], 0.6, 0.05);
    for (std::size_t k = 2; k <= 4; ++k) EXPECT_LT(std::abs(p[k]), 3.0 / std::sqrt(2000.0));
}

TEST(Acf, MaxLagTooLarge) {
    TimeSeries s(0, {1, 2, 3, 4});
    EXPECT_THROW(acf(s, 2), InputError);
    EXPECT_NO_THROW(acf(s, 1));
}

TEST(LjungBox, WhiteNoiseMostlyAccepted) {
    int accepted = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(substream_seed(seed, "lb"));
        TimeSeries s(0, testsupport::gaussian_noise(rng, 200));
        if (ljung_box(s, 10, 0).p_value > 0.05) ++accepted;
    }
    EXPECT_GE(accepted, 180);
}

TEST(LjungBox, StrongAutocorrelationRejected) {
    auto s = simulate_arima(6, 200, {0.9}, 0, {});
    EXPECT_LT(ljung_box(s, 10, 0).p_value, 0.01);
}

TEST(LjungBox, ZeroLagOneCorrelation) {
    std::vector<double> v;
    for (int i = 0; i < 400; ++i) v.push_back(std::array<double, 4>{1, 0, -1, 0}[i % 4]);
    TimeSeries s(0, v);
    auto r = ljung_box(s, 1, 0);
    EXPECT_EQ(r.q, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(LjungBox, MatchesDirectFormula) {
    Rng rng(7);
    TimeSeries s(0, testsupport::gaussian_noise(rng, 50));
    const std::size_t h = 6;
    double mean = 0;
    for (double x : s.values) mean += x;
    mean /= 50.0;
    double g0 = 0;
    for (double x : s.values) g0 += (x - mean) * (x - mean);
    double q = 0;
    for (std::size_t k = 1; k <= h; ++k) {
        double gk = 0;
        for (std::size_t t = k; t < 50; ++t) gk += (s[t] - mean) * (s[t - k] - mean);
        q += (gk / g0) * (gk / g0) / double(50 - k);
    }
    q *= 50.0 * 52.0;
    auto r = ljung_box(s, h, 2);
    EXPECT_NEAR(r.q, q, 1e-10 * q);
    EXPECT_EQ(r.df, 4);
    // chi-square(4) survival has closed form exp(-x/2)(1 + x/2).
    EXPECT_NEAR(r.p_value, std::exp(-q / 2) * (1 + q / 2), 1e-12);
}

TEST(LjungBox, LagsMustExceedParams) {
    TimeSeries s(0, std::vector<double>(50, 1.0));
    EXPECT_THROW(ljung_box(s, 2, 2), InputError);
}

TEST(Adf, RandomWalkUsuallyNotRejected) {
    auto s = testsupport::random_walk(substream_seed(1, "adf"), 200);
    auto r = adf_test(s);
    EXPECT_FALSE(r.reject_at_5pct);
    EXPECT_EQ(r.reject_at_5pct, r.p_value < 0.05);
}

TEST(Adf, StationaryAr1Rejected) {
    auto r = adf_test(simulate_arima(substream_seed(2, "adf"), 200, {0.3}, 0, {}));
    EXPECT_TRUE(r.reject_at_5pct);
    EXPECT_LT(r.t_statistic, r.critical_5pct);
}

TEST(Adf, DifferencedRandomWalkRejected) {
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        if (adf_test(difference(testsupport::random_walk(substream_seed(seed, "rwd"), 200), 1))
                .reject_at_5pct)
            ++rejected;
    EXPECT_GE(rejected, 95);
}

TEST(Adf, PValueMonotoneInStatistic) {
    double prev = 0.0;
    for (double tau = -8.0; tau <= 3.0; tau += 0.05) {
        const double p = mackinnon_p_value(tau, AdfRegression::constant);
        EXPECT_GE(p, prev);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
    // Asymptotic 5% critical value of the constant case is about -2.86.
    EXPECT_NEAR(mackinnon_p_value(-2.86, AdfRegression::constant), 0.05, 0.005);
}

TEST(Adf, CriticalValuesNearTabulated) {
    auto cv = mackinnon_critical_values(200, AdfRegression::constant);
    EXPECT_NEAR(cv[0], -3.46, 0.01);
    EXPECT_NEAR(cv[1], -2.87, 0.01);
    EXPECT_NEAR(cv[2], -2.57, 0.01);
}

TEST(Adf, FixedLagsAndTrendVariant) {
    auto s = simulate_arima(substream_seed(3, "adf"), 120, {0.5}, 0, {});
    AdfOptions o;
    o.lags = 2;
    EXPECT_EQ(adf_test(s, o).lags_used, 2u);
    o.regression = AdfRegression::constant_trend;
    auto r = adf_test(s, o);
    EXPECT_LT(r.critical_5pct, -3.3);
    EXPECT_TRUE(r.reject_at_5pct);
}

TEST(Adf, Errors) {
    EXPECT_THROW(adf_test(TimeSeries(0, std::vector<double>(40, 3.0))), InputError);
    EXPECT_THROW(adf_test(TimeSeries(0, {1, 2, 3, 5, 4})), InputError);
    AdfOptions o;
    o.lags = 30;
    EXPECT_THROW(adf_test(simulate_arima(1, 35, {}, 0, {}), o), InputError);
}

TEST(Adf, SchwertRule) {
    EXPECT_EQ(schwert_max_lags(100), 12u);
    EXPECT_EQ(schwert_max_lags(200), 14u);
    EXPECT_EQ(schwert_max_lags(22), 8u);
}
