#include <gtest/gtest.h>

#include <map>

#include "emitcast/arima.hpp"
#include "sim.hpp"

using namespace emitcast;
using testsupport::simulate_arima;

namespace {

/// Direct transcription of y_t = mu + sum gamma_i y_{t-i} + e_t + sum theta_j e_{t-j}
/// on the differenced scale, written without reference to the library.
double one_step(const std::vector<double>& w, const std::vector<double>& e, double mu,
                const std::vector<double>& ar, const std::vector<double>& ma) {
    const std::size_t t = w.size();
    double v = mu;
    for (std::size_t i = 0; i < ar.size(); ++i) v += ar[i] * w[t - 1 - i];
    for (std::size_t j = 0; j < ma.size(); ++j) v += ma[j] * e[t - 1 - j];
    return v;
}

std::map<std::string, int> selection_histogram(int seeds, const std::string& stream, std::size_t n,
                                               std::vector<double> ar, int d, std::vector<double> ma) {
    std::map<std::string, int> hist;
    for (int seed = 0; seed < seeds; ++seed) {
        auto s = simulate_arima(substream_seed(std::uint64_t(seed), stream), n, ar, d, ma);
        hist[select_order(s, 3, 2, 3).order.str()]++;
    }
    return hist;
}

std::string modal(const std::map<std::string, int>& hist) {
    std::string best;
    int count = -1;
    for (const auto& [k, v] : hist)
        if (v > count) best = k, count = v;
    return best;
}

}  // namespace

TEST(ArimaFit, WhiteNoiseClosedForm) {
    Rng rng(1);
    TimeSeries s(2000, testsupport::gaussian_noise(rng, 300, 2.0));
    auto m = fit(s, {0, 0, 0});
    double mean = 0, var = 0;
    for (double v : s.values) mean += v;
    mean /= 300.0;
    for (double v : s.values) var += (v - mean) * (v - mean);
    var /= 300.0;
    EXPECT_NEAR(m.mu, mean, 1e-12);
    EXPECT_NEAR(m.sigma2, var, 1e-12);
    EXPECT_EQ(m.residuals.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(m.residuals[i], s[i] - mean, 1e-12);
}

TEST(ArimaFit, RecoversMa1) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto s = simulate_arima(substream_seed(seed, "ma1"), 500, {}, 1, {0.5});
        auto m = fit(s, {0, 1, 1});
        ASSERT_EQ(m.ma.size(), 1u);
        EXPECT_LT(std::abs(m.ma[0] - 0.5), 0.1) << "seed " << seed;
    }
}

TEST(ArimaFit, RecoversAr1) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto s = simulate_arima(substream_seed(seed, "ar1"), 500, {0.7}, 0, {});
        auto m = fit(s, {1, 0, 0});
        ASSERT_EQ(m.ar.size(), 1u);
        EXPECT_LT(std::abs(m.ar[0] - 0.7), 0.1) << "seed " << seed;
    }
}

TEST(ArimaFit, Ar1MatchesLeastSquares) {
    // CSS for a pure AR model is ordinary least squares on lagged values.
    auto s = simulate_arima(7, 300, {0.4}, 0, {}, 2.0);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = 299;
    for (std::size_t t = 1; t < 300; ++t) {
        sx += s[t - 1];
        sy += s[t];
        sxx += s[t - 1] * s[t - 1];
        sxy += s[t - 1] * s[t];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    auto m = fit(s, {1, 0, 0});
    EXPECT_NEAR(m.ar[0], slope, 1e-4);
    EXPECT_NEAR(m.mu, intercept, 1e-3);
}

TEST(ArimaFit, InvariantsOnRandomSeries) {
    Rng rng(2);
    for (int trial = 0; trial < 12; ++trial) {
        ArimaOrder o{int(rng() % 3), int(rng() % 3), int(rng() % 3)};
        auto s = simulate_arima(rng(), 80, {0.5}, o.d, {0.3});
        auto m = fit(s, o);
        std::vector<double> neg_ma;
        for (double v : m.ma) neg_ma.push_back(-v);
        EXPECT_LT(detail::max_inverse_root(m.ar), 1.0) << o.str();
        EXPECT_LT(detail::max_inverse_root(neg_ma), 1.0) << o.str();
        EXPECT_EQ(m.residuals.size(), s.size() - std::size_t(o.d));
        EXPECT_GT(m.sigma2, 0.0);
        EXPECT_DOUBLE_EQ(m.aic, aic(m.log_likelihood, m.n_params));
        EXPECT_EQ(m.n_params, o.p + o.q + 2);
    }
}

TEST(ArimaFit, TooShort) {
    TimeSeries s(2000, std::vector<double>(12, 1.0));
    EXPECT_NO_THROW(fit(s, {1, 1, 1}));
    EXPECT_THROW(fit(s, {2, 1, 1}), InputError);
    EXPECT_THROW(fit(s, {-1, 0, 0}), InputError);
}

TEST(ArimaFit, NonConvergenceCarriesDiagnostics) {
    auto s = simulate_arima(3, 100, {0.5}, 0, {0.4});
    FitOptions o;
    o.max_iterations = 1;
    try {
        fit(s, {2, 0, 2}, o);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("best normalised objective"), std::string::npos);
    }
}

TEST(ArimaFit, ShiftEquivariance) {
    auto s = simulate_arima(4, 150, {0.6}, 0, {0.3});
    std::vector<double> shifted = s.values;
    for (auto& v : shifted) v += 50.0;
    auto a = fit(s, {1, 0, 1});
    auto b = fit(TimeSeries(s.start_year, shifted), {1, 0, 1});
    EXPECT_NEAR(a.ar[0], b.ar[0], 1e-5);
    EXPECT_NEAR(a.ma[0], b.ma[0], 1e-5);
    // mu is the intercept: shifting levels by c moves it by c(1 - gamma).
    EXPECT_NEAR(b.mu - a.mu, 50.0 * (1.0 - a.ar[0]), 1e-3);

    auto c = simulate_arima(5, 150, {}, 1, {0.4});
    std::vector<double> c_shift = c.values;
    for (auto& v : c_shift) v += 50.0;
    auto m1 = fit(c, {0, 1, 1});
    auto m2 = fit(TimeSeries(c.start_year, c_shift), {0, 1, 1});
    // Equal up to the rounding of differencing shifted values.
    EXPECT_NEAR(m1.mu, m2.mu, 1e-9);
    EXPECT_NEAR(m1.ma[0], m2.ma[0], 1e-9);
    EXPECT_NEAR(m1.sigma2, m2.sigma2, 1e-9);
}

TEST(ArimaForecast, RandomWalkIsFlat) {
    ArimaModel m;
    m.order = {0, 1, 0};
    m.training = TimeSeries(2000, {3, 5, 7});
    m.residuals = TimeSeries(2001, {0, 0});
    auto f = forecast(m, 4);
    EXPECT_EQ(f.values, (std::vector<double>{7, 7, 7, 7}));
    EXPECT_EQ(f.start_year, 2003);
}

TEST(ArimaForecast, DriftArithmetic) {
    ArimaModel m;
    m.order = {0, 1, 0};
    m.mu = 2.0;
    m.training = TimeSeries(2000, {3, 5, 7});
    m.residuals = TimeSeries(2001, {0, 0});
    EXPECT_EQ(forecast(m, 3).values, (std::vector<double>{9, 11, 13}));
    EXPECT_THROW(forecast(m, 0), InputError);
}

TEST(ArimaForecast, Ma1MatchesManualRecursion) {
    auto s = simulate_arima(6, 60, {}, 1, {0.5}, 0.3);
    auto m = fit(s, {0, 1, 1});
    // Rebuild the innovations by hand and step the recursion forward.
    std::vector<double> w, e;
    for (std::size_t t = 1; t < s.size(); ++t) w.push_back(s[t] - s[t - 1]);
    for (std::size_t t = 0; t < w.size(); ++t)
        e.push_back(w[t] - m.mu - (t > 0 ? m.ma[0] * e[t - 1] : 0.0));
    double level = s.values.back();
    std::vector<double> oracle;
    for (int k = 0; k < 3; ++k) {
        double step = one_step(w, e, m.mu, {}, m.ma);
        w.push_back(step);
        e.push_back(0.0);
        level += step;
        oracle.push_back(level);
    }
    auto f = forecast(m, 3);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(f[k], oracle[k], 1e-9);
}

TEST(ArimaForecast, FirstStepEqualsOneStepExpectation) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        ArimaOrder o{1 + int(rng() % 2), int(rng() % 2), int(rng() % 3)};
        auto s = simulate_arima(rng(), 80, {0.4}, o.d, {0.2}, 1.0);
        auto m = fit(s, o);
        auto w = difference(s, o.d).values;
        double v = one_step(w, m.residuals.values, m.mu, m.ar, m.ma);
        double expected = o.d == 0 ? v : s.values.back() + v;
        EXPECT_NEAR(forecast(m, 1)[0], expected, 1e-9) << o.str();
    }
}

TEST(ArimaForecast, SecondOrderIntegration) {
    ArimaModel m;
    m.order = {0, 2, 0};
    m.mu = 1.0;
    m.training = TimeSeries(2000, {0, 1, 3, 6});
    m.residuals = TimeSeries(2002, {0, 0});
    // Second differences are constant 1: next values 10, 15, 21.
    EXPECT_EQ(forecast(m, 3).values, (std::vector<double>{10, 15, 21}));
}

TEST(ArimaResiduals, DeterministicDriftFitsExactly) {
    std::vector<double> v;
    for (int i = 0; i < 20; ++i) v.push_back(5.0 + 3.0 * i);
    auto m = fit(TimeSeries(2000, v), {0, 1, 0});
    EXPECT_DOUBLE_EQ(m.mu, 3.0);
    auto r = in_sample_residuals(m);
    for (double e : r.innovations.values) EXPECT_EQ(e, 0.0);
    for (double e : r.level_errors.values) EXPECT_EQ(e, 0.0);
    EXPECT_EQ(r.fitted_levels[0], v[1]);
}

TEST(ArimaResiduals, WhiteNoiseIsDeviationFromMean) {
    Rng rng(8);
    TimeSeries s(2000, testsupport::gaussian_noise(rng, 50));
    auto m = fit(s, {0, 0, 0});
    auto r = in_sample_residuals(m);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(r.innovations[i], s[i] - m.mu, 1e-12);
        EXPECT_NEAR(r.fitted_levels[i] + r.level_errors[i], s[i], 1e-12);
    }
}

TEST(ArimaResiduals, LevelErrorsAreOneStepForecastErrors) {
    auto s = simulate_arima(9, 60, {0.5}, 1, {0.3}, 0.5);
    auto m = fit(s, {1, 1, 1});
    auto r = in_sample_residuals(m);
    EXPECT_EQ(r.conditioned, 1u);
    auto w = difference(s, 1).values;
    for (std::size_t t = 1; t < w.size(); ++t) {
        std::vector<double> past(w.begin(), w.begin() + std::ptrdiff_t(t));
        std::vector<double> e_past(r.innovations.values.begin(),
                                   r.innovations.values.begin() + std::ptrdiff_t(t));
        const double level_forecast = s[t] + one_step(past, e_past, m.mu, m.ar, m.ma);
        EXPECT_NEAR(r.level_errors[t], s[t + 1] - level_forecast, 1e-9);
    }
}

TEST(ArimaResiduals, CorrectModelPassesLjungBox) {
    auto s = simulate_arima(substream_seed(10, "lb"), 300, {0.6}, 0, {});
    auto m = fit(s, {1, 0, 0});
    EXPECT_GT(residual_diagnostic(m).p_value, 0.05);
    auto j = model_summary(m);
    EXPECT_EQ(j["order"].dump(), "[1,0,0]");
    EXPECT_TRUE(j.contains("ljung_box_p"));
}

TEST(ArimaConstraints, TransformAlwaysStationary) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> raw(1 + rng() % 3);
        for (auto& v : raw) v = testsupport::uniform(rng, -6, 6);
        EXPECT_LT(detail::max_inverse_root(detail::constrained_coefficients(raw)), 1.0);
    }
}

TEST(ArimaConstraints, ProjectionPullsRootsInside) {
    std::vector<double> c{1.2};
    EXPECT_TRUE(detail::project_outside_unit_circle(c));
    EXPECT_LT(detail::max_inverse_root(c), 1.0);
    std::vector<double> ok{0.3, 0.2};
    EXPECT_FALSE(detail::project_outside_unit_circle(ok));
    EXPECT_EQ(ok, (std::vector<double>{0.3, 0.2}));
}

TEST(SelectOrder, RandomWalkNeedsOneDifference) {
    auto hist = selection_histogram(40, "sel_rw", 200, {}, 1, {});
    int d1 = 0;
    for (const auto& [k, v] : hist)
        if (k.substr(3, 1) == "1") d1 += v;
    // The level test has 5% size, so a few walks keep d = 0.
    EXPECT_GE(d1, 35);
    EXPECT_EQ(modal(hist), "(0,1,0)");
}

TEST(SelectOrder, WhiteNoiseModalOrder) {
    auto hist = selection_histogram(40, "sel_wn", 200, {}, 0, {});
    EXPECT_EQ(modal(hist), "(0,0,0)");
}

TEST(SelectOrder, Ma1ModalOrder) {
    auto hist = selection_histogram(40, "sel_ma", 200, {}, 1, {0.6});
    EXPECT_EQ(modal(hist), "(0,1,1)");
}

TEST(SelectOrder, ShortSeriesRestrictsGrid) {
    auto s = simulate_arima(12, 14, {}, 1, {});
    auto sel = select_order(s, 3, 1, 3, true);
    for (const auto& [o, a] : sel.aic_table) EXPECT_LE(o.p + o.q, 1);
}

TEST(SelectOrder, TiesPreferSmallerModels) {
    // A constant differenced series: every candidate has the same floor variance.
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(2.0 * i);
    auto sel = select_order(TimeSeries(2000, v), 2, 2, 2);
    EXPECT_EQ(sel.order, (ArimaOrder{0, 1, 0}));
}

TEST(SelectOrder, NoStationaryDifference) {
    // Explosive series stays non-stationary after every difference.
    std::vector<double> v;
    double x = 1.0;
    for (int i = 0; i < 30; ++i) v.push_back(x *= 1.5);
    TimeSeries s(2000, v);
    try {
        select_order(s, 1, 1, 1);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("manually"), std::string::npos);
    }
    auto sel = select_order(s, 1, 1, 1, true);
    EXPECT_TRUE(sel.fallback);
    EXPECT_EQ(sel.order.d, 1);
}

TEST(SelectOrder, RejectsNearUnitRootCandidates) {
    auto s = simulate_arima(substream_seed(0, "wn"), 200, {}, 0, {});
    auto sel = select_order(s, 3, 0, 3);
    EXPECT_FALSE(sel.rejected.empty());
    for (const auto& o : sel.rejected) EXPECT_NE(o, sel.order);
}

TEST(SelectOrder, BoundsChecked) {
    auto s = simulate_arima(13, 50, {}, 0, {});
    EXPECT_THROW(select_order(s, 4, 1, 1), InputError);
    EXPECT_THROW(select_order(s, 1, 3, 1), InputError);
}
