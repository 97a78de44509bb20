#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "emitcast/error.hpp"

namespace emitcast {

/// Annual series: values[i] belongs to year start_year + i.
struct TimeSeries {
    int start_year = 0;
    std::vector<double> values;

    TimeSeries() = default;

    TimeSeries(int start, std::vector<double> v) : start_year(start), values(std::move(v)) {
        if (values.empty()) throw InputError("time series must hold at least one value");
        for (double x : values)
            if (!std::isfinite(x)) throw InputError("time series values must be finite");
    }

    std::size_t size() const noexcept { return values.size(); }
    int year(std::size_t i) const noexcept { return start_year + static_cast<int>(i); }
    int end_year() const noexcept { return start_year + static_cast<int>(values.size()) - 1; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> span() const noexcept { return values; }

    /// Value at calendar year `y`; throws when out of range.
    double at_year(int y) const {
        if (y < start_year || y > end_year())
            throw InputError("year " + std::to_string(y) + " outside series range");
        return values[static_cast<std::size_t>(y - start_year)];
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

// ---------------------------------------------------------------------------
// Differencing
// ---------------------------------------------------------------------------

inline TimeSeries difference(const TimeSeries& series, int order) {
    if (order < 0) throw InputError("differencing order must be non-negative");
    if (static_cast<std::size_t>(order) >= series.size())
        throw InputError("differencing order " + std::to_string(order) +
                         " leaves no observations for a series of length " +
                         std::to_string(series.size()));
    std::vector<double> v = series.values;
    for (int k = 0; k < order; ++k) {
        for (std::size_t i = 0; i + 1 < v.size(); ++i) v[i] = v[i + 1] - v[i];
        v.pop_back();
    }
    return TimeSeries(series.start_year + order, std::move(v));
}

/// Inverse of a first difference: prepends `initial` one year earlier and
/// accumulates.
inline TimeSeries cumulative_sum(const TimeSeries& increments, double initial) {
    std::vector<double> v;
    v.reserve(increments.size() + 1);
    v.push_back(initial);
    for (double x : increments.values) v.push_back(v.back() + x);
    return TimeSeries(increments.start_year - 1, std::move(v));
}

// ---------------------------------------------------------------------------
// Information criterion and distribution helpers
// ---------------------------------------------------------------------------

inline double aic(double log_likelihood, int k_params) {
    if (k_params < 0) throw InputError("parameter count must be non-negative");
    return 2.0 * k_params - 2.0 * log_likelihood;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double chi_square_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

// ---------------------------------------------------------------------------
// Autocorrelation
// ---------------------------------------------------------------------------

namespace detail {

/// Mean-centred autocovariances gamma_0..gamma_max_lag (divisor n).
inline std::vector<double> autocovariances(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    std::vector<double> g(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) s += (x[t] - mean) * (x[t - k] - mean);
        g[k] = s / double(n);
    }
    return g;
}

}  // namespace detail

/// Sample autocorrelations rho_0..rho_max_lag; rho_0 = 1.
inline std::vector<double> acf(const TimeSeries& series, std::size_t max_lag) {
    if (2 * max_lag >= series.size())
        throw InputError("acf: max_lag must be below half the series length");
    auto g = detail::autocovariances(series.span(), max_lag);
    if (!(g[0] > 0.0)) throw InputError("acf: series has zero variance");
    std::vector<double> r(max_lag + 1);
    r[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) r[k] = g[k] / g[0];
    return r;
}

/// Partial autocorrelations by the Durbin-Levinson recursion, indexed like
/// acf (element 0 is 1, element 1 equals acf[1]).
inline std::vector<double> pacf(const TimeSeries& series, std::size_t max_lag) {
    auto rho = acf(series, max_lag);
    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;
    if (max_lag == 0) return out;
    std::vector<double> phi{rho[1]};
    out[1] = rho[1];
    for (std::size_t k = 2; k <= max_lag; ++k) {
        double num = rho[k];
        double den = 1.0;
        for (std::size_t j = 1; j < k; ++j) {
            num -= phi[j - 1] * rho[k - j];
            den -= phi[j - 1] * rho[j];
        }
        double pkk = den != 0.0 ? num / den : 0.0;
        std::vector<double> next(k);
        for (std::size_t j = 1; j < k; ++j) next[j - 1] = phi[j - 1] - pkk * phi[k - j - 1];
        next[k - 1] = pkk;
        phi = std::move(next);
        out[k] = pkk;
    }
    return out;
}

struct LjungBoxResult {
    double q = 0.0;
    double p_value = 1.0;
    int df = 0;
};

inline LjungBoxResult ljung_box(const TimeSeries& residuals, std::size_t lags, int fitted_params) {
    if (fitted_params < 0) throw InputError("ljung_box: negative parameter count");
    if (lags <= static_cast<std::size_t>(fitted_params))
        throw InputError("ljung_box: lags must exceed the number of fitted parameters");
    const std::size_t n = residuals.size();
    if (lags >= n) throw InputError("ljung_box: lags must be below the series length");
    LjungBoxResult res;
    res.df = static_cast<int>(lags) - fitted_params;
    auto g = detail::autocovariances(residuals.span(), lags);
    if (!(g[0] > 0.0)) return res;  // zero residuals carry no autocorrelation
    double q = 0.0;
    for (std::size_t k = 1; k <= lags; ++k) {
        double r = g[k] / g[0];
        q += r * r / double(n - k);
    }
    res.q = double(n) * double(n + 2) * q;
    res.p_value = chi_square_sf(res.q, res.df);
    return res;
}

// ---------------------------------------------------------------------------
// Augmented Dickey-Fuller
// ---------------------------------------------------------------------------

enum class AdfRegression { constant, constant_trend };

struct AdfOptions {
    /// Fixed number of lagged differences; empty selects by AIC up to the
    /// Schwert bound.
    std::optional<std::size_t> lags;
    AdfRegression regression = AdfRegression::constant;
};

struct AdfResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    std::size_t lags_used = 0;
    std::size_t nobs = 0;
    bool reject_at_5pct = false;
    double critical_1pct = 0.0;
    double critical_5pct = 0.0;
    double critical_10pct = 0.0;
};

/// floor(12 (n/100)^(1/4)).
inline std::size_t schwert_max_lags(std::size_t n) {
    return static_cast<std::size_t>(std::floor(12.0 * std::pow(double(n) / 100.0, 0.25)));
}

/// MacKinnon (1994) approximate asymptotic p-value for a single-regressor
/// unit-root t statistic: Phi of a polynomial in tau.
inline double mackinnon_p_value(double tau, AdfRegression reg) {
    struct Surface {
        double tau_max, tau_min, tau_star;
        double small[3];
        double large[4];
    };
    static constexpr Surface c{2.74, -18.83, -1.61,
                               {2.1659, 1.4412, 3.8296e-2},
                               {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2}};
    static constexpr Surface ct{0.7, -16.18, -2.89,
                                {3.2512, 1.6047, 4.9588e-2},
                                {2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2}};
    const Surface& s = reg == AdfRegression::constant ? c : ct;
    if (tau > s.tau_max) return 1.0;
    if (tau < s.tau_min) return 0.0;
    double poly;
    if (tau <= s.tau_star)
        poly = s.small[0] + tau * (s.small[1] + tau * s.small[2]);
    else
        poly = s.large[0] + tau * (s.large[1] + tau * (s.large[2] + tau * s.large[3]));
    return normal_cdf(poly);
}

/// MacKinnon (2010) finite-sample critical values at 1%, 5% and 10%.
inline std::array<double, 3> mackinnon_critical_values(std::size_t nobs, AdfRegression reg) {
    static constexpr double c[3][4] = {{-3.43035, -6.5393, -16.786, -79.433},
                                       {-2.86154, -2.8903, -4.234, -40.040},
                                       {-2.56677, -1.5384, -2.809, 0.0}};
    static constexpr double ct[3][4] = {{-3.95877, -9.0531, -28.428, -134.155},
                                        {-3.41049, -4.3904, -9.036, -45.374},
                                        {-3.12705, -2.5856, -3.925, -22.380}};
    const auto& tab = reg == AdfRegression::constant ? c : ct;
    const double inv = 1.0 / double(nobs);
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i)
        out[i] = tab[i][0] + inv * (tab[i][1] + inv * (tab[i][2] + inv * tab[i][3]));
    return out;
}

namespace detail {

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inv;
    double rss = 0.0;
    std::size_t nobs = 0;
    std::size_t ncols = 0;
};

inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    const auto k = x.cols();
    if (qr.rank() < k) throw InputError("degenerate regression: design matrix is rank deficient");
    OlsFit f;
    f.beta = qr.solve(y);
    f.rss = (y - x * f.beta).squaredNorm();
    Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv =
        r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd inv_perm = rinv * rinv.transpose();
    f.xtx_inv = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
    f.nobs = static_cast<std::size_t>(x.rows());
    f.ncols = static_cast<std::size_t>(k);
    return f;
}

/// Builds the ADF design over rows t = first..n-2 of the differenced series:
/// dy[t] ~ y[t] + const (+ trend) + dy[t-1..t-lags].
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> adf_design(std::span<const double> y,
                                                             std::size_t lags, std::size_t first,
                                                             AdfRegression reg) {
    const std::size_t m = y.size() - 1;
    const std::size_t rows = m - first;
    const std::size_t cols = 2 + lags + (reg == AdfRegression::constant_trend ? 1 : 0);
    Eigen::MatrixXd x(rows, cols);
    Eigen::VectorXd target(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = first + r;
        target(r) = y[t + 1] - y[t];
        x(r, 0) = y[t];
        x(r, 1) = 1.0;
        std::size_t c = 2;
        if (reg == AdfRegression::constant_trend) x(r, c++) = double(t + 1);
        for (std::size_t i = 1; i <= lags; ++i) x(r, c++) = y[t + 1 - i] - y[t - i];
    }
    return {std::move(x), std::move(target)};
}

inline double gaussian_loglik(double rss, std::size_t nobs) {
    const double n = double(nobs);
    return -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(rss / n) + 1.0);
}

}  // namespace detail

inline AdfResult adf_test(const TimeSeries& series, const AdfOptions& options = {}) {
    const std::size_t n = series.size();
    const auto y = series.span();
    const std::size_t ntrend = options.regression == AdfRegression::constant ? 1 : 2;

    std::size_t max_lags;
    if (options.lags) {
        max_lags = *options.lags;
    } else {
        max_lags = schwert_max_lags(n);
        const std::size_t half = n / 2;
        const std::size_t cap = half > ntrend + 1 ? half - ntrend - 1 : 0;
        max_lags = std::min(max_lags, cap);
        if (n >= 10) max_lags = std::min(max_lags, n - 10);
    }
    if (n < 10 + max_lags)
        throw InputError("adf_test: series of length " + std::to_string(n) +
                         " is too short for " + std::to_string(max_lags) + " lags");
    const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (constant) throw InputError("adf_test: degenerate input, series is constant");

    std::size_t lags = max_lags;
    if (!options.lags && max_lags > 0) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= max_lags; ++k) {
            auto [x, t] = detail::adf_design(y, k, max_lags, options.regression);
            auto fit = detail::ols(x, t);
            if (!(fit.rss > 0.0)) continue;
            double crit = aic(detail::gaussian_loglik(fit.rss, fit.nobs), int(fit.ncols));
            if (crit < best) {
                best = crit;
                lags = k;
            }
        }
    }

    auto [x, t] = detail::adf_design(y, lags, lags, options.regression);
    if (x.rows() <= x.cols()) throw InputError("adf_test: too few observations for the regression");
    auto fit = detail::ols(x, t);
    const double scale = t.squaredNorm();
    if (!(fit.rss > 1e-24 * std::max(scale, 1e-300)))
        throw InputError("adf_test: degenerate input, regression fits exactly");
    const double s2 = fit.rss / double(fit.nobs - fit.ncols);
    const double se = std::sqrt(s2 * fit.xtx_inv(0, 0));

    AdfResult res;
    res.t_statistic = fit.beta(0) / se;
    res.p_value = mackinnon_p_value(res.t_statistic, options.regression);
    res.lags_used = lags;
    res.nobs = fit.nobs;
    res.reject_at_5pct = res.p_value < 0.05;
    auto cv = mackinnon_critical_values(fit.nobs, options.regression);
    res.critical_1pct = cv[0];
    res.critical_5pct = cv[1];
    res.critical_10pct = cv[2];
    return res;
}

}  // namespace emitcast
