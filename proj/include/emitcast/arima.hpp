#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "emitcast/error.hpp"
#include "emitcast/tsa.hpp"

namespace emitcast {

struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;

    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;

    std::string str() const {
        std::ostringstream os;
        os << '(' << p << ',' << d << ',' << q << ')';
        return os.str();
    }
};

/// y_t = mu + sum gamma_i y_{t-i} + e_t + sum theta_j e_{t-j} on the d-times
/// differenced series, estimated by conditional sum of squares.
struct ArimaModel {
    ArimaOrder order;
    double mu = 0.0;
    std::vector<double> ar;  // gamma_1..gamma_p
    std::vector<double> ma;  // theta_1..theta_q
    double sigma2 = 0.0;
    double log_likelihood = 0.0;
    double aic = 0.0;
    int n_params = 0;
    /// Innovations on the differenced scale; the first p are conditioning
    /// values fixed at zero.
    TimeSeries residuals;
    TimeSeries training;
    int iterations = 0;
    std::vector<std::string> warnings;
};

struct FitOptions {
    int max_iterations = 500;
    double tolerance = 1e-8;
    /// Leading differenced values left out of the sum of squares (at least p).
    /// Order selection sets this to the largest p so that every candidate is
    /// scored on the same observations.
    std::size_t conditioning = 0;
};

namespace detail {

/// Maps unconstrained values to coefficients of a polynomial 1 - sum c_i z^i
/// whose roots lie outside the unit circle: tanh gives partial
/// autocorrelations, Durbin-Levinson turns them into coefficients.
inline std::vector<double> constrained_coefficients(std::span<const double> raw) {
    std::vector<double> c;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const double r = std::tanh(raw[k]);
        std::vector<double> next(k + 1);
        for (std::size_t j = 0; j < k; ++j) next[j] = c[j] - r * c[k - 1 - j];
        next[k] = r;
        c = std::move(next);
    }
    return c;
}

/// Largest modulus among the inverse roots of 1 - sum c_i z^i (the companion
/// eigenvalues). Below one means every root lies outside the unit circle.
inline double max_inverse_root(std::span<const double> c) {
    std::size_t k = c.size();
    while (k > 0 && c[k - 1] == 0.0) --k;
    if (k == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < k; ++i) companion(0, i) = c[i];
    for (std::size_t i = 1; i < k; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// CSS innovations; the first p entries are conditioned to zero.
inline std::vector<double> css_residuals(std::span<const double> w, double mu,
                                         std::span<const double> ar,
                                         std::span<const double> ma) {
    const std::size_t m = w.size();
    const std::size_t p = ar.size();
    const std::size_t q = ma.size();
    std::vector<double> e(m, 0.0);
    for (std::size_t t = p; t < m; ++t) {
        double v = w[t] - mu;
        for (std::size_t i = 1; i <= p; ++i) v -= ar[i - 1] * w[t - i];
        for (std::size_t j = 1; j <= q && j <= t; ++j) v -= ma[j - 1] * e[t - j];
        e[t] = v;
    }
    return e;
}

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// BFGS with central-difference gradients and Armijo backtracking. Stops when
/// the objective changes by less than `tolerance` between iterations.
inline MinimizeResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                                    Eigen::VectorXd x, int max_iterations, double tolerance) {
    const auto n = x.size();
    auto gradient = [&](const Eigen::VectorXd& at) {
        Eigen::VectorXd g(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(at(i)));
            Eigen::VectorXd a = at, b = at;
            a(i) += h;
            b(i) -= h;
            g(i) = (f(a) - f(b)) / (2.0 * h);
        }
        return g;
    };
    MinimizeResult res;
    double fx = f(x);
    Eigen::VectorXd g = gradient(x);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
    for (int it = 1; it <= max_iterations; ++it) {
        res.iterations = it;
        if (g.norm() < 1e-10) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -h_inv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            h_inv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        double f_new = fx;
        Eigen::VectorXd x_new = x;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            x_new = x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent along the search direction: at a numerical optimum.
            res.converged = true;
            break;
        }
        Eigen::VectorXd g_new = gradient(x_new);
        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double change = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (sy > 1e-14) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
            h_inv = (id - rho * s * y.transpose()) * h_inv * (id - rho * y * s.transpose()) +
                    rho * s * s.transpose();
        }
        if (std::abs(change) < tolerance) {
            res.converged = true;
            break;
        }
    }
    res.x = x;
    res.value = fx;
    return res;
}

/// Pulls every root of 1 - sum c_i z^i to modulus >= 1/0.999 by scaling
/// c_i by rho^i. Returns false when no change was needed.
inline bool project_outside_unit_circle(std::vector<double>& c) {
    const double m = max_inverse_root(c);
    if (m < 1.0 - 1e-9) return false;
    const double rho = 0.999 / m;
    double scale = 1.0;
    for (auto& v : c) {
        scale *= rho;
        v *= scale;
    }
    return true;
}

inline void finish_model(ArimaModel& model, std::span<const double> w, std::size_t conditioning) {
    const auto p = std::max(static_cast<std::size_t>(model.order.p), conditioning);
    auto e = css_residuals(w, model.mu, model.ar, model.ma);
    double ss = 0.0;
    for (std::size_t t = p; t < e.size(); ++t) ss += e[t] * e[t];
    const double n_eff = double(w.size() - p);
    model.sigma2 = std::max(ss / n_eff, std::numeric_limits<double>::min());
    model.log_likelihood = -0.5 * n_eff * (std::log(2.0 * std::numbers::pi * model.sigma2) + 1.0);
    model.n_params = model.order.p + model.order.q + 2;  // + mu and sigma2
    model.aic = aic(model.log_likelihood, model.n_params);
    model.residuals = TimeSeries(model.training.start_year + model.order.d, std::move(e));
}

}  // namespace detail

inline ArimaModel fit(const TimeSeries& series, ArimaOrder order, const FitOptions& options = {}) {
    if (order.p < 0 || order.d < 0 || order.q < 0)
        throw InputError("ARIMA orders must be non-negative");
    const auto need = static_cast<std::size_t>(order.d + std::max(order.p, order.q) + 10);
    if (series.size() < need)
        throw InputError("ARIMA" + order.str() + " needs at least " + std::to_string(need) +
                         " observations, got " + std::to_string(series.size()));
    const TimeSeries diffed = difference(series, order.d);
    const auto w = diffed.span();
    const std::size_t m = w.size();

    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= double(m);
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= double(m);
    const double scale = var > 0.0 ? std::sqrt(var) : (mean != 0.0 ? std::abs(mean) : 1.0);

    ArimaModel model;
    model.order = order;
    model.training = series;

    const auto p = static_cast<std::size_t>(order.p);
    const auto q = static_cast<std::size_t>(order.q);
    const std::size_t cond = std::max(p, options.conditioning);
    if (cond + 10 > m) throw InputError("conditioning leaves too few observations");
    if (p == 0 && q == 0 && cond == 0) {
        model.mu = mean;
        detail::finish_model(model, w, cond);
        return model;
    }

    auto unpack = [&](const Eigen::VectorXd& x, double& mu, std::vector<double>& ar,
                      std::vector<double>& ma) {
        mu = mean + scale * x(0);
        std::vector<double> raw_ar(x.data() + 1, x.data() + 1 + p);
        std::vector<double> raw_ma(x.data() + 1 + p, x.data() + 1 + p + q);
        ar = detail::constrained_coefficients(raw_ar);
        ma = detail::constrained_coefficients(raw_ma);
        for (auto& v : ma) v = -v;  // 1 + sum theta z^j == 1 - sum c z^j
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        double mu;
        std::vector<double> ar, ma;
        unpack(x, mu, ar, ma);
        auto e = detail::css_residuals(w, mu, ar, ma);
        double ss = 0.0;
        for (std::size_t t = cond; t < m; ++t) ss += e[t] * e[t];
        return ss / (double(m - cond) * scale * scale);
    };

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(1 + p + q));
    auto res = detail::minimize_bfgs(objective, x0, options.max_iterations, options.tolerance);
    if (!res.converged) {
        std::ostringstream os;
        os << "ARIMA" << order.str() << " CSS estimation did not converge after "
           << res.iterations << " iterations (best normalised objective " << res.value << ")";
        throw NumericalError(os.str());
    }
    unpack(res.x, model.mu, model.ar, model.ma);
    model.iterations = res.iterations;

    std::vector<double> neg_ma(model.ma.size());
    for (std::size_t j = 0; j < neg_ma.size(); ++j) neg_ma[j] = -model.ma[j];
    if (detail::project_outside_unit_circle(model.ar))
        model.warnings.push_back("AR polynomial projected back to stationarity");
    if (detail::project_outside_unit_circle(neg_ma)) {
        for (std::size_t j = 0; j < neg_ma.size(); ++j) model.ma[j] = -neg_ma[j];
        model.warnings.push_back("MA polynomial projected back to invertibility");
    }
    detail::finish_model(model, w, cond);
    return model;
}

/// Conditional-expectation forecasts for the h years after the training
/// series, integrated back to levels.
inline TimeSeries forecast(const ArimaModel& model, std::size_t horizon) {
    if (horizon == 0) throw InputError("forecast horizon must be at least 1");
    const int d = model.order.d;
    const TimeSeries diffed = difference(model.training, d);
    std::vector<double> w = diffed.values;
    std::vector<double> e = model.residuals.values;
    const std::size_t m = w.size();
    const auto p = static_cast<std::size_t>(model.order.p);
    const auto q = static_cast<std::size_t>(model.order.q);

    // Last value of each differencing level 0..d-1.
    std::vector<double> last(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) last[static_cast<std::size_t>(l)] = difference(model.training, l).values.back();

    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        const std::size_t t = m + k;
        double v = model.mu;
        for (std::size_t i = 1; i <= p; ++i) v += model.ar[i - 1] * w[t - i];
        for (std::size_t j = 1; j <= q; ++j)
            if (t - j < m) v += model.ma[j - 1] * e[t - j];
        w.push_back(v);
        double level = v;
        for (int l = d - 1; l >= 0; --l) {
            auto& slot = last[static_cast<std::size_t>(l)];
            slot += level;
            level = slot;
        }
        out.push_back(level);
    }
    return TimeSeries(model.training.end_year() + 1, std::move(out));
}

struct InSampleResiduals {
    /// Innovations on the differenced scale.
    TimeSeries innovations;
    /// Observed level minus one-step-ahead level forecast. For ARIMA the two
    /// coincide numerically; they differ only in meaning.
    TimeSeries level_errors;
    TimeSeries fitted_levels;
    /// Leading entries that are conditioning values, not estimates.
    std::size_t conditioned = 0;
};

inline InSampleResiduals in_sample_residuals(const ArimaModel& model) {
    InSampleResiduals out;
    out.innovations = model.residuals;
    out.level_errors = model.residuals;
    std::vector<double> fitted(model.residuals.size());
    for (std::size_t i = 0; i < fitted.size(); ++i)
        fitted[i] = model.training.at_year(model.residuals.year(i)) - model.residuals[i];
    out.fitted_levels = TimeSeries(model.residuals.start_year, std::move(fitted));
    out.conditioned = static_cast<std::size_t>(model.order.p);
    return out;
}

/// Ljung-Box on the estimated (non-conditioned) innovations.
inline LjungBoxResult residual_diagnostic(const ArimaModel& model) {
    const auto skip = static_cast<std::size_t>(model.order.p);
    std::vector<double> e(model.residuals.values.begin() + static_cast<std::ptrdiff_t>(skip),
                          model.residuals.values.end());
    const int fitted = model.order.p + model.order.q;
    std::size_t lags = std::max<std::size_t>(static_cast<std::size_t>(fitted) + 1,
                                             std::min<std::size_t>(10, e.size() / 4));
    if (lags >= e.size()) return {};
    return ljung_box(TimeSeries(model.residuals.start_year + int(skip), std::move(e)), lags, fitted);
}

struct OrderSelection {
    ArimaOrder order;
    ArimaModel model;
    std::vector<AdfResult> adf;  // one entry per differencing order tried
    std::vector<std::pair<ArimaOrder, double>> aic_table;
    /// Set when no d passed the ADF test and d fell back to max_d.
    bool fallback = false;
    /// Candidates dropped because an AR or MA root came within 1% of the
    /// unit circle.
    std::vector<ArimaOrder> rejected;
};

namespace detail {

inline constexpr double kMinRootModulus = 1.01;

/// CSS happily fits a unit-modulus MA root (or a near-unit AR root
/// cancelling one) to noise; such fits are not admissible candidates.
inline bool roots_clear_of_unit_circle(const ArimaModel& m) {
    std::vector<double> neg_ma(m.ma.size());
    for (std::size_t j = 0; j < neg_ma.size(); ++j) neg_ma[j] = -m.ma[j];
    return max_inverse_root(m.ar) < 1.0 / kMinRootModulus &&
           max_inverse_root(neg_ma) < 1.0 / kMinRootModulus;
}

}  // namespace detail

/// Smallest d in 0..max_d whose differenced series rejects a unit root at 5%,
/// then (p, q) minimising AIC; ties go to smaller p+q, then smaller q.
/// Candidates with a root modulus below 1.01 are skipped.
inline OrderSelection select_order(const TimeSeries& series, int max_p, int max_d, int max_q,
                                   bool fallback_to_max_d = false) {
    if (max_p < 0 || max_p > 3 || max_q < 0 || max_q > 3 || max_d < 0 || max_d > 2)
        throw InputError("order bounds must satisfy p, q <= 3 and d <= 2");
    OrderSelection sel;
    std::optional<int> chosen_d;
    for (int d = 0; d <= max_d && !chosen_d; ++d) {
        if (static_cast<std::size_t>(d) + 10 > series.size()) break;
        const TimeSeries diffed = difference(series, d);
        const auto& v = diffed.values;
        if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) {
            chosen_d = d;  // a constant is trivially stationary
            break;
        }
        try {
            auto adf = adf_test(diffed);
            sel.adf.push_back(adf);
            if (adf.reject_at_5pct) chosen_d = d;
        } catch (const InputError&) {
            // too short or an exact-fit regression: no evidence of stationarity
        }
    }
    if (!chosen_d) {
        if (!fallback_to_max_d)
            throw InputError("no differencing order up to d=" + std::to_string(max_d) +
                             " passes the ADF test; specify the ARIMA order manually");
        chosen_d = max_d;
        sel.fallback = true;
    }
    const int d = *chosen_d;
    const bool small = series.size() < 15;

    struct Candidate {
        int p, q;
    };
    std::vector<Candidate> grid;
    for (int p = 0; p <= max_p; ++p)
        for (int q = 0; q <= max_q; ++q) grid.push_back({p, q});
    std::stable_sort(grid.begin(), grid.end(), [](const Candidate& a, const Candidate& b) {
        if (a.p + a.q != b.p + b.q) return a.p + a.q < b.p + b.q;
        return a.q < b.q;
    });

    // Score every candidate on the same observations: condition on the
    // largest AR order that still leaves ten values.
    const std::size_t m_len = series.size() > std::size_t(d) ? series.size() - std::size_t(d) : 0;
    FitOptions scoring;
    scoring.conditioning = std::min<std::size_t>(std::size_t(max_p), m_len >= 10 ? m_len - 10 : 0);

    std::optional<ArimaModel> best;
    for (const auto& c : grid) {
        if (small && c.p + c.q > 1) continue;
        const auto need = static_cast<std::size_t>(d + std::max(c.p, c.q) + 10);
        if (series.size() < need) continue;
        try {
            ArimaModel m = fit(series, {c.p, d, c.q}, scoring);
            sel.aic_table.emplace_back(m.order, m.aic);
            if (!detail::roots_clear_of_unit_circle(m)) {
                sel.rejected.push_back(m.order);
                continue;
            }
            const double margin = 1e-12 * (1.0 + (best ? std::abs(best->aic) : 0.0));
            if (!best || m.aic < best->aic - margin) best = std::move(m);
        } catch (const NumericalError&) {
        }
    }
    if (!best) throw NumericalError("no admissible candidate ARIMA model could be fitted");
    sel.order = best->order;
    sel.model = scoring.conditioning == 0 ? std::move(*best) : fit(series, sel.order);
    return sel;
}

inline nlohmann::ordered_json model_summary(const ArimaModel& model) {
    nlohmann::ordered_json j;
    j["order"] = {model.order.p, model.order.d, model.order.q};
    j["mu"] = model.mu;
    j["ar"] = model.ar;
    j["ma"] = model.ma;
    j["sigma2"] = model.sigma2;
    j["log_likelihood"] = model.log_likelihood;
    j["aic"] = model.aic;
    j["ljung_box_p"] = residual_diagnostic(model).p_value;
    if (!model.warnings.empty()) j["warnings"] = model.warnings;
    return j;
}

}  // namespace emitcast
