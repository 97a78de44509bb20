#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emitcast/arima.hpp"
#include "emitcast/bpnet.hpp"
#include "emitcast/dataio.hpp"
#include "emitcast/error.hpp"
#include "emitcast/rng.hpp"
#include "emitcast/tsa.hpp"

namespace emitcast {

inline constexpr int kMaxForecastHorizon = 50;

struct HybridConfig {
    double train_fraction = 0.70;
    int max_p = 3;
    int max_d = 2;
    int max_q = 3;
    bool order_fallback = true;
    /// Skips order selection when set.
    std::optional<ArimaOrder> order;
    BpConfig bp;
    UpdateRules rules;
    /// Replace the trained network by one with all parameters zero.
    bool zero_network = false;
    std::uint64_t seed = 0;

    static HybridConfig from(const RunConfig& c, std::uint64_t series_seed) {
        HybridConfig h;
        h.train_fraction = c.train_fraction;
        h.max_p = c.arima_max_p;
        h.max_d = c.arima_max_d;
        h.max_q = c.arima_max_q;
        h.order_fallback = c.arima_order_fallback;
        h.bp = c.bp;
        h.rules.scaled_bias_update = c.bp.scaled_bias_update;
        h.seed = series_seed;
        return h;
    }
};

enum class Segment { warmup, train, test, forecast };

inline std::string_view to_string(Segment s) {
    switch (s) {
        case Segment::warmup: return "warmup";
        case Segment::train: return "train";
        case Segment::test: return "test";
        case Segment::forecast: return "forecast";
    }
    return "?";
}

struct HybridRow {
    int year = 0;
    double base = 0.0;
    double correction = 0.0;
    double combined = 0.0;
    Segment segment = Segment::warmup;
};

namespace detail {

[[noreturn]] inline void rethrow_in_stage(const std::string& stage, const Error& e) {
    const std::string msg = stage + ": " + e.what();
    switch (e.kind()) {
        case ErrorKind::Input: throw InputError(msg);
        case ErrorKind::Numerical: throw NumericalError(msg);
        case ErrorKind::Invariant: throw InvariantError(msg);
        case ErrorKind::Io: throw IoError(msg);
    }
    throw Error(e.kind(), msg);
}

}  // namespace detail

/// ARIMA trend plus a BP network that predicts the ARIMA level error from the
/// previous `window` errors.
class HybridForecaster {
public:
    const TimeSeries& series() const { return series_; }
    const ArimaModel& model() const { return model_; }
    const BpNetwork& network() const { return net_; }
    const TrainResult& training() const { return training_; }
    std::size_t train_size() const { return n_train_; }
    std::size_t window() const { return window_; }
    bool order_fallback() const { return fallback_; }
    std::uint64_t seed() const { return seed_; }
    /// Level errors of the ARIMA fit used as BP data (conditioning values excluded).
    const TimeSeries& train_errors() const { return errors_; }

    static HybridForecaster build(const TimeSeries& series, const HybridConfig& cfg) {
        HybridForecaster f;
        f.series_ = series;
        f.window_ = cfg.bp.input_width;
        f.seed_ = cfg.seed;
        f.rules_ = cfg.rules;
        const std::size_t n = series.size();
        if (n < f.window_ + 10)
            throw InputError("split: series of " + std::to_string(n) + " years is shorter than window + 10");
        f.n_train_ = static_cast<std::size_t>(std::floor(cfg.train_fraction * double(n) + 1e-9));
        if (f.n_train_ >= n || f.n_train_ == 0)
            throw InputError("split: train fraction leaves an empty segment");
        const TimeSeries train(series.start_year,
                               std::vector<double>(series.values.begin(),
                                                   series.values.begin() + std::ptrdiff_t(f.n_train_)));
        try {
            if (cfg.order) {
                f.model_ = fit(train, *cfg.order);
            } else {
                auto sel = select_order(train, cfg.max_p, cfg.max_d, cfg.max_q, cfg.order_fallback);
                f.model_ = std::move(sel.model);
                f.fallback_ = sel.fallback;
            }
        } catch (const Error& e) {
            detail::rethrow_in_stage("arima", e);
        }

        const auto res = in_sample_residuals(f.model_);
        const std::size_t skip = res.conditioned;
        f.errors_ = TimeSeries(res.level_errors.start_year + int(skip),
                               std::vector<double>(res.level_errors.values.begin() + std::ptrdiff_t(skip),
                                                   res.level_errors.values.end()));
        const auto& errs = f.errors_.values;
        if (errs.size() <= f.window_)
            throw InputError("bp: " + std::to_string(errs.size()) +
                             " training errors leave no window of width " + std::to_string(f.window_));

        try {
            std::vector<std::size_t> sizes{f.window_};
            sizes.insert(sizes.end(), cfg.bp.hidden.begin(), cfg.bp.hidden.end());
            sizes.push_back(1);
            f.net_ = init_network(sizes, cfg.bp.learning_rate, substream_seed(cfg.seed, "bp-init"));
            f.net_.normalization = Normalization::fit(errs);
            if (cfg.zero_network) {
                zero_parameters(f.net_);
            } else {
                const auto& norm = f.net_.normalization;
                std::vector<Sample> data;
                for (std::size_t t = f.window_; t < errs.size(); ++t) {
                    Sample s;
                    for (std::size_t k = t - f.window_; k < t; ++k) s.x.push_back(norm.normalize(errs[k]));
                    s.y.push_back(norm.normalize(errs[t]));
                    data.push_back(std::move(s));
                }
                TrainOptions opt;
                opt.max_epochs = cfg.bp.max_epochs;
                opt.target_mse = cfg.bp.target_mse;
                opt.rules = cfg.rules;
                opt.shuffle_seed = substream_seed(cfg.seed, "bp-shuffle");
                f.training_ = emitcast::train(f.net_, data, opt);
            }
        } catch (const Error& e) {
            detail::rethrow_in_stage("bp", e);
        }
        return f;
    }

    /// Rows from the first observed year through `end_year` (at least the
    /// last observed year).
    std::vector<HybridRow> rows(int end_year) const {
        if (end_year < series_.end_year()) end_year = series_.end_year();
        check_horizon(end_year - series_.end_year());
        std::vector<HybridRow> out = in_sample_rows();
        auto tail = recursive_rows(std::size_t(end_year - series_.end_year()));
        out.insert(out.end(), tail.begin(), tail.end());
        return out;
    }

    /// Combined forecast for the years after the last observation.
    TimeSeries forecast_to(int end_year) const {
        const int h = end_year - series_.end_year();
        if (h <= 0)
            throw InputError("nothing to forecast: " + std::to_string(end_year) +
                             " is not after the last observed year " +
                             std::to_string(series_.end_year()));
        check_horizon(h);
        const auto tail = recursive_rows(std::size_t(h));
        std::vector<double> v;
        for (const auto& r : tail)
            if (r.segment == Segment::forecast) v.push_back(r.combined);
        return TimeSeries(series_.end_year() + 1, std::move(v));
    }

    struct SplitMetrics {
        MetricReport train;
        MetricReport test;
        /// ARIMA alone on the test segment, for comparison.
        MetricReport test_base;
    };

    SplitMetrics evaluate_split() const {
        const auto all = rows(series_.end_year());
        std::vector<double> tr_pred, tr_true, te_pred, te_base, te_true;
        for (const auto& r : all) {
            const double obs = series_.at_year(r.year);
            if (r.segment == Segment::train) {
                tr_pred.push_back(r.combined);
                tr_true.push_back(obs);
            } else if (r.segment == Segment::test) {
                te_pred.push_back(r.combined);
                te_base.push_back(r.base);
                te_true.push_back(obs);
            }
        }
        if (te_true.empty()) throw InputError("empty test segment");
        if (tr_true.empty()) throw InputError("empty training segment");
        return {evaluate(tr_pred, tr_true), evaluate(te_pred, te_true), evaluate(te_base, te_true)};
    }

private:
    static void check_horizon(int h) {
        if (h > kMaxForecastHorizon)
            throw InputError("forecast horizon of " + std::to_string(h) + " years exceeds the " +
                             std::to_string(kMaxForecastHorizon) + "-year extrapolation limit");
    }

    double predict_correction(const std::vector<double>& window_norm) const {
        return net_.normalization.denormalize(forward(net_, window_norm).output[0]);
    }

    std::vector<HybridRow> in_sample_rows() const {
        std::vector<HybridRow> out;
        const auto& errs = errors_.values;
        const auto& norm = net_.normalization;
        for (std::size_t i = 0; i < n_train_; ++i) {
            const int year = series_.year(i);
            HybridRow r;
            r.year = year;
            const int k = year - errors_.start_year;  // index into errs
            if (k < 0) {
                // differencing or conditioning leaves no fitted value
                const int rk = year - model_.residuals.start_year;
                r.base = series_[i] - (rk >= 0 ? model_.residuals[std::size_t(rk)] : 0.0);
                r.combined = r.base;
                r.segment = Segment::warmup;
            } else {
                r.base = series_[i] - errs[std::size_t(k)];
                if (std::size_t(k) < window_) {
                    r.combined = r.base;
                    r.segment = Segment::warmup;
                } else {
                    std::vector<double> w;
                    for (std::size_t j = std::size_t(k) - window_; j < std::size_t(k); ++j)
                        w.push_back(norm.normalize(errs[j]));
                    r.combined = r.base + predict_correction(w);
                    r.correction = r.combined - r.base;
                    r.segment = Segment::train;
                }
            }
            out.push_back(r);
        }
        return out;
    }

    /// Test rows followed by `future` forecast rows, all from one ARIMA
    /// forecast chain started at the end of the training segment.
    std::vector<HybridRow> recursive_rows(std::size_t future) const {
        const std::size_t n_test = series_.size() - n_train_;
        const TimeSeries base = forecast(model_, n_test + future);
        const auto& norm = net_.normalization;
        std::vector<double> window;
        for (std::size_t j = errors_.size() - window_; j < errors_.size(); ++j)
            window.push_back(norm.normalize(errors_[j]));
        std::vector<HybridRow> out;
        for (std::size_t h = 0; h < base.size(); ++h) {
            HybridRow r;
            r.year = base.year(h);
            r.base = base[h];
            r.combined = r.base + predict_correction(window);
            r.correction = r.combined - r.base;
            r.segment = h < n_test ? Segment::test : Segment::forecast;
            window.erase(window.begin());
            window.push_back(norm.normalize(r.correction));
            out.push_back(r);
        }
        return out;
    }

    TimeSeries series_;
    std::size_t n_train_ = 0;
    std::size_t window_ = 4;
    std::uint64_t seed_ = 0;
    UpdateRules rules_;
    bool fallback_ = false;
    ArimaModel model_;
    TimeSeries errors_;
    BpNetwork net_;
    TrainResult training_;
};

inline Table to_table(const std::vector<HybridRow>& rows) {
    Table t;
    t.columns = {"year", "base", "correction", "combined", "segment"};
    for (const auto& r : rows)
        t.rows.push_back({std::int64_t{r.year}, r.base, r.correction, r.combined,
                          std::string(to_string(r.segment))});
    return t;
}

inline nlohmann::ordered_json manifest_entry(const HybridForecaster& f) {
    nlohmann::ordered_json j;
    const auto& o = f.model().order;
    j["order"] = {o.p, o.d, o.q};
    j["order_fallback"] = f.order_fallback();
    j["seed"] = f.seed();
    const auto m = f.evaluate_split();
    j["metrics"] = {{"train", to_json(m.train)}, {"test", to_json(m.test)},
                    {"test_arima_only", to_json(m.test_base)}};
    j["bp_epochs"] = f.training().epochs;
    if (!f.model().warnings.empty()) j["warnings"] = f.model().warnings;
    return j;
}

}  // namespace emitcast
