#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emitcast/error.hpp"
#include "emitcast/rng.hpp"

namespace emitcast {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Symmetric scaling v / scale that keeps zero at zero.
struct Normalization {
    double scale = 1.0;

    double normalize(double v) const { return scale > 0.0 ? v / scale : 0.0; }
    double denormalize(double v) const { return v * scale; }

    static Normalization fit(const std::vector<double>& values) {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return {m};
    }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Fully connected net with sigmoid hidden layers and a linear output layer.
/// Every unit computes (sum of weighted inputs) - bias.
struct BpNetwork {
    std::vector<std::size_t> layer_sizes;
    /// weights[l] maps layer l to l+1, row-major [out][in].
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;  // biases[l] belongs to layer l+1
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    Normalization normalization;

    std::size_t layers() const { return layer_sizes.size(); }
    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }

    double& weight(std::size_t l, std::size_t out, std::size_t in) {
        return weights[l][out * layer_sizes[l] + in];
    }
    double weight(std::size_t l, std::size_t out, std::size_t in) const {
        return weights[l][out * layer_sizes[l] + in];
    }

    friend bool operator==(const BpNetwork&, const BpNetwork&) = default;
};

inline BpNetwork init_network(const std::vector<std::size_t>& layer_sizes, double learning_rate,
                              std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw InputError("a network needs input and output layers");
    for (auto s : layer_sizes)
        if (s == 0) throw InputError("layer sizes must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InputError("learning rate must be positive");
    BpNetwork net;
    net.layer_sizes = layer_sizes;
    net.learning_rate = learning_rate;
    net.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        std::vector<double> w(layer_sizes[l] * layer_sizes[l + 1]);
        for (auto& v : w) v = double(rng() >> 11) * 0x1.0p-53 - 0.5;  // U[-0.5, 0.5)
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(layer_sizes[l + 1], 0.0);
    }
    return net;
}

/// Sets every weight and bias to zero; the output is then identically zero.
inline void zero_parameters(BpNetwork& net) {
    for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
}

struct ForwardResult {
    std::vector<double> output;
    /// activations[0] is the input, the last entry the output.
    std::vector<std::vector<double>> activations;
};

inline ForwardResult forward(const BpNetwork& net, const std::vector<double>& x) {
    if (x.size() != net.input_size())
        throw InputError("input has " + std::to_string(x.size()) + " values, network expects " +
                         std::to_string(net.input_size()));
    ForwardResult r;
    r.activations.push_back(x);
    const std::size_t last = net.layers() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        const auto& in = r.activations.back();
        std::vector<double> out(net.layer_sizes[l + 1]);
        for (std::size_t o = 0; o < out.size(); ++o) {
            double z = -net.biases[l][o];
            for (std::size_t i = 0; i < in.size(); ++i) z += net.weight(l, o, i) * in[i];
            out[o] = (l + 1 == last) ? z : sigmoid(z);
        }
        r.activations.push_back(std::move(out));
    }
    r.output = r.activations.back();
    return r;
}

struct UpdateRules {
    /// Apply the learning rate to the output-bias step (otherwise step 1).
    bool scaled_bias_update = false;
    /// Output bias b += e instead of the descent direction b -= e.
    bool literal_output_bias = false;
    /// Hidden bias a += eta H(1-H) (sum_i x_i w_ik) (sum_j e_j), the rule with
    /// the input-side weights in place of the back-propagated error.
    bool literal_hidden_bias = false;
};

/// One stochastic step on 0.5 * sum e^2 with e = target - output. Returns e.
inline std::vector<double> train_step(BpNetwork& net, const std::vector<double>& x,
                                      const std::vector<double>& target,
                                      const UpdateRules& rules = {}) {
    if (target.size() != net.output_size())
        throw InputError("target has " + std::to_string(target.size()) +
                         " values, network outputs " + std::to_string(net.output_size()));
    const auto fw = forward(net, x);
    const std::size_t last = net.layers() - 1;
    std::vector<double> e(target.size());
    for (std::size_t j = 0; j < e.size(); ++j) {
        e[j] = target[j] - fw.output[j];
        if (!std::isfinite(e[j])) throw NumericalError("non-finite training error");
    }
    const double eta = net.learning_rate;
    const double e_sum = std::accumulate(e.begin(), e.end(), 0.0);

    // delta[l] = -d(0.5 e^2)/dz for the units of layer l+1.
    std::vector<std::vector<double>> delta(last);
    delta[last - 1] = e;
    for (std::size_t l = last - 1; l-- > 0;) {
        const auto& h = fw.activations[l + 1];
        delta[l].assign(h.size(), 0.0);
        for (std::size_t k = 0; k < h.size(); ++k) {
            double back = 0.0;
            for (std::size_t j = 0; j < delta[l + 1].size(); ++j)
                back += net.weight(l + 1, j, k) * delta[l + 1][j];
            delta[l][k] = h[k] * (1.0 - h[k]) * back;
        }
    }

    for (std::size_t l = 0; l < last; ++l) {
        const auto& in = fw.activations[l];
        const bool output_layer = l + 1 == last;
        std::vector<double> literal_bias;
        if (!output_layer && rules.literal_hidden_bias) {
            const auto& h = fw.activations[l + 1];
            literal_bias.resize(h.size());
            for (std::size_t k = 0; k < h.size(); ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < in.size(); ++i) s += in[i] * net.weight(l, k, i);
                literal_bias[k] = eta * h[k] * (1.0 - h[k]) * s * e_sum;
            }
        }
        for (std::size_t o = 0; o < delta[l].size(); ++o) {
            for (std::size_t i = 0; i < in.size(); ++i) net.weight(l, o, i) += eta * delta[l][o] * in[i];
            if (output_layer) {
                const double step = rules.scaled_bias_update ? eta * e[o] : e[o];
                net.biases[l][o] += rules.literal_output_bias ? step : -step;
            } else if (rules.literal_hidden_bias) {
                net.biases[l][o] += literal_bias[o];
            } else {
                net.biases[l][o] -= eta * delta[l][o];
            }
        }
    }
    for (const auto& layer : net.weights)
        for (double v : layer)
            if (!std::isfinite(v)) throw NumericalError("non-finite weight after training step");
    return e;
}

struct Sample {
    std::vector<double> x;
    std::vector<double> y;
};

struct TrainOptions {
    std::size_t max_epochs = 5000;
    /// Non-finite or non-positive disables early stopping.
    double target_mse = 1e-6;
    UpdateRules rules;
    std::uint64_t shuffle_seed = 0;
};

struct TrainResult {
    std::vector<double> history;  // MSE after each epoch
    std::size_t epochs = 0;
    bool reached_target = false;
};

/// Raised when training diverges; carries the per-epoch MSE so far.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, std::vector<double> history)
        : NumericalError(what), history(std::move(history)) {}
    std::vector<double> history;
};

inline double dataset_mse(const BpNetwork& net, const std::vector<Sample>& data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : data) {
        const auto out = forward(net, s.x).output;
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double e = s.y[j] - out[j];
            sum += e * e;
            ++count;
        }
    }
    return sum / double(count);
}

inline TrainResult train(BpNetwork& net, const std::vector<Sample>& data, const TrainOptions& options) {
    if (data.empty()) throw InputError("training set is empty");
    const bool early_stop = std::isfinite(options.target_mse) && options.target_mse > 0.0;
    Rng rng(options.shuffle_seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainResult r;
    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        // Fisher-Yates with an explicit draw, independent of the library's shuffle.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        try {
            for (auto idx : order) train_step(net, data[idx].x, data[idx].y, options.rules);
        } catch (const NumericalError& err) {
            throw TrainingDiverged(std::string(err.what()) + " in epoch " + std::to_string(epoch + 1),
                                   r.history);
        }
        const double mse = dataset_mse(net, data);
        r.history.push_back(mse);
        r.epochs = epoch + 1;
        if (!std::isfinite(mse) || mse > 1e12) {
            std::ostringstream os;
            os << "training diverged in epoch " << r.epochs << " (MSE " << mse << ")";
            throw TrainingDiverged(os.str(), r.history);
        }
        if (early_stop && mse <= options.target_mse) {
            r.reached_target = true;
            break;
        }
    }
    return r;
}

struct MetricReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double mape = 0.0;  // percent
    double r2 = 0.0;
    std::size_t mape_skipped = 0;
};

inline MetricReport evaluate(const std::vector<double>& predictions, const std::vector<double>& truths) {
    if (predictions.size() != truths.size() || truths.empty())
        throw InputError("predictions and truths must have equal, nonzero length");
    const double n = double(truths.size());
    MetricReport m;
    double ss_res = 0.0, mean = 0.0, ape = 0.0;
    std::size_t ape_count = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const double e = truths[i] - predictions[i];
        ss_res += e * e;
        m.mae += std::abs(e);
        mean += truths[i];
        if (truths[i] != 0.0) {
            ape += std::abs(e / truths[i]);
            ++ape_count;
        } else {
            ++m.mape_skipped;
        }
    }
    if (ape_count == 0) throw InputError("MAPE undefined: every truth is zero");
    mean /= n;
    double ss_tot = 0.0;
    for (double t : truths) ss_tot += (t - mean) * (t - mean);
    m.rmse = std::sqrt(ss_res / n);
    m.mse = m.rmse * m.rmse;
    m.mae /= n;
    m.mape = 100.0 * ape / double(ape_count);
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return m;
}

inline nlohmann::ordered_json to_json(const MetricReport& m) {
    nlohmann::ordered_json j;
    j["mse"] = m.mse;
    j["rmse"] = m.rmse;
    j["mae"] = m.mae;
    j["mape"] = m.mape;
    j["r2"] = m.r2;
    j["mape_skipped"] = m.mape_skipped;
    return j;
}

inline nlohmann::ordered_json to_json(const BpNetwork& net) {
    nlohmann::ordered_json j;
    j["layer_sizes"] = net.layer_sizes;
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    j["learning_rate"] = net.learning_rate;
    j["normalization"] = {{"scale", net.normalization.scale}};
    j["seed"] = net.seed;
    return j;
}

inline BpNetwork network_from_json(const nlohmann::json& j) {
    try {
        BpNetwork net;
        net.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        net.learning_rate = j.at("learning_rate").get<double>();
        net.normalization.scale = j.at("normalization").at("scale").get<double>();
        net.seed = j.at("seed").get<std::uint64_t>();
        if (net.layer_sizes.size() < 2 || net.weights.size() + 1 != net.layer_sizes.size() ||
            net.biases.size() != net.weights.size())
            throw InputError("checkpoint layer count mismatch");
        for (std::size_t l = 0; l < net.weights.size(); ++l)
            if (net.weights[l].size() != net.layer_sizes[l] * net.layer_sizes[l + 1] ||
                net.biases[l].size() != net.layer_sizes[l + 1])
                throw InputError("checkpoint shape mismatch in layer " + std::to_string(l));
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed network checkpoint: ") + e.what());
    }
}

}  // namespace emitcast
