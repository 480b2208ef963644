#include "streamx/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "streamx/errors.hpp"

namespace streamx {
namespace {

std::uint64_t next_network_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

inline double activate(Activation act, double v) {
    if (act == Activation::LeakyReLU) return v > 0.0 ? v : kLeakySlope * v;
    return v;
}

inline double activate_slope(Activation act, double v) {
    if (act == Activation::LeakyReLU) return v > 0.0 ? 1.0 : kLeakySlope;
    return 1.0;
}

// Normalizes `a` in place and returns 1/sqrt(var + eps).
double normalize_in_place(std::span<double> a, double eps) {
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (double& v : a) v = (v - mean) * inv_std;
    return inv_std;
}

}  // namespace

Network::Network(std::vector<LayerSpec> layers, double epsilon_ln)
    : layers_(std::move(layers)), epsilon_ln_(epsilon_ln), id_(next_network_id()) {
    if (layers_.empty()) throw std::invalid_argument("Network: at least one layer required");
    if (!(epsilon_ln_ > 0.0)) throw std::invalid_argument("Network: epsilon_ln must be positive");
    std::size_t total = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& spec = layers_[l];
        if (spec.input_width == 0 || spec.output_width == 0) {
            throw std::invalid_argument("Network: layer widths must be >= 1");
        }
        if (l > 0 && spec.input_width != layers_[l - 1].output_width) {
            throw DimensionError("Network: layer " + std::to_string(l) + " input width does not match previous output");
        }
        offsets_.push_back(total);
        total += spec.param_count();
    }
    const auto& last = layers_.back();
    if (last.activation != Activation::Identity || last.has_layernorm) {
        throw std::invalid_argument("Network: final layer must be Identity without layernorm");
    }
    params_.assign(total, 0.0);
}

Network Network::mlp(std::size_t input_width, const std::vector<std::size_t>& hidden, std::size_t output_width,
                     bool layernorm) {
    std::vector<LayerSpec> specs;
    std::size_t in = input_width;
    for (std::size_t width : hidden) {
        specs.push_back({in, width, layernorm, Activation::LeakyReLU});
        in = width;
    }
    specs.push_back({in, output_width, false, Activation::Identity});
    return Network(std::move(specs));
}

Network::Network(const Network& other)
    : layers_(other.layers_),
      offsets_(other.offsets_),
      params_(other.params_),
      epsilon_ln_(other.epsilon_ln_),
      id_(next_network_id()) {}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        layers_ = other.layers_;
        offsets_ = other.offsets_;
        params_ = other.params_;
        epsilon_ln_ = other.epsilon_ln_;
        ++generation_;
    }
    return *this;
}

std::span<double> Network::mutable_params() {
    ++generation_;
    return params_;
}

void Network::set_params(std::span<const double> values) {
    require_dims(values.size(), params_.size(), "Network::set_params");
    std::copy(values.begin(), values.end(), params_.begin());
    ++generation_;
}

std::vector<double> Network::forward(std::span<const double> x, Tape& tape) const {
    require_dims(x.size(), input_width(), "Network::forward");
    tape.network_id_ = id_;
    tape.generation_ = generation_;
    tape.layers_.resize(layers_.size());

    std::vector<double> h(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& spec = layers_[l];
        auto& rec = tape.layers_[l];
        const double* w = params_.data() + weight_offset(l);
        const double* b = params_.data() + bias_offset(l);

        rec.input = h;
        rec.shaped.resize(spec.output_width);
        for (std::size_t i = 0; i < spec.output_width; ++i) {
            const double* row = w + i * spec.input_width;
            double acc = b[i];
            for (std::size_t j = 0; j < spec.input_width; ++j) acc += row[j] * h[j];
            rec.shaped[i] = acc;
        }
        rec.inv_std = spec.has_layernorm ? normalize_in_place(rec.shaped, epsilon_ln_) : 1.0;

        h.resize(spec.output_width);
        for (std::size_t i = 0; i < spec.output_width; ++i) h[i] = activate(spec.activation, rec.shaped[i]);
    }
    tape.output_ = h;
    return h;
}

std::vector<double> Network::predict(std::span<const double> x) const {
    Tape tape;
    return forward(x, tape);
}

GradientBuffer Network::backward(const Tape& tape, std::span<const double> dy) const {
    GradientBuffer grads(params_.size(), 0.0);
    backward(tape, dy, grads);
    return grads;
}

void Network::backward(const Tape& tape, std::span<const double> dy, std::span<double> grads) const {
    if (tape.empty() || tape.network_id_ != id_ || tape.generation_ != generation_) {
        throw std::logic_error("Network::backward: stale or foreign tape");
    }
    require_dims(dy.size(), output_width(), "Network::backward dy");
    require_dims(grads.size(), params_.size(), "Network::backward grads");

    std::vector<double> g(dy.begin(), dy.end());
    std::vector<double> g_in;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& spec = layers_[l];
        const auto& rec = tape.layers_[l];

        for (std::size_t i = 0; i < spec.output_width; ++i) g[i] *= activate_slope(spec.activation, rec.shaped[i]);

        if (spec.has_layernorm) {
            // d(xhat)/da = inv_std * (I - 1/n - xhat xhat^T / n)
            const double n = static_cast<double>(spec.output_width);
            double mean_g = 0.0;
            double mean_gx = 0.0;
            for (std::size_t i = 0; i < spec.output_width; ++i) {
                mean_g += g[i];
                mean_gx += g[i] * rec.shaped[i];
            }
            mean_g /= n;
            mean_gx /= n;
            for (std::size_t i = 0; i < spec.output_width; ++i) {
                g[i] = rec.inv_std * (g[i] - mean_g - rec.shaped[i] * mean_gx);
            }
        }

        double* dw = grads.data() + weight_offset(l);
        double* db = grads.data() + bias_offset(l);
        for (std::size_t i = 0; i < spec.output_width; ++i) {
            double* row = dw + i * spec.input_width;
            for (std::size_t j = 0; j < spec.input_width; ++j) row[j] = g[i] * rec.input[j];
            db[i] = g[i];
        }

        if (l > 0) {
            const double* w = params_.data() + weight_offset(l);
            g_in.assign(spec.input_width, 0.0);
            for (std::size_t i = 0; i < spec.output_width; ++i) {
                const double* row = w + i * spec.input_width;
                const double gi = g[i];
                for (std::size_t j = 0; j < spec.input_width; ++j) g_in[j] += row[j] * gi;
            }
            g.swap(g_in);
        }
    }
}

std::vector<double> layernorm(std::span<const double> a, double epsilon_ln) {
    if (a.empty()) throw std::invalid_argument("layernorm: empty input");
    std::vector<double> out(a.begin(), a.end());
    normalize_in_place(out, epsilon_ln);
    return out;
}

std::size_t sparse_zero_count(std::size_t fan_in, double s) {
    if (!(s >= 0.0 && s < 1.0)) throw std::invalid_argument("sparse_init: sparsity must lie in [0, 1)");
    const auto n = static_cast<std::size_t>(std::llround(s * static_cast<double>(fan_in)));
    return std::min(n, fan_in - 1);
}

void sparse_init(Network& net, double s, Rng& rng) {
    auto params = net.mutable_params();
    std::vector<std::size_t> perm;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& spec = net.layers()[l];
        const std::size_t fan_in = spec.input_width;
        const std::size_t zeros = sparse_zero_count(fan_in, s);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        double* w = params.data() + net.weight_offset(l);
        double* b = params.data() + net.bias_offset(l);

        perm.resize(fan_in);
        for (std::size_t i = 0; i < spec.output_width; ++i) {
            double* row = w + i * fan_in;
            for (std::size_t j = 0; j < fan_in; ++j) row[j] = rng.uniform(-bound, bound);
            // Partial Fisher-Yates: the first `zeros` entries are a uniform subset.
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t k = 0; k < zeros; ++k) {
                std::swap(perm[k], perm[k + rng.index(fan_in - k)]);
                row[perm[k]] = 0.0;
            }
            b[i] = 0.0;
        }
    }
}

}  // namespace streamx
