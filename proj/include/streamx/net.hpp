#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "streamx/rng.hpp"

namespace streamx {

enum class Activation { LeakyReLU, Identity };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kLayerNormEpsilon = 1e-8;

struct LayerSpec {
    std::size_t input_width = 1;
    std::size_t output_width = 1;
    bool has_layernorm = false;
    Activation activation = Activation::Identity;

    std::size_t param_count() const { return output_width * input_width + output_width; }
    bool operator==(const LayerSpec&) const = default;
};

/// Flat gradient vector laid out exactly like Network::params().
using GradientBuffer = std::vector<double>;

/// Activation record of one forward pass. Bound to the network instance and
/// parameter generation that produced it; backward rejects stale tapes.
class Tape {
public:
    const std::vector<double>& output() const { return output_; }
    bool empty() const { return layers_.empty(); }

private:
    friend class Network;

    struct LayerRecord {
        std::vector<double> input;   // h_l
        std::vector<double> shaped;  // pre-activation after (optional) normalization
        double inv_std = 1.0;
    };

    std::uint64_t network_id_ = 0;
    std::uint64_t generation_ = 0;
    std::vector<LayerRecord> layers_;
    std::vector<double> output_;
};

/// Fully-connected network: each layer computes W h + b, optionally
/// layer-normalizes the result (no learned gain or shift), then applies its
/// activation. Parameters are one flat vector, per layer row-major weights
/// followed by the bias.
class Network {
public:
    explicit Network(std::vector<LayerSpec> layers, double epsilon_ln = kLayerNormEpsilon);

    /// LeakyReLU MLP with `hidden` widths and an Identity output layer.
    static Network mlp(std::size_t input_width, const std::vector<std::size_t>& hidden, std::size_t output_width,
                       bool layernorm = true);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::size_t input_width() const { return layers_.front().input_width; }
    std::size_t output_width() const { return layers_.back().output_width; }
    std::size_t param_count() const { return params_.size(); }
    double epsilon_ln() const { return epsilon_ln_; }

    std::span<const double> params() const { return params_; }

    /// Mutable view. Invalidates every tape recorded so far.
    std::span<double> mutable_params();
    void set_params(std::span<const double> values);

    /// Offset of layer `l`'s weight block; its bias follows the weights.
    std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
    std::size_t bias_offset(std::size_t l) const {
        return offsets_[l] + layers_[l].output_width * layers_[l].input_width;
    }

    std::vector<double> forward(std::span<const double> x, Tape& tape) const;
    std::vector<double> predict(std::span<const double> x) const;

    /// Gradient of dot(dy, y) with respect to every parameter.
    GradientBuffer backward(const Tape& tape, std::span<const double> dy) const;
    void backward(const Tape& tape, std::span<const double> dy, std::span<double> grads) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    double epsilon_ln_;
    std::uint64_t id_;
    std::uint64_t generation_ = 0;
};

/// Parameter-free layer normalization with population statistics.
std::vector<double> layernorm(std::span<const double> a, double epsilon_ln = kLayerNormEpsilon);

/// Number of incoming weights zeroed per unit for fan-in `fan_in` at sparsity
/// `s`: round(s * fan_in), capped so every unit keeps one live input.
std::size_t sparse_zero_count(std::size_t fan_in, double s);

/// Sparse initialization: per output unit, weights uniform in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)] with sparse_zero_count() of them zeroed at
/// positions drawn from a fresh permutation; biases zero. s = 0 is dense
/// LeCun-uniform.
void sparse_init(Network& net, double s, Rng& rng);

}  // namespace streamx
