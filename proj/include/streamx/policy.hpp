#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "streamx/net.hpp"
#include "streamx/rng.hpp"

namespace streamx {

inline constexpr double kSoftplusThreshold = 20.0;
inline constexpr double kMinStd = 1e-6;

/// log(1 + e^x), switched to the identity above kSoftplusThreshold.
double softplus(double x);
/// Derivative of softplus() including the identity branch.
double softplus_slope(double x);

struct DiscreteSample {
    std::size_t action = 0;
    double log_prob = 0.0;
};

struct ContinuousSample {
    std::vector<double> raw;      // pre-clamp draw; log_prob and gradients refer to it
    std::vector<double> clamped;  // executed action, each entry in [-1, 1]
    double log_prob = 0.0;
};

/// Categorical policy over trunk logits.
class SoftmaxHead {
public:
    explicit SoftmaxHead(std::size_t action_count);

    std::size_t action_count() const { return action_count_; }
    std::size_t trunk_width() const { return action_count_; }

    std::vector<double> probabilities(std::span<const double> logits) const;
    DiscreteSample sample(std::span<const double> logits, Rng& rng) const;
    double log_prob(std::span<const double> logits, std::size_t action) const;
    double entropy(std::span<const double> logits) const;

    /// d/d(logits) of log pi(action) + entropy_weight * H.
    std::vector<double> output_gradient(std::span<const double> logits, std::size_t action,
                                        double entropy_weight) const;

private:
    std::size_t action_count_;
};

/// Diagonal Gaussian: trunk outputs [means..., std pre-activations...].
class GaussianHead {
public:
    explicit GaussianHead(std::size_t action_dim);

    std::size_t action_dim() const { return action_dim_; }
    std::size_t trunk_width() const { return 2 * action_dim_; }

    std::span<const double> means(std::span<const double> out) const { return out.first(action_dim_); }
    std::vector<double> stddevs(std::span<const double> out) const;

    ContinuousSample sample(std::span<const double> out, Rng& rng) const;
    double log_prob(std::span<const double> out, std::span<const double> raw_action) const;
    double entropy(std::span<const double> out) const;

    std::vector<double> output_gradient(std::span<const double> out, std::span<const double> raw_action,
                                        double entropy_weight) const;

private:
    std::size_t action_dim_;
};

using PolicyHead = std::variant<SoftmaxHead, GaussianHead>;

std::size_t trunk_width(const PolicyHead& head);

/// Gradient of log pi(A|S) + tau * delta_sign * H(.|S) with respect to the
/// trunk parameters, via one backward pass through `tape`.
GradientBuffer logprob_and_entropy_grad(const SoftmaxHead& head, const Network& net, const Tape& tape,
                                        std::size_t action, double tau, int delta_sign);
GradientBuffer logprob_and_entropy_grad(const GaussianHead& head, const Network& net, const Tape& tape,
                                        std::span<const double> raw_action, double tau, int delta_sign);

}  // namespace streamx
