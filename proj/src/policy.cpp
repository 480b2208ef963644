#include "streamx/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "streamx/errors.hpp"

namespace streamx {
namespace {

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw DivergenceError(std::string(what) + ": non-finite trunk output");
    }
}

const double kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kHalfLogTwoPiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

}  // namespace

double softplus(double x) {
    if (x > kSoftplusThreshold) return x;
    return std::log1p(std::exp(x));
}

double softplus_slope(double x) {
    if (x > kSoftplusThreshold) return 1.0;
    return 1.0 / (1.0 + std::exp(-x));
}

// --- SoftmaxHead -----------------------------------------------------------

SoftmaxHead::SoftmaxHead(std::size_t action_count) : action_count_(action_count) {
    if (action_count == 0) throw std::invalid_argument("SoftmaxHead: action_count must be >= 1");
}

std::vector<double> SoftmaxHead::probabilities(std::span<const double> logits) const {
    require_dims(logits.size(), action_count_, "SoftmaxHead logits");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - top);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

DiscreteSample SoftmaxHead::sample(std::span<const double> logits, Rng& rng) const {
    require_finite(logits, "SoftmaxHead::sample");
    const auto p = probabilities(logits);
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t chosen = p.size() - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        cumulative += p[i];
        if (u < cumulative) {
            chosen = i;
            break;
        }
    }
    return {chosen, std::log(p[chosen])};
}

double SoftmaxHead::log_prob(std::span<const double> logits, std::size_t action) const {
    if (action >= action_count_) throw std::out_of_range("SoftmaxHead: action out of range");
    return std::log(probabilities(logits)[action]);
}

double SoftmaxHead::entropy(std::span<const double> logits) const {
    double h = 0.0;
    for (double p : probabilities(logits)) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<double> SoftmaxHead::output_gradient(std::span<const double> logits, std::size_t action,
                                                 double entropy_weight) const {
    if (action >= action_count_) throw std::out_of_range("SoftmaxHead: action out of range");
    const auto p = probabilities(logits);
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    std::vector<double> dy(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        dy[j] = (j == action ? 1.0 : 0.0) - p[j];
        if (entropy_weight != 0.0 && p[j] > 0.0) dy[j] += entropy_weight * (-p[j] * (std::log(p[j]) + h));
    }
    return dy;
}

// --- GaussianHead ----------------------------------------------------------

GaussianHead::GaussianHead(std::size_t action_dim) : action_dim_(action_dim) {
    if (action_dim == 0) throw std::invalid_argument("GaussianHead: action_dim must be >= 1");
}

std::vector<double> GaussianHead::stddevs(std::span<const double> out) const {
    require_dims(out.size(), trunk_width(), "GaussianHead trunk output");
    std::vector<double> sigma(action_dim_);
    for (std::size_t i = 0; i < action_dim_; ++i) sigma[i] = std::max(softplus(out[action_dim_ + i]), kMinStd);
    return sigma;
}

ContinuousSample GaussianHead::sample(std::span<const double> out, Rng& rng) const {
    require_finite(out, "GaussianHead::sample");
    const auto sigma = stddevs(out);
    ContinuousSample s;
    s.raw.resize(action_dim_);
    s.clamped.resize(action_dim_);
    for (std::size_t i = 0; i < action_dim_; ++i) {
        s.raw[i] = out[i] + sigma[i] * rng.normal();
        s.clamped[i] = std::clamp(s.raw[i], -1.0, 1.0);
    }
    s.log_prob = log_prob(out, s.raw);
    return s;
}

double GaussianHead::log_prob(std::span<const double> out, std::span<const double> raw_action) const {
    require_dims(raw_action.size(), action_dim_, "GaussianHead action");
    const auto sigma = stddevs(out);
    double lp = 0.0;
    for (std::size_t i = 0; i < action_dim_; ++i) {
        const double z = (raw_action[i] - out[i]) / sigma[i];
        lp += -0.5 * z * z - std::log(sigma[i]) - kHalfLogTwoPi;
    }
    return lp;
}

double GaussianHead::entropy(std::span<const double> out) const {
    double h = 0.0;
    for (double s : stddevs(out)) h += kHalfLogTwoPiE + std::log(s);
    return h;
}

std::vector<double> GaussianHead::output_gradient(std::span<const double> out, std::span<const double> raw_action,
                                                  double entropy_weight) const {
    require_dims(raw_action.size(), action_dim_, "GaussianHead action");
    const auto sigma = stddevs(out);
    std::vector<double> dy(trunk_width(), 0.0);
    for (std::size_t i = 0; i < action_dim_; ++i) {
        const double diff = raw_action[i] - out[i];
        const double var = sigma[i] * sigma[i];
        dy[i] = diff / var;
        const double d_sigma = diff * diff / (var * sigma[i]) - 1.0 / sigma[i] + entropy_weight / sigma[i];
        const double pre = out[action_dim_ + i];
        const double slope = softplus(pre) > kMinStd ? softplus_slope(pre) : 0.0;
        dy[action_dim_ + i] = d_sigma * slope;
    }
    return dy;
}

// --- free functions --------------------------------------------------------

std::size_t trunk_width(const PolicyHead& head) {
    return std::visit([](const auto& h) { return h.trunk_width(); }, head);
}

GradientBuffer logprob_and_entropy_grad(const SoftmaxHead& head, const Network& net, const Tape& tape,
                                        std::size_t action, double tau, int delta_sign) {
    const auto dy = head.output_gradient(tape.output(), action, tau * static_cast<double>(delta_sign));
    return net.backward(tape, dy);
}

GradientBuffer logprob_and_entropy_grad(const GaussianHead& head, const Network& net, const Tape& tape,
                                        std::span<const double> raw_action, double tau, int delta_sign) {
    const auto dy = head.output_gradient(tape.output(), raw_action, tau * static_cast<double>(delta_sign));
    return net.backward(tape, dy);
}

}  // namespace streamx
