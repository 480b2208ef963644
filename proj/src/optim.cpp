#include "streamx/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "streamx/errors.hpp"

namespace streamx {
namespace {

void require_finite_delta(double delta, const char* who) {
    if (!std::isfinite(delta)) throw DivergenceError(std::string(who) + ": non-finite TD error");
}

void require_finite_norm(double norm, const char* who) {
    if (!std::isfinite(norm)) throw DivergenceError(std::string(who) + ": non-finite trace");
}

double l1(std::span<const double> v) {
    double total = 0.0;
    for (double x : v) total += std::abs(x);
    return total;
}

StepStats clipped_step(double alpha, double kappa, std::span<double> w, std::span<const double> direction,
                       double delta, double direction_l1) {
    const double delta_bar = std::max(std::abs(delta), 1.0);
    const double bound = alpha * kappa * delta_bar * direction_l1;
    const double alpha_eff = std::min(alpha / bound, alpha);
    const double coef = alpha_eff * delta;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += coef * direction[i];
    return {alpha_eff, bound, direction_l1, alpha_eff < alpha};
}

}  // namespace

// --- ObGD ------------------------------------------------------------------

ObGD::ObGD(double alpha, double kappa) : alpha_(alpha), kappa_(kappa) {
    if (!(alpha > 0.0)) throw std::invalid_argument("ObGD: alpha must be positive");
    if (!(kappa > 1.0)) throw std::invalid_argument("ObGD: kappa must exceed 1");
}

StepStats ObGD::step(std::span<double> w, std::span<const double> z, double delta) const {
    require_dims(z.size(), w.size(), "ObGD::step");
    require_finite_delta(delta, "ObGD");
    const double z_l1 = l1(z);
    require_finite_norm(z_l1, "ObGD");
    return clipped_step(alpha_, kappa_, w, z, delta, z_l1);
}

// --- AdaptiveObGD ----------------------------------------------------------

AdaptiveObGD::AdaptiveObGD(std::size_t size, double alpha, double kappa, double beta2, double eps)
    : alpha_(alpha), kappa_(kappa), beta2_(beta2), eps_(eps), v_(size, 0.0), scaled_(size, 0.0) {
    if (!(alpha > 0.0)) throw std::invalid_argument("AdaptiveObGD: alpha must be positive");
    if (!(kappa > 1.0)) throw std::invalid_argument("AdaptiveObGD: kappa must exceed 1");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("AdaptiveObGD: beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("AdaptiveObGD: eps must be positive");
}

void AdaptiveObGD::set_second_moments(std::span<const double> v) {
    require_dims(v.size(), v_.size(), "AdaptiveObGD::set_second_moments");
    for (double x : v) {
        if (!(x >= 0.0)) throw std::invalid_argument("AdaptiveObGD: second moments must be non-negative");
    }
    std::copy(v.begin(), v.end(), v_.begin());
}

StepStats AdaptiveObGD::step(std::span<double> w, std::span<const double> z, double delta) {
    require_dims(z.size(), w.size(), "AdaptiveObGD::step");
    require_dims(z.size(), v_.size(), "AdaptiveObGD::step");
    require_finite_delta(delta, "AdaptiveObGD");
    double scaled_l1 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double g = delta * z[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        scaled_[i] = z[i] / std::sqrt(v_[i] + eps_);
        scaled_l1 += std::abs(scaled_[i]);
    }
    require_finite_norm(scaled_l1, "AdaptiveObGD");
    auto stats = clipped_step(alpha_, kappa_, w, scaled_, delta, scaled_l1);
    stats.z_l1 = l1(z);
    return stats;
}

// --- baselines -------------------------------------------------------------

Sgd::Sgd(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("Sgd: alpha must be positive");
}

StepStats Sgd::step(std::span<double> w, std::span<const double> z, double delta) const {
    require_dims(z.size(), w.size(), "Sgd::step");
    require_finite_delta(delta, "Sgd");
    const double coef = alpha_ * delta;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += coef * z[i];
    return {alpha_, 0.0, l1(z), false};
}

AdaptiveMoments::AdaptiveMoments(std::size_t size, double alpha, double beta1, double beta2, double eps)
    : alpha_(alpha), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {
    if (!(alpha > 0.0)) throw std::invalid_argument("AdaptiveMoments: alpha must be positive");
}

StepStats AdaptiveMoments::step(std::span<double> w, std::span<const double> z, double delta) {
    require_dims(z.size(), w.size(), "AdaptiveMoments::step");
    require_finite_delta(delta, "AdaptiveMoments");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = delta * z[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        w[i] += alpha_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
    return {alpha_, 0.0, l1(z), false};
}

// --- Backtracking ----------------------------------------------------------

Backtracking::Backtracking(double xi_max, double shrink, int max_iterations)
    : xi_max_(xi_max), shrink_(shrink), max_iterations_(max_iterations) {
    if (!(xi_max > 0.0 && xi_max <= 1.0)) throw std::invalid_argument("Backtracking: xi_max must lie in (0, 1]");
    if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("Backtracking: shrink must lie in (0, 1)");
}

Backtracking::Result Backtracking::step(std::span<const double> w, std::span<const double> z, double delta,
                                        const std::function<double(std::span<const double>)>& delta_fn,
                                        double alpha0) const {
    require_dims(z.size(), w.size(), "Backtracking::step");
    Result result{std::vector<double>(w.begin(), w.end()), alpha0, 0.0, 0};
    if (delta == 0.0) return result;

    auto candidate = [&](double alpha) {
        for (std::size_t i = 0; i < w.size(); ++i) result.weights[i] = w[i] + alpha * delta * z[i];
        return (delta - delta_fn(result.weights)) / delta;
    };

    double alpha = alpha0;
    double xi = candidate(alpha);
    while (xi > xi_max_) {
        if (result.shrinks >= max_iterations_) {
            throw std::runtime_error("Backtracking: iteration cap reached without meeting xi_max");
        }
        alpha *= shrink_;
        ++result.shrinks;
        xi = candidate(alpha);
    }
    result.alpha = alpha;
    result.xi = xi;
    return result;
}

// --- linear oracles --------------------------------------------------------

double xi_linear_regression(double alpha, std::span<const double> x) {
    double xx = 0.0;
    for (double v : x) xx += v * v;
    return alpha * xx;
}

double xi_linear_td(double alpha, std::span<const double> z, std::span<const double> x,
                    std::span<const double> x_next, double gamma) {
    require_dims(x.size(), z.size(), "xi_linear_td x");
    require_dims(x_next.size(), z.size(), "xi_linear_td x_next");
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += z[i] * (x[i] - gamma * x_next[i]);
    return alpha * acc;
}

// --- Optimizer -------------------------------------------------------------

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::ObGD: return "obgd";
        case OptimizerKind::AdaptiveObGD: return "adaptive_obgd";
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::AdaptiveMoments: return "adaptive_moments";
    }
    return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "obgd") return OptimizerKind::ObGD;
    if (name == "adaptive_obgd") return OptimizerKind::AdaptiveObGD;
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adaptive_moments" || name == "adam") return OptimizerKind::AdaptiveMoments;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

namespace {

std::variant<ObGD, AdaptiveObGD, Sgd, AdaptiveMoments> make_impl(OptimizerKind kind, std::size_t size, double alpha,
                                                                 double kappa) {
    switch (kind) {
        case OptimizerKind::ObGD: return ObGD(alpha, kappa);
        case OptimizerKind::AdaptiveObGD: return AdaptiveObGD(size, alpha, kappa);
        case OptimizerKind::SGD: return Sgd(alpha);
        case OptimizerKind::AdaptiveMoments: return AdaptiveMoments(size, alpha);
    }
    throw std::invalid_argument("unknown optimizer kind");
}

}  // namespace

Optimizer::Optimizer(OptimizerKind kind, std::size_t size, double alpha, double kappa)
    : kind_(kind), impl_(make_impl(kind, size, alpha, kappa)) {}

StepStats Optimizer::step(std::span<double> w, std::span<const double> z, double delta) {
    return std::visit([&](auto& opt) { return opt.step(w, z, delta); }, impl_);
}

}  // namespace streamx
