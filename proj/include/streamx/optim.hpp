#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamx {

/// What one optimizer call did. `bound` is the overshooting bound M for the
/// ObGD family and 0 for the baselines.
struct StepStats {
    double alpha_eff = 0.0;
    double bound = 0.0;
    double z_l1 = 0.0;
    bool clipped = false;
};

/// Overshooting-bounded gradient descent.
///
///   dbar = max(|delta|, 1)
///   M = alpha * kappa * dbar * ||z||_1
///   alpha_eff = min(alpha / M, alpha)
///   w <- w + alpha_eff * delta * z
///
/// After a step either alpha_eff == alpha (M <= 1) or
/// alpha_eff * kappa * dbar * ||z||_1 == 1.
class ObGD {
public:
    ObGD(double alpha, double kappa);

    double alpha() const { return alpha_; }
    double kappa() const { return kappa_; }

    StepStats step(std::span<double> w, std::span<const double> z, double delta) const;

private:
    double alpha_;
    double kappa_;
};

/// ObGD with an RMSProp-style preconditioner. The second-moment vector starts
/// at zero and is used without bias correction.
class AdaptiveObGD {
public:
    AdaptiveObGD(std::size_t size, double alpha, double kappa, double beta2 = 0.999, double eps = 1e-8);

    double alpha() const { return alpha_; }
    double kappa() const { return kappa_; }
    std::span<const double> second_moments() const { return v_; }
    void set_second_moments(std::span<const double> v);

    StepStats step(std::span<double> w, std::span<const double> z, double delta);

private:
    double alpha_;
    double kappa_;
    double beta2_;
    double eps_;
    std::vector<double> v_;
    std::vector<double> scaled_;
};

/// Plain semi-gradient step w <- w + alpha * delta * z.
class Sgd {
public:
    explicit Sgd(double alpha);
    double alpha() const { return alpha_; }
    StepStats step(std::span<double> w, std::span<const double> z, double delta) const;

private:
    double alpha_;
};

/// Bias-corrected adaptive-moments baseline applied to the ascent direction
/// delta * z. Defaults follow the classic baselines: beta1 = 0.9,
/// beta2 = 0.999, eps = 1e-4.
class AdaptiveMoments {
public:
    AdaptiveMoments(std::size_t size, double alpha, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-4);
    double alpha() const { return alpha_; }
    StepStats step(std::span<double> w, std::span<const double> z, double delta);

private:
    double alpha_;
    double beta1_;
    double beta2_;
    double eps_;
    std::int64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

/// Idealized line search: shrinks alpha from alpha0 by `shrink` until the
/// exactly measured effective step size (delta - delta_fn(w')) / delta is at
/// most xi_max. Needs one extra error evaluation per trial.
class Backtracking {
public:
    struct Result {
        std::vector<double> weights;
        double alpha = 0.0;
        double xi = 0.0;
        int shrinks = 0;
    };

    explicit Backtracking(double xi_max = 0.05, double shrink = 0.5, int max_iterations = 60);

    Result step(std::span<const double> w, std::span<const double> z, double delta,
                const std::function<double(std::span<const double>)>& delta_fn, double alpha0) const;

private:
    double xi_max_;
    double shrink_;
    int max_iterations_;
};

/// Exact effective step size of linear squared-error regression: alpha x^T x.
double xi_linear_regression(double alpha, std::span<const double> x);

/// Exact effective step size of linear semi-gradient TD(lambda),
/// (delta - delta_+) / delta = alpha z^T (x - gamma x_next).
double xi_linear_td(double alpha, std::span<const double> z, std::span<const double> x,
                    std::span<const double> x_next, double gamma);

enum class OptimizerKind { ObGD, AdaptiveObGD, SGD, AdaptiveMoments };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

/// Runtime-selected optimizer bound to one parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, std::size_t size, double alpha, double kappa);

    OptimizerKind kind() const { return kind_; }
    StepStats step(std::span<double> w, std::span<const double> z, double delta);

private:
    OptimizerKind kind_;
    std::variant<ObGD, AdaptiveObGD, Sgd, AdaptiveMoments> impl_;
};

}  // namespace streamx
