#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace streamx {

inline constexpr double kScalingEpsilon = 1e-8;

/// One scalar Welford step. Increments `n`, folds `x` into the
/// squared-deviation statistic `p` around `mean`, and returns the updated
/// mean together with the sample variance (1 while fewer than two samples).
struct WelfordResult {
    double mean;
    double variance;
};
WelfordResult welford_step(double x, double mean, double& p, std::int64_t& n);

/// Per-coordinate running mean / sample variance.
class RunningMoments {
public:
    explicit RunningMoments(std::size_t dim = 1);

    /// Folds one sample in and returns the updated variances.
    std::vector<double> update(std::span<const double> x);

    std::size_t dim() const { return mean_.size(); }
    std::int64_t count() const { return n_; }
    std::span<const double> mean() const { return mean_; }
    std::span<const double> p() const { return p_; }
    std::vector<double> variance() const;

    void restore(std::span<const double> mean, std::span<const double> p, std::int64_t n);

private:
    std::vector<double> mean_;
    std::vector<double> p_;
    std::int64_t n_ = 0;
};

/// Normalizes each observation with statistics that already include it.
class ObservationNormalizer {
public:
    explicit ObservationNormalizer(std::size_t dim, double eps = kScalingEpsilon);

    std::vector<double> normalize(std::span<const double> s);
    /// Applies the current statistics without updating them.
    std::vector<double> transform(std::span<const double> s) const;

    const RunningMoments& moments() const { return moments_; }
    RunningMoments& moments() { return moments_; }

private:
    RunningMoments moments_;
    double eps_;
};

/// Divides rewards by the running scale of the discounted reward sum
/// u <- gamma (1 - T) u + r. The variance statistic is a Welford update of u
/// with the mean input pinned to zero and the returned mean discarded.
class RewardScaler {
public:
    explicit RewardScaler(double eps = kScalingEpsilon);

    double scale(double r, double gamma, bool terminated);

    /// sqrt(variance + eps): the factor that maps scaled values back.
    double scale_factor() const;
    double variance() const;

    double u() const { return u_; }
    double p() const { return p_; }
    std::int64_t count() const { return n_; }
    void restore(double u, double p, std::int64_t n);

private:
    double u_ = 0.0;
    double p_ = 0.0;
    std::int64_t n_ = 0;
    double variance_ = 1.0;
    double eps_;
};

}  // namespace streamx
