#include "streamx/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "streamx/errors.hpp"

namespace streamx {

WelfordResult welford_step(double x, double mean, double& p, std::int64_t& n) {
    n += 1;
    const double mean_bar = mean + (x - mean) / static_cast<double>(n);
    p += (x - mean) * (x - mean_bar);
    const double variance = n >= 2 ? p / static_cast<double>(n - 1) : 1.0;
    return {mean_bar, variance};
}

// --- RunningMoments --------------------------------------------------------

RunningMoments::RunningMoments(std::size_t dim) : mean_(dim, 0.0), p_(dim, 0.0) {
    if (dim == 0) throw std::invalid_argument("RunningMoments: dim must be >= 1");
}

std::vector<double> RunningMoments::update(std::span<const double> x) {
    require_dims(x.size(), mean_.size(), "RunningMoments::update");
    std::vector<double> var(mean_.size());
    const std::int64_t before = n_;
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        std::int64_t n = before;
        const auto r = welford_step(x[i], mean_[i], p_[i], n);
        mean_[i] = r.mean;
        var[i] = r.variance;
    }
    n_ = before + 1;
    return var;
}

std::vector<double> RunningMoments::variance() const {
    std::vector<double> var(mean_.size(), 1.0);
    if (n_ >= 2) {
        for (std::size_t i = 0; i < var.size(); ++i) var[i] = p_[i] / static_cast<double>(n_ - 1);
    }
    return var;
}

void RunningMoments::restore(std::span<const double> mean, std::span<const double> p, std::int64_t n) {
    require_dims(mean.size(), mean_.size(), "RunningMoments::restore mean");
    require_dims(p.size(), p_.size(), "RunningMoments::restore p");
    std::copy(mean.begin(), mean.end(), mean_.begin());
    std::copy(p.begin(), p.end(), p_.begin());
    n_ = n;
}

// --- ObservationNormalizer -------------------------------------------------

ObservationNormalizer::ObservationNormalizer(std::size_t dim, double eps) : moments_(dim), eps_(eps) {}

std::vector<double> ObservationNormalizer::normalize(std::span<const double> s) {
    const auto var = moments_.update(s);
    std::vector<double> out(s.size());
    const auto mean = moments_.mean();
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - mean[i]) / std::sqrt(var[i] + eps_);
    return out;
}

std::vector<double> ObservationNormalizer::transform(std::span<const double> s) const {
    require_dims(s.size(), moments_.dim(), "ObservationNormalizer::transform");
    const auto var = moments_.variance();
    const auto mean = moments_.mean();
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - mean[i]) / std::sqrt(var[i] + eps_);
    return out;
}

// --- RewardScaler ----------------------------------------------------------

RewardScaler::RewardScaler(double eps) : eps_(eps) {}

double RewardScaler::scale(double r, double gamma, bool terminated) {
    const double keep = terminated ? 0.0 : 1.0;
    u_ = gamma * keep * u_ + r;
    variance_ = welford_step(u_, 0.0, p_, n_).variance;
    return r / std::sqrt(variance_ + eps_);
}

double RewardScaler::scale_factor() const { return std::sqrt(variance_ + eps_); }

double RewardScaler::variance() const { return variance_; }

void RewardScaler::restore(double u, double p, std::int64_t n) {
    u_ = u;
    p_ = p;
    n_ = n;
    variance_ = n >= 2 ? p / static_cast<double>(n - 1) : 1.0;
}

}  // namespace streamx
