#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace streamx {

/// Accumulating eligibility trace over one flat parameter vector:
/// z <- gamma * lambda * z + g.
class TraceSet {
public:
    TraceSet(std::size_t size, double gamma, double lambda);

    void accumulate(std::span<const double> g);
    void reset();

    double gamma() const { return gamma_; }
    double lambda() const { return lambda_; }
    double decay() const { return gamma_ * lambda_; }
    std::size_t size() const { return z_.size(); }
    std::span<const double> values() const { return z_; }
    double l1_norm() const;
    bool all_finite() const;

private:
    std::vector<double> z_;
    double gamma_;
    double lambda_;
};

}  // namespace streamx
