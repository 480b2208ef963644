#include "streamx/traces.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "streamx/errors.hpp"

namespace streamx {

TraceSet::TraceSet(std::size_t size, double gamma, double lambda) : z_(size, 0.0), gamma_(gamma), lambda_(lambda) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("TraceSet: gamma must lie in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("TraceSet: lambda must lie in [0, 1]");
}

void TraceSet::accumulate(std::span<const double> g) {
    require_dims(g.size(), z_.size(), "TraceSet::accumulate");
    const double d = decay();
    for (std::size_t i = 0; i < z_.size(); ++i) z_[i] = d * z_[i] + g[i];
}

void TraceSet::reset() { std::fill(z_.begin(), z_.end(), 0.0); }

double TraceSet::l1_norm() const {
    double total = 0.0;
    for (double v : z_) total += std::abs(v);
    return total;
}

bool TraceSet::all_finite() const {
    return std::all_of(z_.begin(), z_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace streamx
