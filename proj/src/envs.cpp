#include "streamx/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "streamx/errors.hpp"

namespace streamx {
namespace {

std::size_t discrete_action(const Action& action, std::size_t count, const char* who) {
    const auto* index = std::get_if<std::size_t>(&action);
    if (index == nullptr) throw std::invalid_argument(std::string(who) + ": expected a discrete action");
    if (*index >= count) {
        throw std::out_of_range(std::string(who) + ": action index " + std::to_string(*index) + " out of range");
    }
    return *index;
}

const std::vector<double>& continuous_action(const Action& action, std::size_t dim, const char* who) {
    const auto* values = std::get_if<std::vector<double>>(&action);
    if (values == nullptr) throw std::invalid_argument(std::string(who) + ": expected a continuous action");
    require_dims(values->size(), dim, who);
    for (double v : *values) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite action");
    }
    return *values;
}

}  // namespace

// --- RandomWalk ------------------------------------------------------------

RandomWalk::RandomWalk(std::size_t n) : n_(n) {
    if (n < 1) throw std::invalid_argument("RandomWalk: need at least one state");
}

EnvSpec RandomWalk::spec() const { return {n_, ActionSpace::discrete(1), std::nullopt}; }

std::vector<double> RandomWalk::one_hot(std::size_t state) const {
    std::vector<double> obs(n_, 0.0);
    obs.at(state) = 1.0;
    return obs;
}

std::vector<double> RandomWalk::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_ = Rng(*seed);
    state_ = n_ / 2;
    return one_hot(state_);
}

EnvStep RandomWalk::step(const Action& action) {
    discrete_action(action, 1, "RandomWalk::step");
    const bool right = rng_.uniform() < 0.5;
    if (right) {
        if (state_ + 1 == n_) return {std::vector<double>(n_, 0.0), 1.0, true, false};
        ++state_;
    } else {
        if (state_ == 0) return {std::vector<double>(n_, 0.0), 0.0, true, false};
        --state_;
    }
    return {one_hot(state_), 0.0, false, false};
}

std::vector<double> RandomWalk::true_values(double gamma, double tolerance) const {
    std::vector<double> v(n_, 0.0);
    for (int sweep = 0; sweep < 1000000; ++sweep) {
        double change = 0.0;
        for (std::size_t s = 0; s < n_; ++s) {
            const double left = s == 0 ? 0.0 : gamma * v[s - 1];
            const double right = s + 1 == n_ ? 1.0 : gamma * v[s + 1];
            const double updated = 0.5 * left + 0.5 * right;
            change = std::max(change, std::abs(updated - v[s]));
            v[s] = updated;
        }
        if (change < tolerance) return v;
    }
    throw std::runtime_error("RandomWalk::true_values: value iteration did not converge");
}

// --- Gridworld -------------------------------------------------------------

Gridworld::Gridworld(std::size_t size, double step_cost) : size_(size), step_cost_(step_cost) {
    if (size < 2) throw std::invalid_argument("Gridworld: size must be >= 2");
    if (!(step_cost > 0.0)) throw std::invalid_argument("Gridworld: step_cost must be positive");
}

EnvSpec Gridworld::spec() const { return {size_ * size_, ActionSpace::discrete(4), std::nullopt}; }

std::vector<double> Gridworld::one_hot(std::size_t row, std::size_t col) const {
    std::vector<double> obs(size_ * size_, 0.0);
    obs.at(row * size_ + col) = 1.0;
    return obs;
}

std::vector<double> Gridworld::reset(std::optional<std::uint64_t>) {
    row_ = 0;
    col_ = 0;
    return one_hot(row_, col_);
}

EnvStep Gridworld::step(const Action& action) {
    const std::size_t a = discrete_action(action, 4, "Gridworld::step");
    switch (a) {
        case 0: row_ = row_ == 0 ? 0 : row_ - 1; break;
        case 1: col_ = std::min(col_ + 1, size_ - 1); break;
        case 2: row_ = std::min(row_ + 1, size_ - 1); break;
        default: col_ = col_ == 0 ? 0 : col_ - 1; break;
    }
    const bool goal = row_ == size_ - 1 && col_ == size_ - 1;
    return {one_hot(row_, col_), goal ? 1.0 : -step_cost_, goal, false};
}

std::vector<double> Gridworld::optimal_values(double gamma, double tolerance) const {
    const std::size_t cells = size_ * size_;
    const std::size_t goal = cells - 1;
    std::vector<double> v(cells, 0.0);
    for (int sweep = 0; sweep < 1000000; ++sweep) {
        double change = 0.0;
        for (std::size_t s = 0; s < cells; ++s) {
            if (s == goal) continue;
            const std::size_t r = s / size_;
            const std::size_t c = s % size_;
            const std::size_t next[4] = {
                (r == 0 ? 0 : r - 1) * size_ + c,
                r * size_ + std::min(c + 1, size_ - 1),
                std::min(r + 1, size_ - 1) * size_ + c,
                r * size_ + (c == 0 ? 0 : c - 1),
            };
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t n : next) {
                const double q = n == goal ? 1.0 : -step_cost_ + gamma * v[n];
                best = std::max(best, q);
            }
            change = std::max(change, std::abs(best - v[s]));
            v[s] = best;
        }
        if (change < tolerance) return v;
    }
    throw std::runtime_error("Gridworld::optimal_values: value iteration did not converge");
}

double Gridworld::optimal_return() const { return optimal_values(1.0).front(); }

// --- PoleBalance -----------------------------------------------------------

EnvSpec PoleBalance::spec() const { return {4, ActionSpace::discrete(2), std::nullopt}; }

std::vector<double> PoleBalance::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_ = Rng(*seed);
    state_ = {rng_.uniform(-0.05, 0.05), rng_.uniform(-0.05, 0.05), rng_.uniform(-0.05, 0.05),
              rng_.uniform(-0.05, 0.05)};
    return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
}

PoleBalance::State PoleBalance::integrate(const State& s, double force) {
    constexpr double total_mass = kCartMass + kPoleMass;
    constexpr double pole_mass_length = kPoleMass * kHalfLength;
    const double cos_t = std::cos(s.theta);
    const double sin_t = std::sin(s.theta);
    const double temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
    return {s.x + kDt * s.x_dot, s.x_dot + kDt * x_acc, s.theta + kDt * s.theta_dot, s.theta_dot + kDt * theta_acc};
}

double PoleBalance::energy(const State& s) {
    const double kinetic = 0.5 * (kCartMass + kPoleMass) * s.x_dot * s.x_dot +
                           kPoleMass * kHalfLength * s.x_dot * s.theta_dot * std::cos(s.theta) +
                           0.5 * (4.0 / 3.0) * kPoleMass * kHalfLength * kHalfLength * s.theta_dot * s.theta_dot;
    return kinetic + kPoleMass * kGravity * kHalfLength * std::cos(s.theta);
}

double PoleBalance::horizontal_momentum(const State& s) {
    return (kCartMass + kPoleMass) * s.x_dot + kPoleMass * kHalfLength * s.theta_dot * std::cos(s.theta);
}

EnvStep PoleBalance::step(const Action& action) {
    const std::size_t a = discrete_action(action, 2, "PoleBalance::step");
    state_ = integrate(state_, a == 1 ? kForce : -kForce);
    const bool failed = std::abs(state_.x) > kXLimit || std::abs(state_.theta) > kThetaLimit;
    return {{state_.x, state_.x_dot, state_.theta, state_.theta_dot}, 1.0, failed, false};
}

// --- PointMassReacher ------------------------------------------------------

EnvSpec PointMassReacher::spec() const { return {4, ActionSpace::continuous(2), std::nullopt}; }

std::vector<double> PointMassReacher::observe() const { return {pos_[0], pos_[1], vel_[0], vel_[1]}; }

std::vector<double> PointMassReacher::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_ = Rng(*seed);
    for (int i = 0; i < 2; ++i) {
        pos_[i] = rng_.uniform(-1.0, 1.0);
        vel_[i] = 0.0;
    }
    return observe();
}

EnvStep PointMassReacher::step(const Action& action) {
    const auto& a = continuous_action(action, 2, "PointMassReacher::step");
    for (int i = 0; i < 2; ++i) {
        const double force = std::clamp(a[i], -1.0, 1.0);
        vel_[i] += kDt * (2.0 * force - vel_[i]);
        pos_[i] += kDt * vel_[i];
        if (std::abs(pos_[i]) > 2.0) {
            pos_[i] = std::copysign(2.0, pos_[i]);
            vel_[i] = 0.0;
        }
    }
    const double distance = std::hypot(pos_[0], pos_[1]);
    return {observe(), -distance, false, false};
}

// --- TimeLimit -------------------------------------------------------------

TimeLimit::TimeLimit(std::unique_ptr<Environment> inner, std::int64_t max_steps)
    : inner_(std::move(inner)), max_steps_(max_steps) {
    if (!inner_) throw std::invalid_argument("TimeLimit: null environment");
    if (max_steps < 1) throw std::invalid_argument("TimeLimit: max_steps must be >= 1");
}

EnvSpec TimeLimit::spec() const {
    auto s = inner_->spec();
    s.observation_dim += 1;
    s.max_episode_steps = max_steps_;
    return s;
}

double TimeLimit::time_feature() const {
    return static_cast<double>(elapsed_) / static_cast<double>(max_steps_) - 0.5;
}

std::vector<double> TimeLimit::reset(std::optional<std::uint64_t> seed) {
    elapsed_ = 0;
    auto obs = inner_->reset(seed);
    obs.push_back(time_feature());
    return obs;
}

EnvStep TimeLimit::step(const Action& action) {
    auto result = inner_->step(action);
    ++elapsed_;
    result.observation.push_back(time_feature());
    if (elapsed_ >= max_steps_ && !result.terminated) result.truncated = true;
    return result;
}

// --- registry --------------------------------------------------------------

bool is_known_env(const std::string& id) {
    return id == "random_walk" || id == "gridworld" || id == "pole_balance" || id == "point_mass";
}

std::unique_ptr<Environment> make_env(const std::string& id) {
    if (id == "random_walk") return std::make_unique<RandomWalk>(5);
    if (id == "gridworld") return std::make_unique<TimeLimit>(std::make_unique<Gridworld>(5), 100);
    if (id == "pole_balance") return std::make_unique<TimeLimit>(std::make_unique<PoleBalance>(), 500);
    if (id == "point_mass") return std::make_unique<TimeLimit>(std::make_unique<PointMassReacher>(), 200);
    throw std::invalid_argument("unknown environment id '" + id + "'");
}

}  // namespace streamx
