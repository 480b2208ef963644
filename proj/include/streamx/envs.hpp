#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "streamx/rng.hpp"

namespace streamx {

struct EnvStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
};

struct ActionSpace {
    enum class Kind { Discrete, Continuous };
    Kind kind = Kind::Discrete;
    std::size_t size = 1;  // action count (Discrete) or dimension (Continuous, bounds [-1, 1])

    static ActionSpace discrete(std::size_t k) { return {Kind::Discrete, k}; }
    static ActionSpace continuous(std::size_t d) { return {Kind::Continuous, d}; }
    bool is_discrete() const { return kind == Kind::Discrete; }
};

struct EnvSpec {
    std::size_t observation_dim = 1;
    ActionSpace action_space;
    std::optional<std::int64_t> max_episode_steps;
};

/// Discrete action index or continuous action vector.
using Action = std::variant<std::size_t, std::vector<double>>;

class Environment {
public:
    virtual ~Environment() = default;

    virtual EnvSpec spec() const = 0;
    /// Starts an episode. A seed reseeds the environment's random stream;
    /// without one the stream simply continues.
    virtual std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
    virtual EnvStep step(const Action& action) = 0;
    virtual std::string id() const = 0;
};

/// Chain of `n` states starting in the middle. Each step moves left or right
/// with equal probability; leaving on the right pays 1, on the left 0.
/// Observations are one-hot; the terminal observation is all zeros.
class RandomWalk final : public Environment {
public:
    explicit RandomWalk(std::size_t n = 5);

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return "random_walk"; }

    std::size_t state() const { return state_; }
    std::vector<double> one_hot(std::size_t state) const;

    /// State values under the fixed random policy, by value iteration.
    std::vector<double> true_values(double gamma, double tolerance = 1e-12) const;

private:
    std::size_t n_;
    std::size_t state_ = 0;
    Rng rng_{0};
};

/// Deterministic grid: start (0,0), goal (size-1,size-1). Actions up, right,
/// down, left; moves into a wall leave the agent in place. Reaching the goal
/// pays +1 and terminates; every other step costs `step_cost`.
class Gridworld final : public Environment {
public:
    explicit Gridworld(std::size_t size = 5, double step_cost = 0.01);

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return "gridworld"; }

    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }
    std::size_t size() const { return size_; }
    std::vector<double> one_hot(std::size_t row, std::size_t col) const;

    /// Optimal state values by value iteration to `tolerance`.
    std::vector<double> optimal_values(double gamma, double tolerance = 1e-12) const;
    /// Optimal undiscounted episode return from the start cell.
    double optimal_return() const;

private:
    std::size_t size_;
    double step_cost_;
    std::size_t row_ = 0;
    std::size_t col_ = 0;
};

/// Cart-pole with the classic Barto-Sutton-Anderson parameters and explicit
/// Euler integration. Two actions push left / right with 10 N.
class PoleBalance final : public Environment {
public:
    struct State {
        double x = 0.0;
        double x_dot = 0.0;
        double theta = 0.0;
        double theta_dot = 0.0;
    };

    static constexpr double kGravity = 9.8;
    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kForce = 10.0;
    static constexpr double kDt = 0.02;
    static constexpr double kThetaLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
    static constexpr double kXLimit = 2.4;

    PoleBalance() = default;

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return "pole_balance"; }

    const State& state() const { return state_; }
    void set_state(const State& s) { state_ = s; }

    static State integrate(const State& s, double force);
    /// Mechanical energy (cart + uniform rod pivoting on the cart).
    static double energy(const State& s);
    /// Horizontal momentum, conserved when no force is applied.
    static double horizontal_momentum(const State& s);

private:
    State state_;
    Rng rng_{0};
};

/// Point mass on a plane pushed by a bounded 2-D force toward the origin.
/// Observation [x, y, vx, vy]; reward is minus the distance to the origin.
class PointMassReacher final : public Environment {
public:
    static constexpr double kDt = 0.1;

    PointMassReacher() = default;

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return "point_mass"; }

private:
    std::vector<double> observe() const;

    double pos_[2] = {0.0, 0.0};
    double vel_[2] = {0.0, 0.0};
    Rng rng_{0};
};

/// Appends the normalized elapsed time t / T_max - 1/2 to every observation
/// and sets `truncated` (never `terminated`) once T_max steps have elapsed.
class TimeLimit final : public Environment {
public:
    TimeLimit(std::unique_ptr<Environment> inner, std::int64_t max_steps);

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return inner_->id(); }

    std::int64_t elapsed() const { return elapsed_; }
    Environment& inner() { return *inner_; }

private:
    double time_feature() const;

    std::unique_ptr<Environment> inner_;
    std::int64_t max_steps_;
    std::int64_t elapsed_ = 0;
};

// --- time series -----------------------------------------------------------

/// Numeric table read from a CSV file with a header row.
struct TimeSeriesTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(const std::string& name) const;
    std::vector<double> column(const std::string& name) const;
};

/// Parses a comma-separated file. Columns named `date` or `timestamp` are
/// skipped; every other cell must be numeric.
TimeSeriesTable load_timeseries_csv(const std::filesystem::path& path);
TimeSeriesTable parse_timeseries_csv(const std::string& text);

/// Synthetic ETT-like series: six load features and an `OT` target built from
/// daily and yearly cycles, a slow trend and white measurement noise.
TimeSeriesTable synthetic_series(std::size_t rows, std::uint64_t seed);
void write_timeseries_csv(const TimeSeriesTable& table, const std::filesystem::path& path);

/// Stream over a table for GVF prediction. At row t the raw observation is
/// [features_t..., cumulant_{t-1}], and the agent sees its memory trace
/// S_t = beta S_{t-1} + (1 - beta) O_t (starting from zero). Moving from row t
/// to t+1 emits cumulant_t as reward. Never terminates; the final transition
/// is truncated.
class TimeSeriesStream final : public Environment {
public:
    TimeSeriesStream(TimeSeriesTable table, const std::string& cumulant_column, double beta);

    EnvSpec spec() const override;
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    EnvStep step(const Action& action) override;
    std::string id() const override { return "timeseries"; }

    /// Reward of every transition in stream order.
    std::vector<double> cumulants() const;
    std::size_t transition_count() const { return table_.rows.size() - 2; }

private:
    std::vector<double> raw_observation(std::size_t row) const;
    void fold(std::size_t row);

    TimeSeriesTable table_;
    std::size_t cumulant_index_;
    std::vector<std::size_t> feature_indices_;
    double beta_;
    std::size_t row_ = 1;
    std::vector<double> trace_;
};

/// Backward accumulation G_i = c_i + gamma G_{i+1}, with G = 0 past the end.
std::vector<double> discounted_returns(std::span<const double> cumulants, double gamma);

/// Builds an environment by id: random_walk, gridworld, pole_balance,
/// point_mass. Control tasks come wrapped in their TimeLimit.
std::unique_ptr<Environment> make_env(const std::string& id);
bool is_known_env(const std::string& id);

}  // namespace streamx
