#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "streamx/envs.hpp"
#include "streamx/net.hpp"
#include "streamx/optim.hpp"
#include "streamx/policy.hpp"
#include "streamx/rng.hpp"
#include "streamx/scaling.hpp"
#include "streamx/traces.hpp"

namespace streamx {

/// Linear decay from `start` to `end` over the first `end_fraction` of the
/// step budget, then constant.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.01;
    double end_fraction = 0.05;

    double at(std::int64_t step, std::int64_t total_steps) const;
};

enum class AgentKind { StreamTD, StreamQ, StreamSarsa, StreamAC };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

struct AgentConfig {
    double gamma = 0.99;
    double lambda = 0.8;
    double alpha = 1.0;
    double kappa = 2.0;
    double kappa_pi = 3.0;
    double tau = 0.01;
    double sparsity = 0.9;
    EpsilonSchedule epsilon;
    OptimizerKind optimizer = OptimizerKind::ObGD;
    std::vector<std::size_t> hidden{128, 128};

    // Ablation toggles.
    bool layernorm = true;
    bool sparse_init = true;
    bool obs_norm = true;
    bool reward_scale = true;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const;

    /// Un-streamlined baseline: no layernorm, dense init, no data scaling and
    /// the adaptive-moments optimizer at `alpha`.
    static AgentConfig classic(double alpha);
};

/// What one learning step observed and did.
struct StepInfo {
    double delta = 0.0;
    double estimate = 0.0;  // v(S) or q(S, A) before the update
    StepStats value_step;   // value / action-value network
    StepStats policy_step;  // actor network (stream AC only)
    double measured_xi = std::numeric_limits<double>::quiet_NaN();
};

/// Scalers and toggles shared by every agent.
class DataScaling {
public:
    DataScaling(std::size_t obs_dim, bool obs_norm, bool reward_scale);

    std::vector<double> observation(std::span<const double> s);
    std::vector<double> peek_observation(std::span<const double> s) const;
    double reward(double r, double gamma, bool terminated);
    /// Factor mapping scaled values back to raw units (1 when disabled).
    double reward_scale_factor() const;

    const ObservationNormalizer& observation_normalizer() const { return obs_; }
    ObservationNormalizer& observation_normalizer() { return obs_; }
    const RewardScaler& reward_scaler() const { return reward_; }
    RewardScaler& reward_scaler() { return reward_; }
    bool all_finite() const;

private:
    ObservationNormalizer obs_;
    RewardScaler reward_;
    bool obs_norm_;
    bool reward_scale_;
};

/// Builds a network per the config (hidden widths, layernorm toggle) and
/// initializes it sparsely or densely.
Network make_agent_network(const AgentConfig& cfg, std::size_t input_width, std::size_t output_width, Rng& init_rng);

/// Stream TD(lambda) value prediction.
class StreamTdAgent {
public:
    StreamTdAgent(const AgentConfig& cfg, std::size_t obs_dim, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    DataScaling& scaling() { return scaling_; }
    const DataScaling& scaling() const { return scaling_; }
    Network& network() { return net_; }
    const Network& network() const { return net_; }
    const TraceSet& trace() const { return trace_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t steps) { steps_ = steps; }
    void set_audit(bool on) { audit_ = on; }

    void begin_episode();
    double value(std::span<const double> s_norm) const;

    /// delta = r + gamma v(S') - v(S) (v(S') = 0 on termination);
    /// z <- gamma lambda z + grad v(S); optimizer step with (z, delta).
    StepInfo update(std::span<const double> s, std::span<const double> s_next, double reward, bool terminated);

private:
    AgentConfig cfg_;
    Rng init_rng_;
    Network net_;
    TraceSet trace_;
    Optimizer opt_;
    DataScaling scaling_;
    std::int64_t steps_ = 0;
    bool audit_ = false;
    Tape tape_;
};

struct ActionChoice {
    std::size_t action = 0;
    bool greedy = true;
};

/// Shared machinery of the action-value agents.
class ActionValueAgent {
public:
    ActionValueAgent(const AgentConfig& cfg, std::size_t obs_dim, std::size_t action_count, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    DataScaling& scaling() { return scaling_; }
    const DataScaling& scaling() const { return scaling_; }
    Network& network() { return net_; }
    const Network& network() const { return net_; }
    const TraceSet& trace() const { return trace_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t steps) { steps_ = steps; }
    std::size_t action_count() const { return net_.output_width(); }
    void set_audit(bool on) { audit_ = on; }

    void begin_episode();
    std::vector<double> action_values(std::span<const double> s_norm) const;

    /// Epsilon-greedy choice. Greedy means within 1e-9 of the best value, so
    /// exploratory draws that hit a tied maximum count as greedy.
    ActionChoice select_action(std::span<const double> s_norm, double epsilon);

protected:
    StepInfo learn(std::span<const double> s, std::size_t action, std::span<const double> s_next, double reward,
                   bool terminated, const std::function<double(const std::vector<double>&)>& next_value);

    AgentConfig cfg_;
    Rng init_rng_;
    Rng explore_rng_;
    Network net_;
    TraceSet trace_;
    Optimizer opt_;
    DataScaling scaling_;
    std::int64_t steps_ = 0;
    bool audit_ = false;
    Tape tape_;
};

inline constexpr double kGreedyTolerance = 1e-9;

/// Stream Q(lambda) with Watkins trace cuts.
class StreamQAgent : public ActionValueAgent {
public:
    using ActionValueAgent::ActionValueAgent;

    /// Cuts the trace first when the action was exploratory, then
    /// delta = r + gamma max_a q(S', a) - q(S, A).
    StepInfo update(std::span<const double> s, std::size_t action, std::span<const double> s_next, double reward,
                    bool terminated, bool was_greedy);
};

/// Stream SARSA(lambda): on-policy target q(S', A'), no trace cut.
class StreamSarsaAgent : public ActionValueAgent {
public:
    using ActionValueAgent::ActionValueAgent;

    StepInfo update(std::span<const double> s, std::size_t action, std::span<const double> s_next,
                    std::size_t next_action, double reward, bool terminated);
};

/// Action drawn by the actor: the env-facing action plus what the gradient
/// needs (discrete index or pre-clamp continuous draw).
struct PolicySample {
    Action action;
    std::size_t index = 0;
    std::vector<double> raw;
    double log_prob = 0.0;
};

/// Stream AC(lambda) with separate actor and critic networks.
class StreamAcAgent {
public:
    StreamAcAgent(const AgentConfig& cfg, std::size_t obs_dim, const ActionSpace& actions, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    DataScaling& scaling() { return scaling_; }
    const DataScaling& scaling() const { return scaling_; }
    Network& critic() { return critic_; }
    const Network& critic() const { return critic_; }
    Network& actor() { return actor_; }
    const Network& actor() const { return actor_; }
    const PolicyHead& head() const { return head_; }
    const TraceSet& critic_trace() const { return critic_trace_; }
    const TraceSet& actor_trace() const { return actor_trace_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t steps) { steps_ = steps; }
    void set_audit(bool on) { audit_ = on; }

    void begin_episode();
    double value(std::span<const double> s_norm) const;
    PolicySample act(std::span<const double> s_norm);

    /// Critic: TD error, z_w <- gamma lambda z_w + grad v(S).
    /// Actor: z_theta <- gamma lambda z_theta + grad(log pi + tau sign(delta) H).
    /// Both networks step with the same delta (actor with kappa_pi).
    StepInfo update(std::span<const double> s, const PolicySample& sample, std::span<const double> s_next,
                    double reward, bool terminated);

private:
    AgentConfig cfg_;
    Rng init_rng_;
    Rng explore_rng_;
    PolicyHead head_;
    Network critic_;
    Network actor_;
    TraceSet critic_trace_;
    TraceSet actor_trace_;
    Optimizer critic_opt_;
    Optimizer actor_opt_;
    DataScaling scaling_;
    std::int64_t steps_ = 0;
    bool audit_ = false;
    Tape critic_tape_;
    Tape actor_tape_;
    std::vector<double> actor_tape_input_;
    bool actor_tape_valid_ = false;
};

using AnyAgent = std::variant<StreamTdAgent, StreamQAgent, StreamSarsaAgent, StreamAcAgent>;

AnyAgent make_agent(AgentKind kind, const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);

// --- run loop --------------------------------------------------------------

struct EpisodeRecord {
    std::int64_t episode_index = 0;
    std::int64_t steps = 0;
    double raw_return = 0.0;
    double mean_delta = 0.0;  // mean |delta| over the episode
    double clip_fraction = 0.0;
    std::int64_t end_step = 0;  // global step count when the episode ended
};

struct AuditRow {
    std::int64_t step = 0;
    double delta = 0.0;
    double z_l1 = 0.0;
    double bound = 0.0;
    double alpha_eff = 0.0;
    double measured_xi = 0.0;
};

struct RunLog {
    std::vector<EpisodeRecord> episodes;
    std::vector<AuditRow> audit;
    std::int64_t steps_done = 0;
    bool diverged = false;
    std::string diagnostic;
};

struct RunOptions {
    std::int64_t total_steps = 0;
    std::uint64_t seed = 0;
    bool audit = false;
    /// Checked after every completed episode; returning true ends the run.
    std::function<bool(const RunLog&)> stop_after_episode;
    /// Observes every learning step (global step index, step details).
    std::function<void(std::int64_t, const StepInfo&)> on_step;
};

/// Executes the agent's listing loop against `env`: normalize S, act, step,
/// normalize S', scale R, learn, S <- S'. Traces reset at every episode start.
/// Non-finite values end the run with `diverged` set.
RunLog run_stream(AnyAgent& agent, Environment& env, const RunOptions& opts);

/// Mean return of the last `window` episodes (all of them if fewer).
double trailing_mean_return(const RunLog& log, std::size_t window);

}  // namespace streamx
