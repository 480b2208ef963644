#include "streamx/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "streamx/errors.hpp"

namespace streamx {
namespace {

// Independent random streams per purpose.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kExploreStream = 2;
constexpr std::uint64_t kEnvStream = 3;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_finite(const Network& net, const TraceSet& trace, const char* what) {
    if (!all_finite(net.params())) throw DivergenceError(std::string(what) + ": non-finite parameters");
    if (!trace.all_finite()) throw DivergenceError(std::string(what) + ": non-finite eligibility trace");
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double effective_step(double delta, double delta_after) {
    return delta != 0.0 ? (delta - delta_after) / delta : std::numeric_limits<double>::quiet_NaN();
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

// --- configuration ---------------------------------------------------------

double EpsilonSchedule::at(std::int64_t step, std::int64_t total_steps) const {
    const double horizon = end_fraction * static_cast<double>(total_steps);
    if (!(horizon > 0.0) || static_cast<double>(step) >= horizon) return end;
    return start + (end - start) * static_cast<double>(step) / horizon;
}

std::string_view to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::StreamTD: return "stream_td";
        case AgentKind::StreamQ: return "stream_q";
        case AgentKind::StreamSarsa: return "stream_sarsa";
        case AgentKind::StreamAC: return "stream_ac";
    }
    return "unknown";
}

AgentKind parse_agent_kind(std::string_view name) {
    if (name == "stream_td" || name == "td") return AgentKind::StreamTD;
    if (name == "stream_q" || name == "q") return AgentKind::StreamQ;
    if (name == "stream_sarsa" || name == "sarsa") return AgentKind::StreamSarsa;
    if (name == "stream_ac" || name == "ac") return AgentKind::StreamAC;
    throw std::invalid_argument("unknown agent '" + std::string(name) + "'");
}

void AgentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("agent config: " + msg); };
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
    if (!(kappa > 1.0) || !std::isfinite(kappa)) fail("kappa must exceed 1");
    if (!(kappa_pi > 1.0) || !std::isfinite(kappa_pi)) fail("kappa_pi must exceed 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) fail("tau must be non-negative");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0, 1)");
    if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0)) fail("epsilon start must lie in [0, 1]");
    if (!(epsilon.end >= 0.0 && epsilon.end <= 1.0)) fail("epsilon end must lie in [0, 1]");
    if (!(epsilon.end_fraction >= 0.0 && epsilon.end_fraction <= 1.0)) fail("epsilon end_fraction must lie in [0, 1]");
    for (auto h : hidden) {
        if (h == 0) fail("hidden widths must be positive");
    }
}

AgentConfig AgentConfig::classic(double alpha) {
    AgentConfig cfg;
    cfg.alpha = alpha;
    cfg.optimizer = OptimizerKind::AdaptiveMoments;
    cfg.layernorm = false;
    cfg.sparse_init = false;
    cfg.obs_norm = false;
    cfg.reward_scale = false;
    return cfg;
}

// --- DataScaling -----------------------------------------------------------

DataScaling::DataScaling(std::size_t obs_dim, bool obs_norm, bool reward_scale)
    : obs_(obs_dim), obs_norm_(obs_norm), reward_scale_(reward_scale) {}

std::vector<double> DataScaling::observation(std::span<const double> s) {
    require_dims(s.size(), obs_.moments().dim(), "observation");
    if (!obs_norm_) return {s.begin(), s.end()};
    return obs_.normalize(s);
}

std::vector<double> DataScaling::peek_observation(std::span<const double> s) const {
    require_dims(s.size(), obs_.moments().dim(), "observation");
    if (!obs_norm_) return {s.begin(), s.end()};
    return obs_.transform(s);
}

double DataScaling::reward(double r, double gamma, bool terminated) {
    if (!reward_scale_) return r;
    return reward_.scale(r, gamma, terminated);
}

double DataScaling::reward_scale_factor() const { return reward_scale_ ? reward_.scale_factor() : 1.0; }

bool DataScaling::all_finite() const {
    const auto& m = obs_.moments();
    return streamx::all_finite(m.mean()) && streamx::all_finite(m.p()) && std::isfinite(reward_.u()) &&
           std::isfinite(reward_.p()) && std::isfinite(reward_.variance());
}

Network make_agent_network(const AgentConfig& cfg, std::size_t input_width, std::size_t output_width, Rng& init_rng) {
    Network net = Network::mlp(input_width, cfg.hidden, output_width, cfg.layernorm);
    sparse_init(net, cfg.sparse_init ? cfg.sparsity : 0.0, init_rng);
    return net;
}

// --- StreamTdAgent ---------------------------------------------------------

StreamTdAgent::StreamTdAgent(const AgentConfig& cfg, std::size_t obs_dim, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(derive_seed(seed, kInitStream)),
      net_(make_agent_network(cfg_, obs_dim, 1, init_rng_)),
      trace_(net_.param_count(), cfg_.gamma, cfg_.lambda),
      opt_(cfg_.optimizer, net_.param_count(), cfg_.alpha, cfg_.kappa),
      scaling_(obs_dim, cfg_.obs_norm, cfg_.reward_scale) {}

void StreamTdAgent::begin_episode() { trace_.reset(); }

double StreamTdAgent::value(std::span<const double> s_norm) const { return net_.predict(s_norm)[0]; }

StepInfo StreamTdAgent::update(std::span<const double> s, std::span<const double> s_next, double reward,
                               bool terminated) {
    StepInfo info;
    info.estimate = net_.forward(s, tape_)[0];
    const double v_next = terminated ? 0.0 : value(s_next);
    info.delta = reward + cfg_.gamma * v_next - info.estimate;
    if (!std::isfinite(info.delta)) throw DivergenceError("stream TD: non-finite TD error");

    const double one = 1.0;
    trace_.accumulate(net_.backward(tape_, std::span<const double>(&one, 1)));
    info.value_step = opt_.step(net_.mutable_params(), trace_.values(), info.delta);
    ++steps_;
    check_finite(net_, trace_, "stream TD");

    if (audit_) {
        const double after = reward + (terminated ? 0.0 : cfg_.gamma * value(s_next)) - value(s);
        info.measured_xi = effective_step(info.delta, after);
    }
    return info;
}

// --- action-value agents ---------------------------------------------------

ActionValueAgent::ActionValueAgent(const AgentConfig& cfg, std::size_t obs_dim, std::size_t action_count,
                                   std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(derive_seed(seed, kInitStream)),
      explore_rng_(derive_seed(seed, kExploreStream)),
      net_(make_agent_network(cfg_, obs_dim, action_count, init_rng_)),
      trace_(net_.param_count(), cfg_.gamma, cfg_.lambda),
      opt_(cfg_.optimizer, net_.param_count(), cfg_.alpha, cfg_.kappa),
      scaling_(obs_dim, cfg_.obs_norm, cfg_.reward_scale) {}

void ActionValueAgent::begin_episode() { trace_.reset(); }

std::vector<double> ActionValueAgent::action_values(std::span<const double> s_norm) const {
    return net_.predict(s_norm);
}

ActionChoice ActionValueAgent::select_action(std::span<const double> s_norm, double epsilon) {
    const auto q = action_values(s_norm);
    if (!all_finite(q)) throw DivergenceError("action values are non-finite");
    const std::size_t best = argmax(q);
    std::size_t action = best;
    if (explore_rng_.uniform() < epsilon) action = explore_rng_.index(q.size());
    return {action, q[action] >= q[best] - kGreedyTolerance};
}

StepInfo ActionValueAgent::learn(std::span<const double> s, std::size_t action, std::span<const double> s_next,
                                 double reward, bool terminated,
                                 const std::function<double(const std::vector<double>&)>& next_value) {
    if (action >= action_count()) throw std::out_of_range("action index out of range");
    StepInfo info;
    info.estimate = net_.forward(s, tape_)[action];
    const double q_next = terminated ? 0.0 : next_value(net_.predict(s_next));
    info.delta = reward + cfg_.gamma * q_next - info.estimate;
    if (!std::isfinite(info.delta)) throw DivergenceError("action-value agent: non-finite TD error");

    std::vector<double> dy(action_count(), 0.0);
    dy[action] = 1.0;
    trace_.accumulate(net_.backward(tape_, dy));
    info.value_step = opt_.step(net_.mutable_params(), trace_.values(), info.delta);
    ++steps_;
    check_finite(net_, trace_, "action-value agent");

    if (audit_) {
        const double boot = terminated ? 0.0 : cfg_.gamma * next_value(net_.predict(s_next));
        const double after = reward + boot - net_.predict(s)[action];
        info.measured_xi = effective_step(info.delta, after);
    }
    return info;
}

StepInfo StreamQAgent::update(std::span<const double> s, std::size_t action, std::span<const double> s_next,
                              double reward, bool terminated, bool was_greedy) {
    if (!was_greedy) trace_.reset();
    return learn(s, action, s_next, reward, terminated,
                 [](const std::vector<double>& q) { return *std::max_element(q.begin(), q.end()); });
}

StepInfo StreamSarsaAgent::update(std::span<const double> s, std::size_t action, std::span<const double> s_next,
                                  std::size_t next_action, double reward, bool terminated) {
    if (next_action >= action_count()) throw std::out_of_range("next action index out of range");
    return learn(s, action, s_next, reward, terminated,
                 [next_action](const std::vector<double>& q) { return q[next_action]; });
}

// --- StreamAcAgent ---------------------------------------------------------

namespace {

PolicyHead make_head(const ActionSpace& actions) {
    if (actions.is_discrete()) return SoftmaxHead(actions.size);
    return GaussianHead(actions.size);
}

}  // namespace

StreamAcAgent::StreamAcAgent(const AgentConfig& cfg, std::size_t obs_dim, const ActionSpace& actions,
                             std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(derive_seed(seed, kInitStream)),
      explore_rng_(derive_seed(seed, kExploreStream)),
      head_(make_head(actions)),
      critic_(make_agent_network(cfg_, obs_dim, 1, init_rng_)),
      actor_(make_agent_network(cfg_, obs_dim, trunk_width(head_), init_rng_)),
      critic_trace_(critic_.param_count(), cfg_.gamma, cfg_.lambda),
      actor_trace_(actor_.param_count(), cfg_.gamma, cfg_.lambda),
      critic_opt_(cfg_.optimizer, critic_.param_count(), cfg_.alpha, cfg_.kappa),
      actor_opt_(cfg_.optimizer, actor_.param_count(), cfg_.alpha, cfg_.kappa_pi),
      scaling_(obs_dim, cfg_.obs_norm, cfg_.reward_scale) {}

void StreamAcAgent::begin_episode() {
    critic_trace_.reset();
    actor_trace_.reset();
}

double StreamAcAgent::value(std::span<const double> s_norm) const { return critic_.predict(s_norm)[0]; }

PolicySample StreamAcAgent::act(std::span<const double> s_norm) {
    const auto out = actor_.forward(s_norm, actor_tape_);
    actor_tape_input_.assign(s_norm.begin(), s_norm.end());
    actor_tape_valid_ = true;
    PolicySample sample;
    if (const auto* softmax = std::get_if<SoftmaxHead>(&head_)) {
        const auto draw = softmax->sample(out, explore_rng_);
        sample.action = draw.action;
        sample.index = draw.action;
        sample.log_prob = draw.log_prob;
    } else {
        auto draw = std::get<GaussianHead>(head_).sample(out, explore_rng_);
        sample.action = std::move(draw.clamped);
        sample.raw = std::move(draw.raw);
        sample.log_prob = draw.log_prob;
    }
    return sample;
}

StepInfo StreamAcAgent::update(std::span<const double> s, const PolicySample& sample,
                               std::span<const double> s_next, double reward, bool terminated) {
    StepInfo info;
    info.estimate = critic_.forward(s, critic_tape_)[0];
    const double v_next = terminated ? 0.0 : value(s_next);
    info.delta = reward + cfg_.gamma * v_next - info.estimate;
    if (!std::isfinite(info.delta)) throw DivergenceError("stream AC: non-finite TD error");

    const double one = 1.0;
    critic_trace_.accumulate(critic_.backward(critic_tape_, std::span<const double>(&one, 1)));

    // Reuse the tape recorded by act() when it belongs to this state.
    const bool reuse = actor_tape_valid_ && std::equal(s.begin(), s.end(), actor_tape_input_.begin(),
                                                       actor_tape_input_.end());
    if (!reuse) actor_.forward(s, actor_tape_);
    actor_tape_valid_ = false;
    const int sign = sign_of(info.delta);
    const auto g = std::visit(
        [&](const auto& head) -> GradientBuffer {
            using Head = std::decay_t<decltype(head)>;
            if constexpr (std::is_same_v<Head, SoftmaxHead>) {
                return logprob_and_entropy_grad(head, actor_, actor_tape_, sample.index, cfg_.tau, sign);
            } else {
                return logprob_and_entropy_grad(head, actor_, actor_tape_, sample.raw, cfg_.tau, sign);
            }
        },
        head_);
    actor_trace_.accumulate(g);

    info.policy_step = actor_opt_.step(actor_.mutable_params(), actor_trace_.values(), info.delta);
    info.value_step = critic_opt_.step(critic_.mutable_params(), critic_trace_.values(), info.delta);
    ++steps_;
    check_finite(critic_, critic_trace_, "stream AC critic");
    check_finite(actor_, actor_trace_, "stream AC actor");

    if (audit_) {
        const double after = reward + (terminated ? 0.0 : cfg_.gamma * value(s_next)) - value(s);
        info.measured_xi = effective_step(info.delta, after);
    }
    return info;
}

// --- factory ---------------------------------------------------------------

AnyAgent make_agent(AgentKind kind, const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed) {
    const auto& actions = env.action_space;
    switch (kind) {
        case AgentKind::StreamTD: return StreamTdAgent(cfg, env.observation_dim, seed);
        case AgentKind::StreamQ:
        case AgentKind::StreamSarsa:
            if (!actions.is_discrete()) {
                throw std::invalid_argument(std::string(to_string(kind)) + " needs a discrete action space");
            }
            if (kind == AgentKind::StreamQ) return StreamQAgent(cfg, env.observation_dim, actions.size, seed);
            return StreamSarsaAgent(cfg, env.observation_dim, actions.size, seed);
        case AgentKind::StreamAC: return StreamAcAgent(cfg, env.observation_dim, actions, seed);
    }
    throw std::invalid_argument("unknown agent kind");
}

// --- run loop --------------------------------------------------------------

namespace {

/// Per-episode accumulator.
struct EpisodeTally {
    std::int64_t steps = 0;
    double raw_return = 0.0;
    double abs_delta = 0.0;
    std::int64_t clipped = 0;

    void add(double reward, const StepInfo& info) {
        ++steps;
        raw_return += reward;
        abs_delta += std::abs(info.delta);
        clipped += info.value_step.clipped ? 1 : 0;
    }

    EpisodeRecord finish(std::int64_t index, std::int64_t end_step) const {
        const double n = std::max<double>(1.0, static_cast<double>(steps));
        return {index, steps, raw_return, abs_delta / n, static_cast<double>(clipped) / n, end_step};
    }
};

/// Shared episode loop. `choose(S, t)` picks the choice for S at step t;
/// `learn(S, choice, S', r, terminated, t)` returns the step details and,
/// for agents that pick A' before learning, the next choice. Otherwise the
/// next choice is made after the update with the new weights.
template <class Agent, class Choose, class Learn>
void drive(Agent& agent, Environment& env, const RunOptions& opts, RunLog& log, Choose choose, Learn learn) {
    auto& scaling = agent.scaling();
    const double gamma = agent.config().gamma;
    EpisodeTally tally;
    std::int64_t episode = 0;

    auto s = scaling.observation(env.reset(derive_seed(opts.seed, kEnvStream)));
    agent.begin_episode();
    auto choice = choose(s, std::int64_t{0});

    for (std::int64_t t = 0; t < opts.total_steps; ++t) {
        const EnvStep st = env.step(choice.env_action());
        auto s_next = scaling.observation(st.observation);
        const double r = scaling.reward(st.reward, gamma, st.terminated);
        auto [info, next_choice] = learn(s, choice, s_next, r, st.terminated, t);
        if (!scaling.all_finite()) throw DivergenceError("non-finite scaler statistics");

        log.steps_done = t + 1;
        tally.add(st.reward, info);
        if (opts.audit) {
            log.audit.push_back({t, info.delta, info.value_step.z_l1, info.value_step.bound,
                                 info.value_step.alpha_eff, info.measured_xi});
        }
        if (opts.on_step) opts.on_step(t, info);

        if (st.terminated || st.truncated) {
            log.episodes.push_back(tally.finish(episode++, t + 1));
            tally = {};
            if (opts.stop_after_episode && opts.stop_after_episode(log)) return;
            if (t + 1 == opts.total_steps) return;
            s = scaling.observation(env.reset());
            agent.begin_episode();
            choice = choose(s, t + 1);
        } else {
            choice = next_choice ? std::move(*next_choice) : choose(s_next, t + 1);
            s = std::move(s_next);
        }
    }
}

struct NoChoice {
    Action action;
    Action env_action() const { return action; }
};

struct GreedyChoice {
    ActionChoice choice;
    Action env_action() const { return choice.action; }
};

struct AcChoice {
    PolicySample sample;
    Action env_action() const { return sample.action; }
};

/// Prediction agents follow a fixed behavior: the only action of a
/// single-action task, otherwise uniform random actions.
class Behavior {
public:
    Behavior(const ActionSpace& space, std::uint64_t seed) : space_(space), rng_(derive_seed(seed, kExploreStream)) {}

    Action next() {
        if (space_.is_discrete()) return space_.size == 1 ? std::size_t{0} : rng_.index(space_.size);
        std::vector<double> a(space_.size);
        for (auto& x : a) x = rng_.uniform(-1.0, 1.0);
        return a;
    }

private:
    ActionSpace space_;
    Rng rng_;
};

}  // namespace

RunLog run_stream(AnyAgent& any, Environment& env, const RunOptions& opts) {
    RunLog log;
    if (opts.total_steps < 0) throw std::invalid_argument("run_stream: total_steps must be non-negative");
    if (opts.total_steps == 0) return log;
    const EnvSpec spec = env.spec();
    const std::int64_t total = opts.total_steps;

    try {
        std::visit(
            [&](auto& agent) {
                using A = std::decay_t<decltype(agent)>;
                agent.set_audit(opts.audit);
                require_dims(spec.observation_dim, agent.scaling().observation_normalizer().moments().dim(),
                             "run_stream observation");
                if constexpr (std::is_same_v<A, StreamTdAgent>) {
                    Behavior behavior(spec.action_space, opts.seed);
                    drive(
                        agent, env, opts, log, [&](const auto&, std::int64_t) { return NoChoice{behavior.next()}; },
                        [&](const auto& s, const NoChoice&, const auto& s2, double r, bool term, std::int64_t) {
                            auto info = agent.update(s, s2, r, term);
                            return std::pair{info, std::optional<NoChoice>{}};
                        });
                } else if constexpr (std::is_same_v<A, StreamQAgent>) {
                    require_dims(spec.action_space.size, agent.action_count(), "run_stream actions");
                    auto choose = [&](const auto& s, std::int64_t t) {
                        return GreedyChoice{agent.select_action(s, agent.config().epsilon.at(t, total))};
                    };
                    drive(agent, env, opts, log, choose,
                          [&](const auto& s, const GreedyChoice& c, const auto& s2, double r, bool term,
                              std::int64_t) {
                              auto info = agent.update(s, c.choice.action, s2, r, term, c.choice.greedy);
                              return std::pair{info, std::optional<GreedyChoice>{}};
                          });
                } else if constexpr (std::is_same_v<A, StreamSarsaAgent>) {
                    require_dims(spec.action_space.size, agent.action_count(), "run_stream actions");
                    auto choose = [&](const auto& s, std::int64_t t) {
                        return GreedyChoice{agent.select_action(s, agent.config().epsilon.at(t, total))};
                    };
                    // A' is chosen from S' before the update, as in the listing.
                    drive(agent, env, opts, log, choose,
                          [&](const auto& s, const GreedyChoice& c, const auto& s2, double r, bool term,
                              std::int64_t t) {
                              auto next = choose(s2, t + 1);
                              auto info = agent.update(s, c.choice.action, s2, next.choice.action, r, term);
                              return std::pair{info, std::optional<GreedyChoice>{next}};
                          });
                } else {
                    auto choose = [&](const auto& s, std::int64_t) { return AcChoice{agent.act(s)}; };
                    drive(agent, env, opts, log, choose,
                          [&](const auto& s, const AcChoice& c, const auto& s2, double r, bool term, std::int64_t) {
                              auto info = agent.update(s, c.sample, s2, r, term);
                              return std::pair{info, std::optional<AcChoice>{}};
                          });
                }
            },
            any);
    } catch (const DivergenceError& e) {
        log.diverged = true;
        log.diagnostic = e.what();
    }
    return log;
}

double trailing_mean_return(const RunLog& log, std::size_t window) {
    if (log.episodes.empty()) return 0.0;
    const std::size_t n = std::min(window, log.episodes.size());
    double sum = 0.0;
    for (std::size_t i = log.episodes.size() - n; i < log.episodes.size(); ++i) sum += log.episodes[i].raw_return;
    return sum / static_cast<double>(n);
}

}  // namespace streamx
