#include <algorithm>
#include <cmath>
#include <vector>

#include "../support/reference.hpp"
#include "doctest.h"
#include "streamx/agents.hpp"

using namespace streamx;

namespace {

bool same(const reference::Trace& a, const reference::Trace& b) {
    return a.deltas == b.deltas && a.returns == b.returns && a.params == b.params;
}

AgentConfig small() {
    AgentConfig c;
    c.hidden = {16, 16};
    return c;
}

}  // namespace

TEST_CASE("epsilon schedule decays linearly then holds") {
    EpsilonSchedule e;
    CHECK(e.at(0, 1000) == 1.0);
    CHECK(e.at(25, 1000) == doctest::Approx(0.505));
    CHECK(e.at(50, 1000) == 0.01);
    CHECK(e.at(999, 1000) == 0.01);
}

TEST_CASE("agent config validation") {
    AgentConfig c;
    CHECK_NOTHROW(c.validate());
    c.kappa = 1.0;
    CHECK_THROWS(c.validate());
    c = AgentConfig{};
    c.sparsity = 1.0;
    CHECK_THROWS(c.validate());
    c = AgentConfig{};
    c.gamma = 1.2;
    CHECK_THROWS(c.validate());
    CHECK(parse_agent_kind("sarsa") == AgentKind::StreamSarsa);
    CHECK_THROWS(parse_agent_kind("dqn"));
}

TEST_CASE("golden traces match the listing transcriptions") {
    const auto cfg = small();
    for (std::uint64_t seed : {1u, 2u}) {
        CHECK(same(reference::library_run(AgentKind::StreamTD, cfg, "random_walk", seed, 100),
                   reference::stream_td(cfg, "random_walk", seed, 100)));
        CHECK(same(reference::library_run(AgentKind::StreamQ, cfg, "gridworld", seed, 100),
                   reference::stream_action_value(false, cfg, "gridworld", seed, 100)));
        CHECK(same(reference::library_run(AgentKind::StreamSarsa, cfg, "gridworld", seed, 100),
                   reference::stream_action_value(true, cfg, "gridworld", seed, 100)));
        CHECK(same(reference::library_run(AgentKind::StreamAC, cfg, "pole_balance", seed, 100),
                   reference::stream_ac(cfg, "pole_balance", seed, 100)));
    }
}

TEST_CASE("golden comparison detects a changed step size") {
    auto cfg = small();
    auto other = cfg;
    other.kappa_pi = 2.5;
    CHECK_FALSE(same(reference::library_run(AgentKind::StreamAC, other, "pole_balance", 3, 100),
                     reference::stream_ac(cfg, "pole_balance", 3, 100)));
}

TEST_CASE("q and sarsa updates coincide when the next action is greedy") {
    const auto cfg = small();
    StreamQAgent q(cfg, 3, 2, 6);
    StreamSarsaAgent sarsa(cfg, 3, 2, 6);
    Rng rng(12);
    std::vector<double> s{0.2, -0.1, 0.4};
    for (int t = 0; t < 40; ++t) {
        std::vector<double> s2{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const std::size_t a = rng.index(2);
        const double r = rng.uniform(-1, 1);
        const auto next = sarsa.action_values(s2);
        const std::size_t greedy = next[1] > next[0] ? 1 : 0;
        const auto dq = q.update(s, a, s2, r, false, true);
        const auto ds = sarsa.update(s, a, s2, greedy, r, false);
        CHECK(dq.delta == ds.delta);
        s = s2;
    }
    CHECK(std::equal(q.network().params().begin(), q.network().params().end(), sarsa.network().params().begin()));
}

TEST_CASE("tabular TD(0) reduction with a linear value function") {
    // No hidden layers, no normalization, zero init: ObGD never clips at this
    // step size, so every update is w[s] += alpha delta.
    AgentConfig cfg;
    cfg.hidden = {};
    cfg.layernorm = false;
    cfg.sparse_init = false;
    cfg.obs_norm = false;
    cfg.reward_scale = false;
    cfg.lambda = 0.0;
    cfg.alpha = 0.1;
    cfg.optimizer = OptimizerKind::ObGD;
    StreamTdAgent agent(cfg, 3, 0);
    {
        auto p = agent.network().mutable_params();
        std::fill(p.begin(), p.end(), 0.0);
    }
    const std::vector<std::vector<double>> states{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const int path[][2] = {{0, 1}, {1, 2}, {2, 1}, {1, 0}, {0, 1}, {1, 2}};
    const double rewards[] = {0.0, 1.0, -0.5, 0.0, 0.25, 1.0};
    for (int i = 0; i < 6; ++i) agent.update(states[path[i][0]], states[path[i][1]], rewards[i], false);
    // Tabular oracle; the shared bias is a fourth table entry active in every state.
    std::vector<double> w(4, 0.0);  // three weights + bias
    for (int i = 0; i < 6; ++i) {
        const int s = path[i][0], s2 = path[i][1];
        const double delta = rewards[i] + cfg.gamma * (w[s2] + w[3]) - (w[s] + w[3]);
        const double m = cfg.alpha * cfg.kappa * std::max(std::abs(delta), 1.0) * 2.0;
        const double a = std::min(cfg.alpha / m, cfg.alpha);
        w[s] += a * delta;
        w[3] += a * delta;
    }
    const auto p = agent.network().params();
    for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(w[i]).epsilon(1e-14));
}

TEST_CASE("terminal steps drop the bootstrap; zero error leaves weights") {
    AgentConfig cfg = small();
    cfg.obs_norm = false;
    cfg.reward_scale = false;
    StreamTdAgent agent(cfg, 2, 5);
    const std::vector<double> s{0.3, -0.2}, s2{1.0, 1.0};
    const double v = agent.value(s);
    const auto info = agent.update(s, s2, 0.7, true);
    CHECK(info.delta == doctest::Approx(0.7 - v));

    StreamTdAgent zero(cfg, 2, 5);
    {
        auto p = zero.network().mutable_params();
        std::fill(p.begin(), p.end(), 0.0);
    }
    const std::vector<double> before(zero.network().params().begin(), zero.network().params().end());
    const auto z = zero.update(s, s2, 0.0, false);
    CHECK(z.delta == 0.0);
    CHECK(std::equal(before.begin(), before.end(), zero.network().params().begin()));
}

TEST_CASE("watkins cut resets the trace before accumulation") {
    AgentConfig cfg = small();
    StreamQAgent agent(cfg, 3, 2, 8);
    const std::vector<double> s{0.1, 0.2, 0.3}, s2{0.3, 0.1, -0.4};
    agent.update(s, 0, s2, 1.0, false, true);
    agent.update(s2, 1, s, 0.0, false, false);
    // After a cut the trace holds only the newest gradient.
    Tape tape;
    StreamQAgent probe(cfg, 3, 2, 8);
    probe.update(s, 0, s2, 1.0, false, true);
    probe.network().forward(s2, tape);
    const auto g = probe.network().backward(tape, std::vector<double>{0.0, 1.0});
    const auto z = agent.trace().values();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(z[i] == g[i]);
}

TEST_CASE("actor-critic with zero error changes neither network") {
    AgentConfig cfg = small();
    cfg.obs_norm = false;
    cfg.reward_scale = false;
    cfg.gamma = 1.0;
    StreamAcAgent agent(cfg, 4, ActionSpace::discrete(2), 3);
    const std::vector<double> s{0.1, 0.0, -0.1, 0.2};
    const auto sample = agent.act(s);
    const double r = agent.value(s) - agent.value(s);  // zero
    const std::vector<double> critic(agent.critic().params().begin(), agent.critic().params().end());
    const std::vector<double> actor(agent.actor().params().begin(), agent.actor().params().end());
    const auto info = agent.update(s, sample, s, r, false);
    CHECK(info.delta == 0.0);
    CHECK(std::equal(critic.begin(), critic.end(), agent.critic().params().begin()));
    CHECK(std::equal(actor.begin(), actor.end(), agent.actor().params().begin()));
}

TEST_CASE("actor-critic entropy term follows the error sign") {
    AgentConfig cfg = small();
    cfg.obs_norm = false;
    cfg.reward_scale = false;
    const std::vector<double> s{0.1, 0.0, -0.1, 0.2}, s2{0.0, 0.1, 0.0, 0.0};
    auto actor_trace = [&](double target_delta, double tau) {
        auto c = cfg;
        c.tau = tau;
        StreamAcAgent agent(c, 4, ActionSpace::discrete(2), 3);
        const auto sample = agent.act(s);
        const double r = target_delta - c.gamma * agent.value(s2) + agent.value(s);
        const auto info = agent.update(s, sample, s2, r, false);
        CHECK(info.delta == doctest::Approx(target_delta));
        return std::vector<double>(agent.actor_trace().values().begin(), agent.actor_trace().values().end());
    };
    const auto plus = actor_trace(0.5, 0.3), minus = actor_trace(-0.5, 0.3);
    const auto plain = actor_trace(0.5, 0.0);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        CHECK(plus[i] - plain[i] == doctest::Approx(-(minus[i] - plain[i])).epsilon(1e-9));
    }
}

TEST_CASE("zero-step run leaves the agent untouched") {
    auto env = make_env("gridworld");
    AnyAgent agent = make_agent(AgentKind::StreamQ, small(), env->spec(), 1);
    const auto& net = std::get<StreamQAgent>(agent).network();
    const std::vector<double> before(net.params().begin(), net.params().end());
    RunOptions o;
    o.total_steps = 0;
    const auto log = run_stream(agent, *env, o);
    CHECK(log.episodes.empty());
    CHECK(log.steps_done == 0);
    CHECK(std::equal(before.begin(), before.end(), net.params().begin()));
    CHECK(std::get<StreamQAgent>(agent).steps() == 0);
}

TEST_CASE("fixed seed gives a bit-identical run log") {
    auto run = [] {
        auto env = make_env("gridworld");
        AnyAgent agent = make_agent(AgentKind::StreamSarsa, small(), env->spec(), 9);
        RunOptions o;
        o.total_steps = 600;
        o.seed = 9;
        o.audit = true;
        return run_stream(agent, *env, o);
    };
    const auto a = run(), b = run();
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
        CHECK(a.episodes[i].raw_return == b.episodes[i].raw_return);
        CHECK(a.episodes[i].mean_delta == b.episodes[i].mean_delta);
        CHECK(a.episodes[i].end_step == b.episodes[i].end_step);
    }
    REQUIRE(a.audit.size() == 600);
    for (std::size_t i = 0; i < a.audit.size(); ++i) CHECK(a.audit[i].delta == b.audit[i].delta);
}

TEST_CASE("huge step size is detected as divergence") {
    auto env = make_env("pole_balance");
    auto cfg = small();
    cfg.optimizer = OptimizerKind::SGD;
    cfg.alpha = 1e150;
    AnyAgent agent = make_agent(AgentKind::StreamAC, cfg, env->spec(), 0);
    RunOptions o;
    o.total_steps = 2000;
    const auto log = run_stream(agent, *env, o);
    CHECK(log.diverged);
    CHECK_FALSE(log.diagnostic.empty());
}

TEST_CASE("continuous actor-critic runs on the point mass") {
    auto env = make_env("point_mass");
    AnyAgent agent = make_agent(AgentKind::StreamAC, small(), env->spec(), 2);
    RunOptions o;
    o.total_steps = 450;
    const auto log = run_stream(agent, *env, o);
    CHECK_FALSE(log.diverged);
    CHECK(log.episodes.size() == 2);
    CHECK_THROWS(make_agent(AgentKind::StreamQ, small(), env->spec(), 2));
}

TEST_CASE("episode isolation: the first update of an episode sees only its own gradient") {
    auto cfg = small();
    StreamTdAgent agent(cfg, 5, 0);
    const std::vector<double> a{1, 0, 0, 0, 0}, b{0, 1, 0, 0, 0};
    agent.update(a, b, 0.0, false);
    agent.begin_episode();
    Tape tape;
    agent.network().forward(b, tape);
    const auto g = agent.network().backward(tape, std::vector<double>{1.0});
    StreamTdAgent copy = agent;
    copy.update(b, a, 1.0, true);
    // Trace after the update equals the gradient taken before it.
    const auto z = copy.trace().values();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(z[i] == g[i]);
}
