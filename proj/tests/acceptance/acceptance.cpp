// Acceptance criteria 1-11. One PASS/FAIL line per criterion; nonzero exit
// when any fails. Arguments select a subset by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <numeric>
#include <string>
#include <vector>

#include "../support/reference.hpp"
#include "streamx/agents.hpp"
#include "streamx/envs.hpp"
#include "streamx/harness.hpp"
#include "streamx/net.hpp"
#include "streamx/optim.hpp"
#include "streamx/scaling.hpp"

using namespace streamx;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;
int ran = 0;
std::vector<int> selected;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& check) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = limit_s <= 0.0 || secs < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char timing[96];
    if (limit_s > 0.0) {
        std::snprintf(timing, sizeof timing, "%.1f s (limit %.0f s)", secs, limit_s);
    } else {
        std::snprintf(timing, sizeof timing, "%.1f s", secs);
    }
    std::printf("[%s] %2d %s: %s; %s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), timing);
    std::fflush(stdout);
}

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

/// Runs fn(i) for every seed index concurrently and collects the results.
template <class Fn>
auto per_seed(std::size_t n, Fn fn) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<std::future<R>> futures;
    for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, fn, i));
    std::vector<R> out;
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// --- 1 ----------------------------------------------------------------------

Outcome gradient_exactness() {
    Rng rng(101);
    double worst = 0.0;
    const int configs = 120;
    for (int c = 0; c < configs; ++c) {
        const std::size_t in = 1 + rng.index(6);
        std::vector<std::size_t> hidden(1 + rng.index(3));
        for (auto& h : hidden) h = 2 + rng.index(7);
        const std::size_t out = 1 + rng.index(4);
        Network net = Network::mlp(in, hidden, out, rng.uniform() < 0.75);
        auto w = net.mutable_params();
        for (auto& x : w) x = rng.uniform(-1.0, 1.0);
        std::vector<double> x(in), dy(out);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        for (auto& v : dy) v = rng.uniform(-1.0, 1.0);

        Tape tape;
        net.forward(x, tape);
        const auto g = net.backward(tape, dy);
        auto loss = [&](const std::vector<double>& p) {
            Network probe = net;
            probe.set_params(p);
            const auto y = probe.predict(x);
            double s = 0.0;
            for (std::size_t k = 0; k < out; ++k) s += dy[k] * y[k];
            return s;
        };
        std::vector<double> p(net.params().begin(), net.params().end());
        const double h = 1e-6;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double up = loss(p);
            p[i] = keep - h;
            const double down = loss(p);
            p[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1.0});
            worst = std::max(worst, err);
        }
    }
    return {worst < 1e-5, format("%d configs, max relative error %.2e (< 1e-5)", configs, worst)};
}

// --- 2 ----------------------------------------------------------------------

Outcome obgd_identity() {
    Rng rng(202);
    const int draws = 100000;
    int unclipped = 0;
    double worst = 0.0;
    bool bad_unclipped = false;
    for (int i = 0; i < draws; ++i) {
        const double alpha = std::pow(10.0, rng.uniform(-4.0, 1.0));
        const double kappa = 1.0 + std::pow(10.0, rng.uniform(-3.0, 1.0));
        const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform(-3.0, 2.0));
        const std::size_t n = 1 + rng.index(64);
        const double scale = std::pow(10.0, rng.uniform(-4.0, 2.0));
        std::vector<double> z(n), w(n, 0.0);
        for (auto& v : z) v = scale * rng.uniform(-1.0, 1.0);
        const auto st = ObGD(alpha, kappa).step(w, z, delta);

        double z_l1 = 0.0;
        for (double v : z) z_l1 += std::abs(v);
        const double dbar = std::max(std::abs(delta), 1.0);
        const double m = alpha * kappa * dbar * z_l1;
        if (st.alpha_eff == alpha) {
            ++unclipped;
            if (m > 1.0) bad_unclipped = true;
        } else {
            worst = std::max(worst, std::abs(st.alpha_eff * kappa * dbar * z_l1 - 1.0));
        }
    }
    const bool pass = !bad_unclipped && worst <= 1e-12;
    return {pass, format("%d draws (%d unclipped, all with M <= 1: %s), max |alpha_eff kappa dbar |z|_1 - 1| = %.2e "
                         "(<= 1e-12)",
                         draws, unclipped, bad_unclipped ? "no" : "yes", worst)};
}

// --- 3 ----------------------------------------------------------------------

Outcome linear_effective_step() {
    Rng rng(303);
    const int instances = 10000;
    double worst_reg = 0.0;
    double worst_td = 0.0;
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 1 + rng.index(8);
        std::vector<double> w(n), x(n), x2(n), z(n);
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        for (auto& v : x2) v = rng.uniform(-1.0, 1.0);
        for (auto& v : z) v = rng.uniform(-1.0, 1.0);
        const double alpha = rng.uniform(0.01, 0.5);
        const double gamma = rng.uniform(0.0, 1.0);

        // Regression: delta = y - w.x, w+ = w + alpha delta x.
        double y = dot(w, x) + (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
        const double delta = y - dot(w, x);
        std::vector<double> wp(w);
        for (std::size_t k = 0; k < n; ++k) wp[k] += alpha * delta * x[k];
        const double measured = (delta - (y - dot(wp, x))) / delta;
        worst_reg = std::max(worst_reg, std::abs(measured - xi_linear_regression(alpha, x)));

        // TD: delta = r + gamma w.x' - w.x, w+ = w + alpha delta z.
        const double r0 = rng.uniform(-1.0, 1.0);
        const double target = gamma * dot(w, x2) - dot(w, x);
        const double r = r0 + (std::abs(r0 + target) < 0.5 ? (r0 + target < 0.0 ? -1.0 : 1.0) : 0.0);
        const double td = r + gamma * dot(w, x2) - dot(w, x);
        std::vector<double> wt(w);
        for (std::size_t k = 0; k < n; ++k) wt[k] += alpha * td * z[k];
        const double td_after = r + gamma * dot(wt, x2) - dot(wt, x);
        const double measured_td = (td - td_after) / td;
        worst_td = std::max(worst_td, std::abs(measured_td - xi_linear_td(alpha, z, x, x2, gamma)));
    }
    const bool pass = worst_reg <= 1e-12 && worst_td <= 1e-12;
    return {pass, format("%d instances, max error regression %.2e, TD %.2e (<= 1e-12)", instances, worst_reg, worst_td)};
}

// --- 4 ----------------------------------------------------------------------

Outcome overshoot_audit() {
    struct SeedAudit {
        std::size_t updates = 0;
        std::size_t within = 0;
        bool diverged = false;
    };
    AgentConfig cfg;
    const auto runs = per_seed(10, [&](std::size_t seed) {
        RandomWalk env(5);
        AnyAgent agent = make_agent(AgentKind::StreamTD, cfg, env.spec(), seed);
        RunOptions o;
        o.total_steps = 100000;
        o.seed = seed;
        o.audit = true;
        const auto log = run_stream(agent, env, o);
        SeedAudit a;
        a.diverged = log.diverged;
        for (const auto& row : log.audit) {
            if (!std::isfinite(row.measured_xi)) continue;  // delta == 0
            ++a.updates;
            if (row.measured_xi <= 1.0) ++a.within;
        }
        return a;
    });
    std::size_t diverged = 0, updates = 0, within = 0;
    double worst_seed = 1.0;
    for (const auto& a : runs) {
        diverged += a.diverged ? 1 : 0;
        updates += a.updates;
        within += a.within;
        if (a.updates) worst_seed = std::min(worst_seed, static_cast<double>(a.within) / static_cast<double>(a.updates));
    }
    const double frac = static_cast<double>(within) / static_cast<double>(std::max<std::size_t>(updates, 1));
    const bool pass = diverged == 0 && frac >= 0.99 && worst_seed >= 0.99;
    return {pass, format("xi <= 1 on %.4f of %zu updates (worst seed %.4f, >= 0.99), diverged %zu/10 (= 0)", frac,
                         updates, worst_seed, diverged)};
}

// --- 5 ----------------------------------------------------------------------

Outcome welford() {
    Rng rng(505);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = 5.0 + 3.0 * rng.normal();
    RunningMoments m(1);
    for (double x : xs) m.update(std::span<const double>(&x, 1));
    double mean2 = 0.0;
    for (double x : xs) mean2 += x;
    mean2 /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean2) * (x - mean2);
    const double var2 = ss / static_cast<double>(xs.size() - 1);
    const double err_mean = std::abs(m.mean()[0] - mean2);
    const double err_var = std::abs(m.variance()[0] - var2);

    RewardScaler scaler;
    const double r1 = scaler.scale(1.0, 0.99, false);
    const double u1 = scaler.u();
    const double r2 = scaler.scale(1.0, 0.99, false);
    const double u2 = scaler.u();
    // u = 1.99 with p = 1.99 * (1.99 - 0.995) after two samples.
    const double expect1 = 1.0 / std::sqrt(1.0 + 1e-8);
    const double expect2 = 1.0 / std::sqrt(1.99 * (1.99 - 1.99 / 2.0) + 1e-8);
    const bool trace_ok = u1 == 1.0 && std::abs(u2 - 1.99) < 1e-15 && std::abs(r1 - expect1) < 1e-15 &&
                          std::abs(r2 - expect2) < 1e-15 && std::abs(r1 - 1.0) < 1e-4 && std::abs(r2 - 0.7107) < 1e-4;
    const bool pass = err_mean <= 1e-9 && err_var <= 1e-9 && trace_ok;
    return {pass, format("single vs two pass: |dmean| %.1e, |dvar| %.1e (<= 1e-9); ScaleReward u=1 -> %.6f, u=%.2f -> "
                         "%.6f",
                         err_mean, err_var, r1, u2, r2)};
}

// --- 6 ----------------------------------------------------------------------

/// Random-walk values by direct solution of v = 0.5 gamma (v[s-1] + v[s+1])
/// + 0.5 [s = n-1] (tridiagonal elimination).
std::vector<double> random_walk_values(std::size_t n, double gamma) {
    std::vector<double> a(n, -0.5 * gamma), b(n, 1.0), c(n, -0.5 * gamma), d(n, 0.0);
    d[n - 1] = 0.5;
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    std::vector<double> v(n);
    v[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) v[i] = (d[i] - c[i] * v[i + 1]) / b[i];
    return v;
}

Outcome prediction_accuracy() {
    AgentConfig cfg;
    const auto truth = random_walk_values(5, cfg.gamma);
    const auto rms = per_seed(10, [&](std::size_t seed) {
        RandomWalk env(5);
        AnyAgent any = make_agent(AgentKind::StreamTD, cfg, env.spec(), seed);
        RunOptions o;
        o.total_steps = 10'000'000;
        o.seed = seed;
        o.stop_after_episode = [](const RunLog& l) { return l.episodes.size() >= 5000; };
        const auto log = run_stream(any, env, o);
        if (log.diverged || log.episodes.size() < 5000) return std::numeric_limits<double>::infinity();
        const auto& agent = std::get<StreamTdAgent>(any);
        double se = 0.0;
        for (std::size_t s = 0; s < 5; ++s) {
            const auto x = agent.scaling().peek_observation(env.one_hot(s));
            const double v = agent.value(x) * agent.scaling().reward_scale_factor();
            se += (v - truth[s]) * (v - truth[s]);
        }
        return std::sqrt(se / 5.0);
    });
    const double mean = std::accumulate(rms.begin(), rms.end(), 0.0) / static_cast<double>(rms.size());
    const auto [lo, hi] = std::minmax_element(rms.begin(), rms.end());
    return {mean < 0.05, format("mean RMS over 10 seeds %.4f (< 0.05), per-seed range [%.4f, %.4f]", mean, *lo, *hi)};
}

// --- 7 ----------------------------------------------------------------------

/// Optimal undiscounted return of the 5x5 grid: breadth-first shortest path
/// from the corner to the goal, +1 on arrival and -0.01 per other step.
double grid_optimum() {
    const int n = 5;
    std::vector<int> dist(n * n, -1);
    std::vector<int> queue{0};
    dist[0] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int cell = queue[head];
        const int r = cell / n, c = cell % n;
        const int nbr[4][2] = {{r - 1, c}, {r, c + 1}, {r + 1, c}, {r, c - 1}};
        for (const auto& q : nbr) {
            if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) continue;
            const int next = q[0] * n + q[1];
            if (dist[next] >= 0) continue;
            dist[next] = dist[cell] + 1;
            queue.push_back(next);
        }
    }
    return 1.0 - 0.01 * (dist[n * n - 1] - 1);
}

std::vector<double> grid_finals(AgentKind kind, const AgentConfig& cfg) {
    return per_seed(10, [&](std::size_t seed) {
        auto env = make_env("gridworld");
        AnyAgent agent = make_agent(kind, cfg, env->spec(), seed);
        RunOptions o;
        o.total_steps = 20000;
        o.seed = seed;
        const auto log = run_stream(agent, *env, o);
        return log.diverged ? -std::numeric_limits<double>::infinity() : trailing_mean_return(log, 100);
    });
}

std::vector<double> grid_q_default;

Outcome control() {
    const double optimum = grid_optimum();
    const double threshold = 0.9 * optimum;
    AgentConfig cfg;
    std::string detail = format("optimum %.2f, threshold %.3f", optimum, threshold);
    bool pass = true;
    for (auto kind : {AgentKind::StreamQ, AgentKind::StreamSarsa}) {
        const auto finals = grid_finals(kind, cfg);
        if (kind == AgentKind::StreamQ) grid_q_default = finals;
        const auto ok = std::count_if(finals.begin(), finals.end(), [&](double r) { return r >= threshold; });
        const double worst = *std::min_element(finals.begin(), finals.end());
        pass = pass && ok >= 9;
        detail += format("; %s %ld/10 seeds (>= 9), worst %.3f", std::string(to_string(kind)).c_str(),
                         static_cast<long>(ok), worst);
    }
    return {pass, detail};
}

// --- 8 ----------------------------------------------------------------------

Outcome actor_critic() {
    AgentConfig cfg;
    struct SeedResult {
        double best = 0.0;
        std::int64_t steps = 0;
        bool diverged = false;
    };
    const auto runs = per_seed(10, [&](std::size_t seed) {
        auto env = make_env("pole_balance");
        AnyAgent agent = make_agent(AgentKind::StreamAC, cfg, env->spec(), seed);
        RunOptions o;
        o.total_steps = 500000;
        o.seed = seed;
        SeedResult r;
        o.stop_after_episode = [&](const RunLog& l) {
            if (l.episodes.size() < 100) return false;
            r.best = std::max(r.best, trailing_mean_return(l, 100));
            return r.best >= 450.0;
        };
        const auto log = run_stream(agent, *env, o);
        r.steps = log.steps_done;
        r.diverged = log.diverged;
        return r;
    });
    std::vector<double> best;
    std::size_t diverged = 0;
    std::int64_t most_steps = 0;
    for (const auto& r : runs) {
        best.push_back(r.best);
        diverged += r.diverged ? 1 : 0;
        most_steps = std::max(most_steps, r.steps);
    }
    const double med = median(best);
    return {med >= 450.0 && diverged == 0,
            format("median-seed best 100-episode mean %.1f (>= 450), diverged %zu/10 (= 0), max steps used %lld", med,
                   diverged, static_cast<long long>(most_steps))};
}

// --- 9 ----------------------------------------------------------------------

Outcome gvf() {
    ExperimentConfig cfg;
    cfg.env = "timeseries";
    cfg.agent = AgentKind::StreamTD;
    cfg.seeds = parse_seed_list("0-9");
    cfg.jobs = 10;
    const auto res = run_gvf(cfg, false);

    // Backward-pass oracle, independent of the library's return helper.
    std::vector<double> g(res.cumulants.size() + 1, 0.0);
    for (std::size_t i = res.cumulants.size(); i-- > 0;) g[i] = res.cumulants[i] + cfg.agent_config.gamma * g[i + 1];
    double oracle_err = 0.0;
    for (std::size_t i = 0; i < res.true_returns.size(); ++i) {
        oracle_err = std::max(oracle_err, std::abs(g[i] - res.true_returns[i]));
    }

    std::size_t diverged = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : res.seeds) {
        if (s.diverged) {
            ++diverged;
            continue;
        }
        worst = std::min(worst, s.mse_first / s.mse_last);
    }
    const double ratio = res.mean_mse_first() / res.mean_mse_last();
    const bool pass = diverged == 0 && ratio >= 10.0 && oracle_err < 1e-9;
    return {pass, format("%zu transitions, MSE first 5%% %.4g -> last 5%% %.4g, ratio %.1f (>= 10), worst seed %.1f, "
                         "diverged %zu/10",
                         res.cumulants.size(), res.mean_mse_first(), res.mean_mse_last(), ratio, worst, diverged)};
}

// --- 10 ---------------------------------------------------------------------

bool same(const reference::Trace& a, const reference::Trace& b) {
    return a.deltas == b.deltas && a.returns == b.returns && a.params == b.params;
}

Outcome reductions() {
    const std::int64_t steps = 100;
    const std::uint64_t seed = 7;
    AgentConfig base;
    int checks = 0, ok = 0;
    std::string failed;
    auto check = [&](const std::string& what, bool good) {
        ++checks;
        if (good) {
            ++ok;
        } else {
            failed += " " + what;
        }
    };

    check("td", same(reference::library_run(AgentKind::StreamTD, base, "random_walk", seed, steps),
                     reference::stream_td(base, "random_walk", seed, steps)));
    check("q", same(reference::library_run(AgentKind::StreamQ, base, "gridworld", seed, steps),
                    reference::stream_action_value(false, base, "gridworld", seed, steps)));
    check("sarsa", same(reference::library_run(AgentKind::StreamSarsa, base, "gridworld", seed, steps),
                        reference::stream_action_value(true, base, "gridworld", seed, steps)));
    check("ac", same(reference::library_run(AgentKind::StreamAC, base, "pole_balance", seed, steps),
                     reference::stream_ac(base, "pole_balance", seed, steps)));

    AgentConfig one_step = base;
    one_step.lambda = 0.0;
    reference::Variant v1;
    v1.one_step = true;
    check("td lambda=0", same(reference::library_run(AgentKind::StreamTD, one_step, "random_walk", seed, steps),
                              reference::stream_td(base, "random_walk", seed, steps, v1)));
    check("q lambda=0", same(reference::library_run(AgentKind::StreamQ, one_step, "gridworld", seed, steps),
                             reference::stream_action_value(false, base, "gridworld", seed, steps, v1)));
    check("sarsa lambda=0", same(reference::library_run(AgentKind::StreamSarsa, one_step, "gridworld", seed, steps),
                                 reference::stream_action_value(true, base, "gridworld", seed, steps, v1)));
    check("ac lambda=0", same(reference::library_run(AgentKind::StreamAC, one_step, "pole_balance", seed, steps),
                              reference::stream_ac(base, "pole_balance", seed, steps, v1)));

    AgentConfig no_tau = base;
    no_tau.tau = 0.0;
    reference::Variant v2;
    v2.no_entropy = true;
    check("ac tau=0", same(reference::library_run(AgentKind::StreamAC, no_tau, "pole_balance", seed, steps),
                           reference::stream_ac(base, "pole_balance", seed, steps, v2)));

    AgentConfig dense = base;
    dense.sparsity = 0.0;
    reference::Variant v3;
    v3.dense_init = true;
    check("q s=0", same(reference::library_run(AgentKind::StreamQ, dense, "gridworld", seed, steps),
                        reference::stream_action_value(false, base, "gridworld", seed, steps, v3)));
    check("ac s=0", same(reference::library_run(AgentKind::StreamAC, dense, "pole_balance", seed, steps),
                         reference::stream_ac(base, "pole_balance", seed, steps, v3)));

    return {ok == checks, format("%d/%d golden traces bit-equal over %lld steps%s%s", ok, checks,
                                 static_cast<long long>(steps), failed.empty() ? "" : "; mismatched:", failed.c_str())};
}

// --- 11 ---------------------------------------------------------------------

Outcome ablation_direction() {
    AgentConfig baseline;
    baseline.optimizer = OptimizerKind::AdaptiveMoments;
    baseline.alpha = 1e-5;
    if (grid_q_default.empty()) grid_q_default = grid_finals(AgentKind::StreamQ, AgentConfig{});
    const auto adam = grid_finals(AgentKind::StreamQ, baseline);
    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const double obgd = mean(grid_q_default);
    const double am = mean(adam);
    return {am < obgd, format("final return adaptive-moments (alpha 1e-5) %.3f < ObGD %.3f", am, obgd)};
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    report(1, "gradient exactness", 30, gradient_exactness);
    report(2, "ObGD clipping identity", 5, obgd_identity);
    report(3, "linear effective step size", 10, linear_effective_step);
    report(4, "overshoot audit", 300, overshoot_audit);
    report(5, "Welford and ScaleReward", 0, welford);
    report(6, "RandomWalk prediction accuracy", 120, prediction_accuracy);
    report(7, "Gridworld control", 300, control);
    report(8, "PoleBalance actor-critic", 1200, actor_critic);
    report(9, "time-series GVF prediction", 300, gvf);
    report(10, "reductions and listing fidelity", 0, reductions);
    report(11, "ablation direction", 0, ablation_direction);
    std::printf("%d of %d criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
