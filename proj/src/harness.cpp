#include "streamx/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "streamx/snapshot.hpp"

namespace streamx {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (value.empty() || ec != std::errc() || ptr != end) {
        throw std::invalid_argument("config: '" + key + "' expects a number, got '" + value + "'");
    }
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (value.empty() || ec != std::errc() || ptr != end) {
        // Accept integral scientific notation such as 5e5.
        const double d = parse_double(key, value);
        if (d != std::floor(d) || std::abs(d) > 9e15) {
            throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + value + "'");
        }
        return static_cast<std::int64_t>(d);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + value + "'");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto n = parse_int(key, trim(item));
        if (n <= 0) throw std::invalid_argument("config: '" + key + "' widths must be positive");
        out.push_back(static_cast<std::size_t>(n));
    }
    return out;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

// --- configuration ---------------------------------------------------------

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            const auto s = parse_int("seeds", item);
            if (s < 0) throw std::invalid_argument("config: seeds must be non-negative");
            seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
            const auto lo = parse_int("seeds", trim(item.substr(0, dash)));
            const auto hi = parse_int("seeds", trim(item.substr(dash + 1)));
            if (lo < 0 || hi < lo) throw std::invalid_argument("config: bad seed range '" + item + "'");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    if (seeds.empty()) throw std::invalid_argument("config: empty seed list");
    return seeds;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = normalize_key(trim(raw_key));
    const std::string value = trim(raw_value);
    auto& a = cfg.agent_config;
    if (key == "env") cfg.env = value;
    else if (key == "algo" || key == "agent") cfg.agent = parse_agent_kind(value);
    else if (key == "steps" || key == "total_steps") cfg.total_steps = parse_int(key, value);
    else if (key == "seeds") cfg.seeds = parse_seed_list(value);
    else if (key == "out" || key == "out_dir") cfg.out_dir = value;
    else if (key == "audit") cfg.audit = parse_bool(key, value);
    else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(key, value));
    else if (key == "stop_at_return") cfg.stop_at_return = parse_double(key, value);
    else if (key == "baseline_alpha") cfg.baseline_alpha = parse_double(key, value);
    else if (key == "csv") cfg.csv = value;
    else if (key == "cumulant_col") cfg.cumulant_col = value;
    else if (key == "beta") cfg.beta = parse_double(key, value);
    else if (key == "series_rows") cfg.series_rows = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "series_seed") cfg.series_seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "gamma") a.gamma = parse_double(key, value);
    else if (key == "lambda") a.lambda = parse_double(key, value);
    else if (key == "alpha") a.alpha = parse_double(key, value);
    else if (key == "kappa") a.kappa = parse_double(key, value);
    else if (key == "kappa_pi") a.kappa_pi = parse_double(key, value);
    else if (key == "tau") a.tau = parse_double(key, value);
    else if (key == "sparsity") a.sparsity = parse_double(key, value);
    else if (key == "optimizer") a.optimizer = parse_optimizer_kind(value);
    else if (key == "epsilon_start") a.epsilon.start = parse_double(key, value);
    else if (key == "epsilon_end") a.epsilon.end = parse_double(key, value);
    else if (key == "epsilon_fraction") a.epsilon.end_fraction = parse_double(key, value);
    else if (key == "hidden") a.hidden = parse_widths(key, value);
    else if (key == "layernorm") a.layernorm = parse_bool(key, value);
    else if (key == "sparse_init") a.sparse_init = parse_bool(key, value);
    else if (key == "obs_norm") a.obs_norm = parse_bool(key, value);
    else if (key == "reward_scale") a.reward_scale = parse_bool(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
        } catch (const std::exception& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::move(base));
}

std::string config_to_text(const ExperimentConfig& cfg) {
    const auto& a = cfg.agent_config;
    std::ostringstream out;
    out << "env = " << cfg.env << '\n';
    out << "algo = " << to_string(cfg.agent) << '\n';
    out << "steps = " << cfg.total_steps << '\n';
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << '\n';
    out << "audit = " << (cfg.audit ? "true" : "false") << '\n';
    if (cfg.stop_at_return) out << "stop_at_return = " << fmt(*cfg.stop_at_return) << '\n';
    if (cfg.baseline_alpha) out << "baseline_alpha = " << fmt(*cfg.baseline_alpha) << '\n';
    if (cfg.env == "timeseries") {
        if (!cfg.csv.empty()) out << "csv = " << cfg.csv.string() << '\n';
        out << "cumulant_col = " << cfg.cumulant_col << '\n';
        out << "beta = " << fmt(cfg.beta) << '\n';
        out << "series_rows = " << cfg.series_rows << '\n';
        out << "series_seed = " << cfg.series_seed << '\n';
    }
    out << "gamma = " << fmt(a.gamma) << '\n';
    out << "lambda = " << fmt(a.lambda) << '\n';
    out << "alpha = " << fmt(a.alpha) << '\n';
    out << "kappa = " << fmt(a.kappa) << '\n';
    out << "kappa_pi = " << fmt(a.kappa_pi) << '\n';
    out << "tau = " << fmt(a.tau) << '\n';
    out << "sparsity = " << fmt(a.sparsity) << '\n';
    out << "optimizer = " << to_string(a.optimizer) << '\n';
    out << "epsilon_start = " << fmt(a.epsilon.start) << '\n';
    out << "epsilon_end = " << fmt(a.epsilon.end) << '\n';
    out << "epsilon_fraction = " << fmt(a.epsilon.end_fraction) << '\n';
    out << "hidden = ";
    for (std::size_t i = 0; i < a.hidden.size(); ++i) out << (i ? "," : "") << a.hidden[i];
    out << '\n';
    out << "layernorm = " << (a.layernorm ? "true" : "false") << '\n';
    out << "sparse_init = " << (a.sparse_init ? "true" : "false") << '\n';
    out << "obs_norm = " << (a.obs_norm ? "true" : "false") << '\n';
    out << "reward_scale = " << (a.reward_scale ? "true" : "false") << '\n';
    return out.str();
}

double classic_alpha(AgentKind kind) {
    switch (kind) {
        case AgentKind::StreamTD: return 3e-4;
        case AgentKind::StreamQ:
        case AgentKind::StreamSarsa: return 1e-5;
        case AgentKind::StreamAC: return 1e-7;
    }
    return 1e-5;
}

std::unique_ptr<Environment> make_experiment_env(const ExperimentConfig& cfg) {
    if (cfg.env == "timeseries") {
        auto table = cfg.csv.empty() ? synthetic_series(cfg.series_rows, cfg.series_seed) : load_timeseries_csv(cfg.csv);
        return std::make_unique<TimeSeriesStream>(std::move(table), cfg.cumulant_col, cfg.beta);
    }
    return make_env(cfg.env);
}

void ExperimentConfig::validate() const {
    if (env != "timeseries" && !is_known_env(env)) throw std::invalid_argument("unknown environment id '" + env + "'");
    if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    if (baseline_alpha && !(*baseline_alpha > 0.0)) throw std::invalid_argument("baseline_alpha must be positive");
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
    agent_config.validate();
    if (env == "timeseries") {
        if (agent != AgentKind::StreamTD) throw std::invalid_argument("the time-series stream needs stream_td");
        if (csv.empty() && series_rows < 3) throw std::invalid_argument("series_rows must be >= 3");
        if (!csv.empty() && !std::filesystem::exists(csv)) {
            throw std::invalid_argument("csv file not found: " + csv.string());
        }
        return;
    }
    // Known ids have fixed specs; check agent / action-space compatibility.
    const auto spec = make_env(env)->spec();
    if ((agent == AgentKind::StreamQ || agent == AgentKind::StreamSarsa) && !spec.action_space.is_discrete()) {
        throw std::invalid_argument(std::string(to_string(agent)) + " needs a discrete action space; '" + env +
                                    "' is continuous");
    }
}

// --- curves and aggregation ------------------------------------------------

std::vector<double> learning_curve(const RunLog& log, std::int64_t total_steps, std::size_t bins) {
    std::vector<double> sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (const auto& ep : log.episodes) {
        const auto pos = ep.end_step <= 0 ? 0 : (ep.end_step - 1) * static_cast<std::int64_t>(bins) / total_steps;
        const auto b = static_cast<std::size_t>(std::clamp<std::int64_t>(pos, 0, static_cast<std::int64_t>(bins) - 1));
        sum[b] += ep.raw_return;
        ++count[b];
    }
    std::vector<double> curve(bins, kNaN);
    double last = kNaN;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] > 0) last = sum[b] / static_cast<double>(count[b]);
        curve[b] = last;
    }
    return curve;
}

void aggregate_curves(AggregateResult& r) {
    const std::size_t bins = r.bin_steps.size();
    r.mean.assign(bins, kNaN);
    r.stderr_mean.assign(bins, kNaN);
    r.half_width.assign(bins, kNaN);
    r.counts.assign(bins, 0);
    r.diverged_count = 0;
    for (const auto& run : r.runs) r.diverged_count += run.log.diverged ? 1 : 0;
    r.healthy_count = r.runs.size() - r.diverged_count;
    for (std::size_t b = 0; b < bins; ++b) {
        std::vector<double> xs;
        for (const auto& run : r.runs) {
            if (!run.log.diverged && b < run.curve.size() && std::isfinite(run.curve[b])) xs.push_back(run.curve[b]);
        }
        r.counts[b] = xs.size();
        if (xs.empty()) continue;
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double se = 0.0;
        if (xs.size() >= 2) {
            double ss = 0.0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
        }
        r.mean[b] = mean;
        r.stderr_mean[b] = se;
        r.half_width[b] = kBandZ * se;
    }
}

double AggregateResult::final_return() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& run : runs) {
        if (run.log.diverged || run.log.episodes.empty()) continue;
        sum += trailing_mean_return(run.log, 100);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : kNaN;
}

// --- execution -------------------------------------------------------------

namespace {

/// Runs `work(i)` for i in [0, n) on at most `jobs` threads.
template <class Work>
void parallel_for(std::size_t n, int jobs, Work work) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string seed_file(const char* stem, std::uint64_t seed, const char* ext) {
    return std::string(stem) + "_seed" + std::to_string(seed) + ext;
}

}  // namespace

AggregateResult run_experiment(const ExperimentConfig& cfg, const std::string& label) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    {
        auto out = open_out(cfg.out_dir / "config.txt");
        out << config_to_text(cfg);
    }

    AggregateResult result;
    result.label = label;
    for (std::size_t b = 0; b < kCurveBins; ++b) {
        const auto edge = (static_cast<std::int64_t>(b) + 1) * cfg.total_steps;
        result.bin_steps.push_back((edge + static_cast<std::int64_t>(kCurveBins) - 1) /
                                   static_cast<std::int64_t>(kCurveBins));
    }
    result.runs.resize(cfg.seeds.size());

    parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
        const auto seed = cfg.seeds[i];
        auto env = make_experiment_env(cfg);
        AnyAgent agent = make_agent(cfg.agent, cfg.agent_config, env->spec(), seed);
        RunOptions opts;
        opts.total_steps = cfg.total_steps;
        opts.seed = seed;
        opts.audit = cfg.audit;
        if (cfg.stop_at_return) {
            const double target = *cfg.stop_at_return;
            opts.stop_after_episode = [target](const RunLog& log) {
                return log.episodes.size() >= 100 && trailing_mean_return(log, 100) >= target;
            };
        }
        SeedRun run;
        run.seed = seed;
        run.log = run_stream(agent, *env, opts);
        run.curve = learning_curve(run.log, cfg.total_steps);
        write_run_csv(run.log, cfg.out_dir / seed_file("run", seed, ".csv"));
        if (cfg.audit) write_audit_csv(run.log, cfg.out_dir / seed_file("audit", seed, ".csv"));
        if (!run.log.diverged) save_checkpoint(agent, cfg.out_dir / seed_file("checkpoint", seed, ".netsnap"));
        result.runs[i] = std::move(run);
    });

    aggregate_curves(result);
    write_curves_csv(result, cfg.out_dir / "curves.csv");
    write_aggregate_csv(result, cfg.out_dir / "aggregate.csv");
    return result;
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, ExperimentConfig>> out;
    auto with = [&](const std::string& label, auto edit) {
        ExperimentConfig v = cfg;
        edit(v.agent_config);
        v.out_dir = cfg.out_dir / label;
        out.emplace_back(label, std::move(v));
    };
    with("base", [](AgentConfig&) {});
    const double baseline = cfg.baseline_alpha.value_or(classic_alpha(cfg.agent));
    with("adaptive_moments", [&](AgentConfig& a) {
        a.optimizer = OptimizerKind::AdaptiveMoments;
        a.alpha = baseline;
    });
    with("no_layernorm", [](AgentConfig& a) { a.layernorm = false; });
    with("dense_init", [](AgentConfig& a) { a.sparse_init = false; });
    with("no_data_scaling", [](AgentConfig& a) {
        a.obs_norm = false;
        a.reward_scale = false;
    });
    return out;
}

std::vector<AggregateResult> run_ablation(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto variants = ablation_variants(cfg);
    for (const auto& [label, v] : variants) v.validate();
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<AggregateResult> results;
    std::vector<PlotSeries> series;
    for (const auto& [label, v] : variants) {
        results.push_back(run_experiment(v, label));
        series.push_back(read_aggregate_csv(v.out_dir / "aggregate.csv", label));
    }

    auto out = open_out(cfg.out_dir / "ablation.csv");
    out << "variant,final_return,healthy_runs,diverged_runs\n";
    for (const auto& r : results) {
        out << r.label << ',' << fmt(r.final_return()) << ',' << r.healthy_count << ',' << r.diverged_count << '\n';
    }
    out.close();
    bool any_points = false;
    for (const auto& s : series) {
        any_points = any_points || std::any_of(s.mean.begin(), s.mean.end(), [](double x) { return std::isfinite(x); });
    }
    if (any_points) plot_svg(series, cfg.out_dir / "ablation.svg", "ablation: " + cfg.env);
    return results;
}

// --- GVF -------------------------------------------------------------------

double GvfResult::mean_mse_first() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : seeds) {
        if (r.diverged) continue;
        s += r.mse_first;
        ++n;
    }
    return n ? s / static_cast<double>(n) : kNaN;
}

double GvfResult::mean_mse_last() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : seeds) {
        if (r.diverged) continue;
        s += r.mse_last;
        ++n;
    }
    return n ? s / static_cast<double>(n) : kNaN;
}

GvfResult run_gvf(const ExperimentConfig& cfg_in, bool write) {
    ExperimentConfig cfg = cfg_in;
    cfg.env = "timeseries";
    cfg.agent = AgentKind::StreamTD;
    cfg.validate();

    GvfResult result;
    {
        const auto probe = make_experiment_env(cfg);
        const auto& stream = dynamic_cast<const TimeSeriesStream&>(*probe);
        result.cumulants = stream.cumulants();
    }
    const double gamma = cfg.agent_config.gamma;
    result.true_returns = discounted_returns(result.cumulants, gamma);
    const std::size_t n = result.cumulants.size();
    std::size_t tail = 0;
    if (gamma > 0.0 && gamma < 1.0) tail = static_cast<std::size_t>(std::ceil(std::log(1e-4) / std::log(gamma)));
    result.evaluated = n > tail ? n - tail : 0;
    result.window = std::max<std::size_t>(1, result.evaluated / 20);
    if (result.evaluated < 2 * result.window) throw std::invalid_argument("time series too short for evaluation");

    const auto steps = static_cast<std::int64_t>(n);
    result.seeds.resize(cfg.seeds.size());
    if (write) std::filesystem::create_directories(cfg.out_dir);

    parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
        GvfSeedResult r;
        r.seed = cfg.seeds[i];
        auto env = make_experiment_env(cfg);
        AnyAgent any = make_agent(AgentKind::StreamTD, cfg.agent_config, env->spec(), r.seed);
        auto& agent = std::get<StreamTdAgent>(any);
        r.predictions.reserve(n);
        RunOptions opts;
        opts.total_steps = steps;
        opts.seed = r.seed;
        opts.on_step = [&](std::int64_t, const StepInfo& info) {
            r.predictions.push_back(info.estimate * agent.scaling().reward_scale_factor());
        };
        const auto log = run_stream(any, *env, opts);
        r.diverged = log.diverged;
        if (!r.diverged) {
            const auto& g = result.true_returns;
            const std::size_t w = result.window;
            const std::size_t last = result.evaluated - w;
            for (std::size_t k = 0; k < w; ++k) {
                r.mse_first += std::pow(r.predictions[k] - g[k], 2);
                r.mse_last += std::pow(r.predictions[last + k] - g[last + k], 2);
            }
            r.mse_first /= static_cast<double>(w);
            r.mse_last /= static_cast<double>(w);
        }
        if (write) {
            auto out = open_out(cfg.out_dir / seed_file("gvf", r.seed, ".csv"));
            out << "step,cumulant,prediction,true_return\n";
            for (std::size_t k = 0; k < r.predictions.size(); ++k) {
                out << k << ',' << fmt(result.cumulants[k]) << ',' << fmt(r.predictions[k]) << ','
                    << fmt(result.true_returns[k]) << '\n';
            }
        }
        result.seeds[i] = std::move(r);
    });

    if (write) {
        auto out = open_out(cfg.out_dir / "gvf_summary.csv");
        out << "seed,diverged,mse_first,mse_last,ratio\n";
        for (const auto& r : result.seeds) {
            out << r.seed << ',' << (r.diverged ? 1 : 0) << ',' << fmt(r.mse_first) << ',' << fmt(r.mse_last) << ','
                << fmt(r.diverged ? kNaN : r.mse_first / r.mse_last) << '\n';
        }
    }
    return result;
}

// --- CSV output ------------------------------------------------------------

void write_run_csv(const RunLog& log, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "episode_index,steps,raw_return,mean_delta,clip_fraction\n";
    for (const auto& e : log.episodes) {
        out << e.episode_index << ',' << e.steps << ',' << fmt(e.raw_return) << ',' << fmt(e.mean_delta) << ','
            << fmt(e.clip_fraction) << '\n';
    }
    if (log.diverged) out << "# diverged after " << log.steps_done << " steps: " << log.diagnostic << '\n';
}

void write_audit_csv(const RunLog& log, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "step,delta,z_l1,bound,alpha_eff,measured_xi\n";
    for (const auto& a : log.audit) {
        out << a.step << ',' << fmt(a.delta) << ',' << fmt(a.z_l1) << ',' << fmt(a.bound) << ',' << fmt(a.alpha_eff)
            << ',' << fmt(a.measured_xi) << '\n';
    }
}

void write_curves_csv(const AggregateResult& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "step";
    for (const auto& run : r.runs) out << ",seed_" << run.seed << (run.log.diverged ? "_diverged" : "");
    out << '\n';
    for (std::size_t b = 0; b < r.bin_steps.size(); ++b) {
        out << r.bin_steps[b];
        for (const auto& run : r.runs) out << ',' << fmt(run.curve[b]);
        out << '\n';
    }
}

void write_aggregate_csv(const AggregateResult& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "step,mean,stderr,half_width,lower,upper,healthy_runs,diverged_runs\n";
    for (std::size_t b = 0; b < r.bin_steps.size(); ++b) {
        out << r.bin_steps[b] << ',' << fmt(r.mean[b]) << ',' << fmt(r.stderr_mean[b]) << ',' << fmt(r.half_width[b])
            << ',' << fmt(r.mean[b] - r.half_width[b]) << ',' << fmt(r.mean[b] + r.half_width[b]) << ','
            << r.counts[b] << ',' << r.diverged_count << '\n';
    }
}

// --- plotting --------------------------------------------------------------

PlotSeries read_aggregate_csv(const std::filesystem::path& path, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("plot: cannot open " + path.string());
    PlotSeries s;
    s.label = label.empty() ? path.parent_path().filename().string() : label;
    if (s.label.empty()) s.label = path.stem().string();

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("plot: " + path.string() + " line 1: missing header");
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(trim(cell));
    }
    auto col = [&](const char* name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw std::runtime_error("plot: " + path.string() + " line 1: missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_step = col("step"), c_mean = col("mean"), c_lo = col("lower"), c_hi = col("upper");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() != header.size()) {
            throw std::runtime_error("plot: " + path.string() + " line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        }
        auto num = [&](std::size_t c) {
            if (cells[c] == "nan") return kNaN;
            try {
                return parse_double(header[c], cells[c]);
            } catch (const std::exception&) {
                throw std::runtime_error("plot: " + path.string() + " line " + std::to_string(line_no) +
                                         ": non-numeric '" + cells[c] + "' in column '" + header[c] + "'");
            }
        };
        s.step.push_back(num(c_step));
        s.mean.push_back(num(c_mean));
        s.lower.push_back(num(c_lo));
        s.upper.push_back(num(c_hi));
    }
    if (s.step.empty()) throw std::runtime_error("plot: " + path.string() + ": no data rows");
    return s;
}

void plot_svg(const std::vector<PlotSeries>& series, const std::filesystem::path& out_svg, const std::string& title) {
    if (series.empty()) throw std::invalid_argument("plot: empty curve list");
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.step.size(); ++i) {
            if (!std::isfinite(s.mean[i]) || !std::isfinite(s.step[i])) continue;
            x0 = std::min(x0, s.step[i]);
            x1 = std::max(x1, s.step[i]);
            const double lo = std::isfinite(s.lower[i]) ? s.lower[i] : s.mean[i];
            const double hi = std::isfinite(s.upper[i]) ? s.upper[i] : s.mean[i];
            y0 = std::min({y0, lo, s.mean[i]});
            y1 = std::max({y1, hi, s.mean[i]});
        }
    }
    if (!std::isfinite(x0)) throw std::invalid_argument("plot: no finite points to draw");
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    constexpr double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    std::ostringstream svg;
    char buf[128];
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) {
        svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"15\">" << xml_escape(title) << "</text>\n";
    }
    svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double xv = x0 + (x1 - x0) * k / 4.0;
        std::snprintf(buf, sizeof buf, "%.4g", yv);
        svg << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
            << "\" stroke=\"#ddd\"/><text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << buf
            << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.4g", xv);
        svg << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << buf
            << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">step</text>\n";
    svg << "<text transform=\"translate(16," << (T + H - B) / 2
        << ") rotate(-90)\" text-anchor=\"middle\">mean return (90% band)</text>\n";
    svg << "</g>\n";
    svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % (sizeof palette / sizeof palette[0])];
        std::ostringstream upper, lower, line;
        std::vector<std::pair<double, double>> lows;
        bool first = true;
        for (std::size_t i = 0; i < s.step.size(); ++i) {
            if (!std::isfinite(s.mean[i])) continue;
            const double lo = std::isfinite(s.lower[i]) ? s.lower[i] : s.mean[i];
            const double hi = std::isfinite(s.upper[i]) ? s.upper[i] : s.mean[i];
            upper << (first ? "M" : " L") << px(s.step[i]) << ',' << py(hi);
            line << (first ? "M" : " L") << px(s.step[i]) << ',' << py(s.mean[i]);
            lows.emplace_back(px(s.step[i]), py(lo));
            first = false;
        }
        if (first) continue;
        for (auto it = lows.rbegin(); it != lows.rend(); ++it) lower << " L" << it->first << ',' << it->second;
        svg << "<path d=\"" << upper.str() << lower.str() << " Z\" fill=\"" << color
            << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        svg << "<path d=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"/>\n";
        const double ly = T + 16 + 18.0 * static_cast<double>(k);
        svg << "<line x1=\"" << W - R + 12 << "\" x2=\"" << W - R + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"3\"/><text x=\"" << W - R + 38 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.label) << "</text>\n";
    }
    svg << "</svg>\n";

    auto out = open_out(out_svg);
    out << svg.str();
}

}  // namespace streamx
