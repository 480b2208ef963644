#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streamx/agents.hpp"
#include "streamx/envs.hpp"

namespace streamx {

inline constexpr std::size_t kCurveBins = 100;
inline constexpr double kBandZ = 1.645;  // two-sided 90% normal quantile

struct ExperimentConfig {
    std::string env = "random_walk";
    AgentKind agent = AgentKind::StreamTD;
    AgentConfig agent_config;
    std::int64_t total_steps = 100000;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path out_dir = "runs";
    bool audit = false;
    int jobs = 1;
    /// Stop a seed early once its 100-episode mean return reaches this value.
    std::optional<double> stop_at_return;
    /// Step size of the adaptive-moments ablation; unset means the agent's
    /// classic default (classic_alpha()).
    std::optional<double> baseline_alpha;

    // Time-series stream (env = "timeseries"). Without a CSV path a synthetic
    // series of `series_rows` rows is generated from `series_seed`.
    std::filesystem::path csv;
    std::string cumulant_col = "OT";
    double beta = 0.999;
    std::size_t series_rows = 70080;
    std::uint64_t series_seed = 2016;

    /// Throws std::invalid_argument on the first problem (unknown env, zero
    /// steps, no seeds, bad agent parameters, incompatible action space).
    void validate() const;
};

/// Applies one `key = value` setting. Keys mirror the CLI flag names with
/// '-' and '_' interchangeable. Throws on unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Parses a flat key/value text: one `key = value` per line, '#' comments.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
std::string config_to_text(const ExperimentConfig& cfg);
/// Seed lists: "3", "0,4,7" or inclusive ranges "0-9" (mixable).
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Adaptive-moments step size of the classic baselines per agent kind.
double classic_alpha(AgentKind kind);

std::unique_ptr<Environment> make_experiment_env(const ExperimentConfig& cfg);

struct SeedRun {
    std::uint64_t seed = 0;
    RunLog log;
    std::vector<double> curve;  // kCurveBins values, NaN before the first episode
};

struct AggregateResult {
    std::string label;
    std::vector<std::int64_t> bin_steps;  // right edge of each bin
    std::vector<SeedRun> runs;            // ordered like the configured seeds
    std::vector<double> mean;
    std::vector<double> stderr_mean;
    std::vector<double> half_width;  // kBandZ * stderr
    std::vector<std::size_t> counts;
    std::size_t diverged_count = 0;
    std::size_t healthy_count = 0;

    /// Mean over healthy seeds of each seed's last-100-episode mean return.
    double final_return() const;
};

/// Curve of one run: mean raw return of the episodes ending in each
/// 1%-of-budget bin; empty bins repeat the previous value.
std::vector<double> learning_curve(const RunLog& log, std::int64_t total_steps, std::size_t bins = kCurveBins);

/// Cross-seed mean, standard error and 90% band per bin over healthy runs.
void aggregate_curves(AggregateResult& result);

/// Runs all seeds (at most cfg.jobs at a time) and writes, under out_dir:
/// config.txt, run_seed<S>.csv, audit_seed<S>.csv (audit mode),
/// checkpoint_seed<S>.netsnap, curves.csv and aggregate.csv.
AggregateResult run_experiment(const ExperimentConfig& cfg, const std::string& label = "base");

/// Ablation set: base, adaptive_moments, no_layernorm, dense_init,
/// no_data_scaling. Each variant writes into out_dir/<label>; a summary lands
/// in out_dir/ablation.csv and an overlay plot in out_dir/ablation.svg.
std::vector<AggregateResult> run_ablation(const ExperimentConfig& cfg);

/// Variant configs used by run_ablation, in output order.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(const ExperimentConfig& cfg);

// --- GVF prediction --------------------------------------------------------

struct GvfSeedResult {
    std::uint64_t seed = 0;
    bool diverged = false;
    std::vector<double> predictions;  // sigma-rescaled v(S_t) before each update
    double mse_first = 0.0;
    double mse_last = 0.0;
};

struct GvfResult {
    std::vector<double> cumulants;
    std::vector<double> true_returns;
    std::size_t evaluated = 0;  // leading transitions whose oracle tail weight is below 1e-4
    std::size_t window = 0;     // 5% of `evaluated`
    std::vector<GvfSeedResult> seeds;

    double mean_mse_first() const;
    double mean_mse_last() const;
};

/// Stream TD on the configured time series. Writes gvf_seed<S>.csv and
/// gvf_summary.csv under out_dir when `write` is set.
GvfResult run_gvf(const ExperimentConfig& cfg, bool write = true);

// --- output ----------------------------------------------------------------

void write_run_csv(const RunLog& log, const std::filesystem::path& path);
void write_audit_csv(const RunLog& log, const std::filesystem::path& path);
void write_curves_csv(const AggregateResult& result, const std::filesystem::path& path);
void write_aggregate_csv(const AggregateResult& result, const std::filesystem::path& path);

struct PlotSeries {
    std::string label;
    std::vector<double> step;
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Reads an aggregate CSV (columns step, mean, lower, upper at least).
/// Malformed input throws with the offending line number.
PlotSeries read_aggregate_csv(const std::filesystem::path& path, const std::string& label = "");
/// SVG line chart: one mean line and shaded band per series. Throws, and
/// writes nothing, when `series` is empty or has no finite points.
void plot_svg(const std::vector<PlotSeries>& series, const std::filesystem::path& out_svg,
              const std::string& title = "");

}  // namespace streamx
