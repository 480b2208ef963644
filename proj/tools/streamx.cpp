// Command-line front end: run, ablate, gvf, plot, synth.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamx/harness.hpp"

namespace {

using streamx::ExperimentConfig;

// Settings shared by run / ablate / gvf. Each maps to a config key.
const std::vector<std::pair<std::string, std::string>> kSettingFlags = {
    {"env", "environment id (random_walk, gridworld, pole_balance, point_mass, timeseries)"},
    {"algo", "agent (stream_td, stream_q, stream_sarsa, stream_ac)"},
    {"steps", "total environment steps per seed"},
    {"seeds", "seed list, e.g. 0-9 or 1,4,7"},
    {"gamma", "discount factor"},
    {"lambda", "trace decay"},
    {"alpha", "step size"},
    {"kappa", "value scaling factor"},
    {"kappa-pi", "policy scaling factor"},
    {"tau", "entropy coefficient"},
    {"sparsity", "sparse-init ratio"},
    {"optimizer", "obgd, adaptive_obgd, sgd, adaptive_moments"},
    {"epsilon-start", "initial exploration rate"},
    {"epsilon-end", "final exploration rate"},
    {"epsilon-fraction", "fraction of steps over which epsilon decays"},
    {"hidden", "hidden widths, e.g. 128,128"},
    {"layernorm", "true/false"},
    {"sparse-init", "true/false"},
    {"obs-norm", "true/false"},
    {"reward-scale", "true/false"},
    {"out", "output directory"},
    {"jobs", "parallel seeds"},
    {"stop-at-return", "stop a seed once its 100-episode mean reaches this"},
    {"baseline-alpha", "step size of the adaptive-moments ablation"},
    {"csv", "time-series CSV path"},
    {"cumulant-col", "cumulant column"},
    {"beta", "memory-trace decay"},
    {"series-rows", "rows of the synthetic series"},
    {"series-seed", "seed of the synthetic series"},
};

struct SettingArgs {
    std::string config_path;
    std::map<std::string, std::string> values;
    bool audit = false;
};

void add_settings(CLI::App* cmd, SettingArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file (flags override it)")
        ->check(CLI::ExistingFile);
    for (const auto& [name, help] : kSettingFlags) cmd->add_option("--" + name, args.values[name], help);
    cmd->add_flag("--audit", args.audit, "log per-step audit rows");
}

ExperimentConfig build_config(const SettingArgs& args, ExperimentConfig base = {}) {
    ExperimentConfig cfg = args.config_path.empty() ? base : streamx::load_config(args.config_path, base);
    for (const auto& [name, _] : kSettingFlags) {
        const auto& v = args.values.at(name);
        if (!v.empty()) streamx::apply_setting(cfg, name, v);
    }
    if (args.audit) cfg.audit = true;
    cfg.validate();
    return cfg;
}

int report(const streamx::AggregateResult& r) {
    std::printf("%-18s final_return=%.4f healthy=%zu diverged=%zu\n", r.label.c_str(), r.final_return(),
                r.healthy_count, r.diverged_count);
    for (const auto& run : r.runs) {
        if (run.log.diverged) std::fprintf(stderr, "seed %llu diverged: %s\n",
                                           static_cast<unsigned long long>(run.seed), run.log.diagnostic.c_str());
    }
    return r.healthy_count == 0 ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming deep reinforcement learning experiments"};
    app.require_subcommand(1);

    SettingArgs run_args, ablate_args, gvf_args;
    auto* run = app.add_subcommand("run", "run seeds of one configuration");
    add_settings(run, run_args);
    auto* ablate = app.add_subcommand("ablate", "base config plus one-off component ablations");
    add_settings(ablate, ablate_args);
    auto* gvf = app.add_subcommand("gvf", "stream TD prediction on a time series");
    add_settings(gvf, gvf_args);

    std::vector<std::string> plot_inputs;
    std::vector<std::string> plot_labels;
    std::string plot_out, plot_title;
    auto* plot = app.add_subcommand("plot", "SVG chart from aggregate CSV files");
    plot->add_option("inputs", plot_inputs, "aggregate CSV files")->required();
    plot->add_option("--out,-o", plot_out, "output SVG")->required();
    plot->add_option("--label", plot_labels, "legend label per input");
    plot->add_option("--title", plot_title, "chart title");

    std::string synth_out;
    std::size_t synth_rows = 70080;
    std::uint64_t synth_seed = 2016;
    auto* synth = app.add_subcommand("synth", "write the synthetic time series as CSV");
    synth->add_option("--out,-o", synth_out, "output CSV")->required();
    synth->add_option("--rows", synth_rows, "row count");
    synth->add_option("--seed", synth_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = build_config(run_args);
            return report(streamx::run_experiment(cfg));
        }
        if (ablate->parsed()) {
            const auto cfg = build_config(ablate_args);
            int healthy = 0;
            for (const auto& r : streamx::run_ablation(cfg)) healthy += report(r) == 0 ? 1 : 0;
            std::printf("summary: %s\n", (cfg.out_dir / "ablation.csv").string().c_str());
            return healthy == 0 ? 3 : 0;
        }
        if (gvf->parsed()) {
            ExperimentConfig base;
            base.env = "timeseries";
            const auto cfg = build_config(gvf_args, base);
            const auto result = streamx::run_gvf(cfg);
            std::size_t healthy = 0;
            for (const auto& r : result.seeds) {
                std::printf("seed %llu mse_first=%.6g mse_last=%.6g%s\n", static_cast<unsigned long long>(r.seed),
                            r.mse_first, r.mse_last, r.diverged ? " (diverged)" : "");
                healthy += r.diverged ? 0 : 1;
            }
            std::printf("mean mse_first=%.6g mse_last=%.6g ratio=%.3f\n", result.mean_mse_first(),
                        result.mean_mse_last(), result.mean_mse_first() / result.mean_mse_last());
            return healthy == 0 ? 3 : 0;
        }
        if (plot->parsed()) {
            if (!plot_labels.empty() && plot_labels.size() != plot_inputs.size()) {
                throw std::invalid_argument("--label must be given once per input");
            }
            std::vector<streamx::PlotSeries> series;
            for (std::size_t i = 0; i < plot_inputs.size(); ++i) {
                series.push_back(streamx::read_aggregate_csv(plot_inputs[i], plot_labels.empty() ? "" : plot_labels[i]));
            }
            streamx::plot_svg(series, plot_out, plot_title);
            return 0;
        }
        if (synth->parsed()) {
            streamx::write_timeseries_csv(streamx::synthetic_series(synth_rows, synth_seed), synth_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
