#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "losstrunc/cli/config.hpp"

namespace losstrunc::cli {

// Each command writes its outputs under cfg.out_dir. Configuration problems
// surface as ConfigError; anything else is a runtime failure.

/// toy_fig1_curve.csv (mean, kl_objective, tv) + toy_fig1_summary.json.
void cmd_toy_fig1(const ExperimentConfig& cfg);

/// bound_fig4_curve.csv (mean, tv_squared, pinsker_bound_squared,
/// truncated_bound_squared) + bound_fig4_summary.json.
void cmd_bound_fig4(const ExperimentConfig& cfg);

/// trainlog.csv, checkpoint.txt, metrics.json (and sweep.csv for --c-list).
void cmd_train(const ExperimentConfig& cfg);

/// samples.tsv + quality.csv.
void cmd_sample(const ExperimentConfig& cfg);

/// quantile_accuracy.csv, quantile_latency.csv, quantile_summary.json.
void cmd_quantile_bench(const ExperimentConfig& cfg);

/// Synthetic loss stream used by the quantile bench: uniform on [0, 100],
/// normal(50, 10), lognormal(0, 1), bimodal 0.9 N(1, 0.5) + 0.1 N(40, 2), or
/// constant 5.
std::vector<double> bench_stream(const std::string& kind, std::size_t length, std::uint64_t seed, std::uint64_t index);

/// Argument parsing and dispatch; returns the process exit code
/// (0 success, 1 runtime failure, 2 configuration error).
int run_app(int argc, const char* const* argv);

}  // namespace losstrunc::cli
