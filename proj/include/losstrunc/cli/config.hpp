#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "losstrunc/distributions.hpp"
#include "losstrunc/synth.hpp"
#include "losstrunc/trainer.hpp"

namespace losstrunc::cli {

/// Every knob of every subcommand. Defaults depend on the subcommand (see
/// defaults_for); flags override values read from --config.
struct ExperimentConfig {
  std::string command;
  std::string config_file;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  // Training.
  std::string task = "noisy-seq";
  double c = 0.6;
  std::string c_list;
  std::size_t steps = 100000;
  std::size_t hotstart_steps = 50000;
  std::size_t batch_size = 10;
  std::size_t window = 10000;
  std::size_t bins = 1000;
  std::optional<double> hotstart_lr;
  std::optional<double> truncated_lr;
  bool trainlog = true;

  // Gaussian mixture toy.
  std::string mixture = "0.8:0:1,0.2:15:1";
  double model_variance = 1.0;
  double mean_lo = -2.0;
  double mean_hi = 6.0;
  double mean_step = 0.01;
  int grid_points = 4001;

  // Noisy sequence task.
  int contexts = 50;
  int vocab = 20;
  int length = 3;
  double epsilon = 0.2;
  std::string fact_positions = "2";
  std::size_t dataset_size = 10000;

  // Sampling.
  std::string checkpoint;
  std::string match_checkpoint;
  std::string decoder = "direct";
  double alpha = 0.1;
  std::size_t n_candidates = 100;
  std::size_t top_k = 10;
  double top_p = 0.9;
  std::size_t samples_per_context = 1;

  // Quantile bench.
  std::string streams = "uniform,normal,lognormal,bimodal,constant";
  std::size_t stream_count = 4;
  std::size_t stream_length = 100000;
  std::string levels = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
};

ExperimentConfig defaults_for(const std::string& command);

nlohmann::json to_json(const ExperimentConfig& cfg);

/// "w:mean:variance,w:mean:variance,..."
GaussianMixture1D parse_mixture(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Learning rates resolved for the task: noisy-seq 1.0 / 0.1, gaussian
/// 0.01 / 0.01 unless set explicitly.
TrainConfig train_config(const ExperimentConfig& cfg, double c);
NoisySeqSpec noisy_spec(const ExperimentConfig& cfg);

/// Reads a flat "key = value" document ('#' starts a comment) into flag
/// tokens: {"--key", "value", ...}.
std::vector<std::string> read_config_file(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace losstrunc::cli
