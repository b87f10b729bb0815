#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "losstrunc/cli/commands.hpp"
#include "losstrunc/errors.hpp"

namespace losstrunc::cli {

namespace {

const std::map<std::string, std::string>& subcommands() {
  static const std::map<std::string, std::string> kCommands = {
      {"toy-fig1", "Fit a single Gaussian to a Gaussian mixture: log-loss vs TV objective curves"},
      {"bound-fig4", "TV^2, Pinsker bound^2 and truncated bound^2 across Gaussian means"},
      {"train", "Train with loss truncation (hotstart, quantile tracking, truncated updates)"},
      {"sample", "Decode from a checkpoint (direct, rejection, top-k, top-p)"},
      {"quantile-bench", "Histogram quantile tracker vs exact sort oracle"},
  };
  return kCommands;
}

void register_options(CLI::App& app, ExperimentConfig& cfg, double& hotstart_lr, double& truncated_lr) {
  app.add_option("--config", cfg.config_file, "Flat key = value file mirroring the flags");
  app.add_option("--out-dir", cfg.out_dir, "Output directory");
  app.add_option("--seed", cfg.seed, "Global seed");

  app.add_option("--task", cfg.task, "Training task")->check(CLI::IsMember({"gaussian", "noisy-seq"}));
  app.add_option("--c", cfg.c, "Fraction of highest-loss examples to drop");
  app.add_option("--c-list", cfg.c_list, "Comma-separated c values for a sweep");
  app.add_option("--steps", cfg.steps, "Total training steps (hotstart included)");
  app.add_option("--hotstart-steps", cfg.hotstart_steps, "Plain log-loss steps before truncation");
  app.add_option("--batch-size", cfg.batch_size, "Minibatch size");
  app.add_option("--window", cfg.window, "Quantile window (examples)");
  app.add_option("--bins", cfg.bins, "Quantile histogram bins");
  app.add_option("--hotstart-lr", hotstart_lr, "Hotstart learning rate");
  app.add_option("--truncated-lr", truncated_lr, "Truncated-phase learning rate");
  app.add_option("--trainlog", cfg.trainlog, "Write the per-example training log");

  app.add_option("--mixture", cfg.mixture, "Reference mixture as w:mean:variance,...");
  app.add_option("--model-variance", cfg.model_variance, "Fixed variance of the Gaussian model");
  app.add_option("--mean-lo", cfg.mean_lo, "Lowest model mean on the curve");
  app.add_option("--mean-hi", cfg.mean_hi, "Highest model mean on the curve");
  app.add_option("--mean-step", cfg.mean_step, "Spacing of model means");
  app.add_option("--grid-points", cfg.grid_points, "Quadrature points");

  app.add_option("--contexts", cfg.contexts, "Noisy-seq context count");
  app.add_option("--vocab", cfg.vocab, "Noisy-seq vocabulary size");
  app.add_option("--length", cfg.length, "Noisy-seq sequence length");
  app.add_option("--epsilon", cfg.epsilon, "Fraction of hallucinated references");
  app.add_option("--fact-positions", cfg.fact_positions, "Comma-separated positions that can be hallucinated");
  app.add_option("--dataset-size", cfg.dataset_size, "Training records to generate");

  app.add_option("--checkpoint", cfg.checkpoint, "Model checkpoint to sample from");
  app.add_option("--match-checkpoint", cfg.match_checkpoint, "Baseline checkpoint for entropy-matched top-k/top-p");
  app.add_option("--decoder", cfg.decoder, "Decoder")->check(CLI::IsMember({"direct", "rejection", "top_k", "top_p"}));
  app.add_option("--alpha", cfg.alpha, "Rejection level");
  app.add_option("--n-candidates", cfg.n_candidates, "Rejection candidates per output");
  app.add_option("--top-k", cfg.top_k, "k for top-k decoding");
  app.add_option("--top-p", cfg.top_p, "p for top-p decoding");
  app.add_option("--samples-per-context", cfg.samples_per_context, "Samples drawn per context");

  app.add_option("--streams", cfg.streams, "Comma-separated stream kinds");
  app.add_option("--stream-count", cfg.stream_count, "Streams per kind");
  app.add_option("--stream-length", cfg.stream_length, "Losses per stream");
  app.add_option("--levels", cfg.levels, "Comma-separated quantile levels");
}

std::vector<std::string> expand_config_file(std::vector<std::string> args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      continue;
    }
    // File values go first so that any explicit flag, taking the last
    // occurrence, overrides them.
    const std::vector<std::string> file_tokens = read_config_file(path);
    const std::size_t insert_at = args.size() > 1 ? 2 : 1;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), file_tokens.begin(), file_tokens.end());
    break;
  }
  return args;
}

}  // namespace

int run_app(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  const std::string command = args.size() > 1 ? args[1] : std::string();
  ExperimentConfig cfg = defaults_for(command);

  CLI::App app{"Loss truncation experiments"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  for (const auto& [name, help] : subcommands()) app.add_subcommand(name, help)->fallthrough();

  double hotstart_lr = 0.0, truncated_lr = 0.0;
  register_options(app, cfg, hotstart_lr, truncated_lr);

  try {
    args = expand_config_file(std::move(args));
    std::vector<const char*> raw;
    raw.reserve(args.size());
    for (const auto& a : args) raw.push_back(a.c_str());
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }
  if (app.count("--hotstart-lr")) cfg.hotstart_lr = hotstart_lr;
  if (app.count("--truncated-lr")) cfg.truncated_lr = truncated_lr;
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    std::filesystem::create_directories(cfg.out_dir);
    write_json(std::filesystem::path(cfg.out_dir) / "config.json", to_json(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (cfg.command == "toy-fig1") {
      cmd_toy_fig1(cfg);
    } else if (cfg.command == "bound-fig4") {
      cmd_bound_fig4(cfg);
    } else if (cfg.command == "train") {
      cmd_train(cfg);
    } else if (cfg.command == "sample") {
      cmd_sample(cfg);
    } else if (cfg.command == "quantile-bench") {
      cmd_quantile_bench(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace losstrunc::cli
