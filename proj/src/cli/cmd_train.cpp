#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <numeric>

#include "common.hpp"
#include "losstrunc/cli/commands.hpp"
#include "losstrunc/csv.hpp"
#include "losstrunc/errors.hpp"
#include "losstrunc/synth.hpp"
#include "losstrunc/trainer.hpp"

namespace losstrunc::cli {

namespace {

constexpr std::size_t kSteadyStateExamples = 20000;

struct RunResult {
  double c;
  AnyModel model;
  TrainLog log;
  nlohmann::json metrics;
};

double steady_drop_rate(const TrainLog& log) {
  const std::size_t end = log.example_count();
  const std::size_t first = log.first_truncated_example();
  if (first >= end) return 0.0;
  const std::size_t begin = std::max(first, end > kSteadyStateExamples ? end - kSteadyStateExamples : 0);
  return log.dropped_fraction(begin, end);
}

nlohmann::json log_metrics(const TrainLog& log, std::size_t window) {
  nlohmann::json j;
  j["examples"] = log.example_count();
  j["truncated_examples"] = log.example_count() - std::min(log.example_count(), log.first_truncated_example());
  j["steady_state_drop_rate"] = steady_drop_rate(log);
  j["drop_rate_trace_span"] = window;
  j["drop_rate_trace"] = log.drop_rate_trace(window);
  return j;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? detail::json_number(*v) : nlohmann::json(nullptr);
}

/// Loss at the given quantile of the training references under the model.
double loss_quantile(const TabularSeqModel& model, const LabeledDataset& data, double level) {
  std::vector<double> losses;
  losses.reserve(data.size());
  for (const auto& r : data.records()) losses.push_back(model.example_loss(r.context, r.reference));
  std::sort(losses.begin(), losses.end());
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(losses.size())));
  return losses[std::clamp<std::size_t>(k, 1, losses.size()) - 1];
}

nlohmann::json split_json(const LossSplitReport& r) {
  nlohmann::json j;
  j["mean_loss_clean"] = optional_json(r.mean_loss_clean);
  j["mean_loss_noisy"] = optional_json(r.mean_loss_noisy);
  j["loss_ratio"] = optional_json(r.loss_ratio);
  j["bin_edges"] = r.bin_edges;
  j["histogram_clean"] = r.histogram_clean;
  j["histogram_noisy"] = r.histogram_noisy;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    rows.push_back({{"threshold", r.thresholds[i]},
                    {"count_above", r.count_above[i]},
                    {"noisy_fraction_above", optional_json(r.noisy_fraction_above[i])}});
  }
  j["above_threshold"] = rows;
  return j;
}

RunResult train_noisy_seq(const ExperimentConfig& cfg, double c, const NoisySeqSpec& spec,
                          const LabeledDataset& data) {
  const std::vector<Example<TokenSequence>> examples = data.unlabeled();
  const TrainConfig config = train_config(cfg, c);
  TabularSeqModel model(spec.contexts, spec.length, spec.vocab);
  LossTruncationTrainer<TabularSeqModel> trainer(model, examples, config);
  trainer.run();

  nlohmann::json m = log_metrics(trainer.log(), trainer.effective_window());
  m["c"] = c;
  m["exact_tv_to_clean"] = exact_tv_to_clean(model, spec);
  m["hallucinated_mass"] = hallucinated_mass(model, spec);
  m["dataset_hallucinated_fraction"] = data.hallucinated_fraction();
  const double q90 = loss_quantile(model, data, 0.9);
  m["loss_split"] = split_json(loss_split_report(model, data, {q90}));
  return {c, AnyModel(std::move(model)), trainer.take_log(), std::move(m)};
}

RunResult train_gaussian(const ExperimentConfig& cfg, double c, const std::vector<Example<double>>& examples) {
  if (!(cfg.model_variance > 0.0)) throw ConfigError("model-variance must be positive");
  const TrainConfig config = train_config(cfg, c);
  GaussianLocationModel model(0.0, std::sqrt(cfg.model_variance));
  LossTruncationTrainer<GaussianLocationModel> trainer(model, examples, config);
  trainer.run();

  nlohmann::json m = log_metrics(trainer.log(), trainer.effective_window());
  m["c"] = c;
  m["theta"] = model.theta();
  return {c, AnyModel(model), trainer.take_log(), std::move(m)};
}

void write_outputs(const ExperimentConfig& cfg, const RunResult& run) {
  const std::filesystem::path dir(cfg.out_dir);
  if (cfg.trainlog) {
    auto out = detail::open_output(dir / "trainlog.csv");
    run.log.write_csv(out);
  }
  save_checkpoint(dir / "checkpoint.txt", run.model);
  write_json(dir / "metrics.json", run.metrics);
}

void write_sweep(const ExperimentConfig& cfg, std::vector<RunResult>& runs) {
  std::sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) { return a.c < b.c; });
  const std::filesystem::path dir(cfg.out_dir);
  auto out = detail::open_output(dir / "sweep.csv");
  CsvWriter csv(out);
  const bool seq = cfg.task == "noisy-seq";
  if (seq) {
    csv.row({"c", "exact_tv_to_clean", "hallucinated_mass", "steady_state_drop_rate"});
  } else {
    csv.row({"c", "theta", "steady_state_drop_rate"});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : runs) {
    const double drop = r.metrics["steady_state_drop_rate"].get<double>();
    if (seq) {
      csv.row({format_double(r.c), format_double(r.metrics["exact_tv_to_clean"].get<double>()),
               format_double(r.metrics["hallucinated_mass"].get<double>()), format_double(drop)});
    } else {
      csv.row({format_double(r.c), format_double(r.metrics["theta"].get<double>()), format_double(drop)});
    }
    nlohmann::json m = r.metrics;
    m.erase("drop_rate_trace");
    rows.push_back(std::move(m));
  }
  write_json(dir / "sweep.json", {{"task", cfg.task}, {"runs", rows}});
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg) {
  if (cfg.dataset_size == 0) throw ConfigError("dataset-size must be positive");
  std::vector<double> cs = parse_double_list(cfg.c_list);
  for (double c : cs) {
    if (!(c >= 0.0 && c < 1.0)) throw ConfigError("c-list values must lie in [0, 1)");
  }
  if (cs.empty()) cs.push_back(cfg.c);
  for (double c : cs) train_config(cfg, c);  // validates before any output is written
  const bool sweep = !cfg.c_list.empty();
  const std::filesystem::path dir(cfg.out_dir);

  std::function<RunResult(double)> run_one;
  std::optional<NoisySeqSpec> spec;
  LabeledDataset data;
  std::vector<Example<double>> gaussian_data;
  if (cfg.task == "noisy-seq") {
    spec = noisy_spec(cfg);
    data = gen_noisy_seq_data(*spec, cfg.dataset_size, cfg.seed);
    {
      auto out = detail::open_output(dir / "dataset.tsv");
      data.write(out);
    }
    {
      auto out = detail::open_output(dir / "dataset_train.tsv");
      data.write_unlabeled(out);
    }
    run_one = [&](double c) { return train_noisy_seq(cfg, c, *spec, data); };
  } else if (cfg.task == "gaussian") {
    const GaussianMixture1D mix = parse_mixture(cfg.mixture);
    for (double y : gen_gaussian_mixture_data(mix, cfg.dataset_size, cfg.seed)) gaussian_data.push_back({0, y});
    run_one = [&](double c) { return train_gaussian(cfg, c, gaussian_data); };
  } else {
    throw ConfigError("unknown task '" + cfg.task + "'");
  }

  if (!sweep) {
    write_outputs(cfg, run_one(cs.front()));
    return;
  }
  std::vector<std::future<RunResult>> jobs;
  for (double c : cs) jobs.push_back(std::async(std::launch::async, run_one, c));
  std::vector<RunResult> runs;
  for (auto& j : jobs) runs.push_back(j.get());
  write_sweep(cfg, runs);
}

}  // namespace losstrunc::cli
