#include <filesystem>
#include <numeric>

#include "common.hpp"
#include "losstrunc/cli/commands.hpp"
#include "losstrunc/csv.hpp"
#include "losstrunc/divergence.hpp"
#include "losstrunc/errors.hpp"
#include "losstrunc/models.hpp"
#include "losstrunc/synth.hpp"
#include "losstrunc/trainer.hpp"

namespace losstrunc::cli {

namespace {

double fit_theta(const std::vector<Example<double>>& data, const TrainConfig& config, double sigma) {
  GaussianLocationModel model(0.0, sigma);
  train_truncated(model, data, config);
  return model.theta();
}

}  // namespace

void cmd_toy_fig1(const ExperimentConfig& cfg) {
  const GaussianMixture1D mix = parse_mixture(cfg.mixture);
  const std::vector<double> means = detail::mean_grid(cfg);
  const GridSpec grid = detail::integration_grid(cfg, mix);

  std::vector<double> kl(means.size()), tv(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    const Gaussian1D q(means[i], cfg.model_variance);
    try {
      const GridDensities d = evaluate_on_grid(mix, q, grid);
      kl[i] = kl_on_grid(d.weights, d.p, d.log_q);
      tv[i] = std::clamp(0.5 * d.weights.dot((d.p - d.q).cwiseAbs()), 0.0, 1.0);
    } catch (const PrecisionError& e) {
      throw ConfigError(std::string("invalid grid: ") + e.what());
    }
  }

  const std::filesystem::path dir(cfg.out_dir);
  {
    auto out = detail::open_output(dir / "toy_fig1_curve.csv");
    CsvWriter csv(out);
    csv.row({"mean", "kl_objective", "tv"});
    for (std::size_t i = 0; i < means.size(); ++i) {
      csv.row({format_double(means[i], detail::kCurveDigits), format_double(kl[i], detail::kCurveDigits),
               format_double(tv[i], detail::kCurveDigits)});
    }
  }

  // Fits on sampled data: plain log loss (c = 0) and loss truncation.
  const std::vector<double> draws = gen_gaussian_mixture_data(mix, cfg.dataset_size, cfg.seed);
  std::vector<Example<double>> data;
  data.reserve(draws.size());
  for (double y : draws) data.push_back({0, y});
  const double sigma = std::sqrt(cfg.model_variance);
  const double truncated = fit_theta(data, train_config(cfg, cfg.c), sigma);
  const double plain = fit_theta(data, train_config(cfg, 0.0), sigma);

  nlohmann::json summary;
  summary["kl_argmin"] = means[detail::argmin(kl)];
  summary["tv_argmin"] = means[detail::argmin(tv)];
  summary["kl_min"] = kl[detail::argmin(kl)];
  summary["tv_min"] = tv[detail::argmin(tv)];
  summary["mixture_mean"] = mix.mean();
  summary["sample_mean"] = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  summary["truncated_fit"] = {{"c", cfg.c}, {"theta", truncated}};
  summary["plain_fit"] = {{"c", 0.0}, {"theta", plain}};
  write_json(dir / "toy_fig1_summary.json", summary);
}

}  // namespace losstrunc::cli
