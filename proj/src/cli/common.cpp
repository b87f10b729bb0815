#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "losstrunc/errors.hpp"

namespace losstrunc::cli::detail {

std::vector<double> mean_grid(const ExperimentConfig& cfg) {
  if (!(cfg.mean_step > 0.0) || !std::isfinite(cfg.mean_step)) throw ConfigError("mean-step must be positive");
  if (!(cfg.mean_lo <= cfg.mean_hi)) throw ConfigError("mean-lo must not exceed mean-hi");
  const double span = (cfg.mean_hi - cfg.mean_lo) / cfg.mean_step;
  if (span > 1e7) throw ConfigError("mean grid has too many points");
  const auto n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> means(n);
  // Snap to a 1e-9 lattice so decimal grids print as typed (0.03, not 0.030000000000000249).
  const bool snap = cfg.mean_step >= 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = cfg.mean_lo + cfg.mean_step * static_cast<double>(i);
    means[i] = snap ? std::round(m * 1e9) / 1e9 : m;
  }
  return means;
}

GridSpec integration_grid(const ExperimentConfig& cfg, const GaussianMixture1D& mix) {
  if (!(cfg.model_variance > 0.0)) throw ConfigError("model-variance must be positive");
  double lo = cfg.mean_lo, hi = cfg.mean_hi, sigma = std::sqrt(cfg.model_variance);
  for (const auto& c : mix.components()) {
    lo = std::min(lo, c.gaussian.mean());
    hi = std::max(hi, c.gaussian.mean());
    sigma = std::max(sigma, c.gaussian.stddev());
  }
  try {
    return GridSpec(lo - 8.0 * sigma, hi + 8.0 * sigma, cfg.grid_points);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid grid: ") + e.what());
  }
}

std::size_t argmin(const std::vector<double>& values) {
  return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    parts.push_back(item.substr(b, e - b + 1));
  }
  return parts;
}

}  // namespace losstrunc::cli::detail

namespace losstrunc::cli::detail {

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace losstrunc::cli::detail
