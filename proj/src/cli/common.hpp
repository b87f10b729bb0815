#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "losstrunc/cli/config.hpp"
#include "losstrunc/distributions.hpp"

namespace losstrunc::cli::detail {

/// Model means mean_lo, mean_lo + step, ... up to mean_hi.
std::vector<double> mean_grid(const ExperimentConfig& cfg);

/// Quadrature grid wide enough for every mixture component and every model
/// mean on the curve.
GridSpec integration_grid(const ExperimentConfig& cfg, const GaussianMixture1D& mix);

/// Index of the first minimum.
std::size_t argmin(const std::vector<double>& values);

std::ofstream open_output(const std::filesystem::path& path);

std::vector<std::string> split_list(const std::string& text);

}  // namespace losstrunc::cli::detail

namespace losstrunc::cli::detail {

/// JSON has no infinity; non-finite values are written as strings.
nlohmann::json json_number(double v);

inline constexpr int kCurveDigits = 12;

}  // namespace losstrunc::cli::detail
