#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "losstrunc/distributions.hpp"
#include "losstrunc/errors.hpp"

namespace losstrunc {

/// A divergence value that may be infinite.
///
/// Infinity is a distinct state, never a large finite number, and is carried
/// through every bound computed from it. value() refuses to hand out an
/// infinite divergence as a plain number; as_double() maps it to +inf for
/// reporting.
template <typename Scalar>
class DivergenceT {
 public:
  static constexpr DivergenceT infinite() { return DivergenceT(true, Scalar(0)); }
  static DivergenceT finite(Scalar v) {
    if (!std::isfinite(v)) throw DomainError("finite divergence constructed from a non-finite value");
    return DivergenceT(false, v);
  }

  bool is_infinite() const { return infinite_; }
  bool is_finite() const { return !infinite_; }

  Scalar value() const {
    if (infinite_) throw DomainError("divergence is infinite");
    return value_;
  }
  Scalar as_double() const { return infinite_ ? std::numeric_limits<Scalar>::infinity() : value_; }

  friend bool operator==(const DivergenceT& a, const DivergenceT& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend bool operator<(const DivergenceT& a, const DivergenceT& b) {
    if (a.infinite_) return false;
    return b.infinite_ || a.value_ < b.value_;
  }

  std::string to_string() const { return infinite_ ? std::string("inf") : std::to_string(value_); }

 private:
  constexpr DivergenceT(bool inf, Scalar v) : infinite_(inf), value_(v) {}
  bool infinite_;
  Scalar value_;
};

using Divergence = DivergenceT<double>;

namespace detail {
template <typename Scalar>
void require_same_support(const CategoricalT<Scalar>& p, const CategoricalT<Scalar>& q) {
  if (p.size() != q.size()) {
    throw DimensionError("support sizes differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
}
}  // namespace detail

/// Half the L1 distance between two probability vectors.
template <typename Scalar>
Scalar tv_discrete(const CategoricalT<Scalar>& p, const CategoricalT<Scalar>& q) {
  detail::require_same_support(p, q);
  return std::min(Scalar(1), Scalar(0.5) * (p.probs() - q.probs()).template lpNorm<1>());
}

/// KL(p || q) in nats. Atoms with p_i = 0 contribute nothing; p_i > 0 with
/// q_i = 0 makes the divergence infinite.
template <typename Scalar>
DivergenceT<Scalar> kl_discrete(const CategoricalT<Scalar>& p, const CategoricalT<Scalar>& q) {
  detail::require_same_support(p, q);
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p(i);
    if (pi == Scalar(0)) continue;
    const Scalar qi = q(i);
    if (qi == Scalar(0)) return DivergenceT<Scalar>::infinite();
    sum += pi * (std::log(pi) - std::log(qi));
  }
  return DivergenceT<Scalar>::finite(std::max(Scalar(0), sum));
}

template <typename Scalar>
Scalar entropy_discrete(const CategoricalT<Scalar>& p) {
  Scalar h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > Scalar(0)) h -= p(i) * std::log(p(i));
  }
  return std::clamp(h, Scalar(0), std::log(static_cast<Scalar>(p.size())));
}

inline constexpr double kBoundaryMassTolerance = 1e-6;
inline constexpr int kDefaultGridPoints = 4001;

/// [min mean - 8 sigma_max, max mean + 8 sigma_max] with 4001 points,
/// covering every component of p and the model q.
template <typename Scalar>
GridSpec default_grid(const GaussianMixture1DT<Scalar>& p, const Gaussian1DT<Scalar>& q,
                      int points = kDefaultGridPoints) {
  double lo = q.mean(), hi = q.mean(), sigma = q.stddev();
  for (const auto& c : p.components()) {
    lo = std::min<double>(lo, c.gaussian.mean());
    hi = std::max<double>(hi, c.gaussian.mean());
    sigma = std::max<double>(sigma, c.gaussian.stddev());
  }
  return GridSpec(lo - 8.0 * sigma, hi + 8.0 * sigma, points);
}

/// Throws PrecisionError when either density leaves more than 1e-6 mass
/// outside the grid, or the step does not resolve the narrowest component.
template <typename Scalar>
void check_grid(const GridSpec& grid, const GaussianMixture1DT<Scalar>& p, const Gaussian1DT<Scalar>& q) {
  const double outside_p = p.cdf(grid.lo) + (1.0 - p.cdf(grid.hi));
  const double outside_q = q.cdf(grid.lo) + (1.0 - q.cdf(grid.hi));
  if (outside_p > kBoundaryMassTolerance || outside_q > kBoundaryMassTolerance) {
    throw PrecisionError("grid [" + std::to_string(grid.lo) + ", " + std::to_string(grid.hi) +
                         "] leaves more than 1e-6 probability mass outside");
  }
  double sigma_min = q.stddev();
  for (const auto& c : p.components()) sigma_min = std::min<double>(sigma_min, c.gaussian.stddev());
  if (grid.step() > 0.25 * sigma_min) {
    throw PrecisionError("grid step " + std::to_string(grid.step()) + " does not resolve sigma " +
                         std::to_string(sigma_min));
  }
}

/// Composite trapezoid weights for a uniform grid.
inline Eigen::VectorXd trapezoid_weights(const GridSpec& grid) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(grid.points, grid.step());
  w(0) *= 0.5;
  w(grid.points - 1) *= 0.5;
  return w;
}

inline Eigen::VectorXd grid_nodes(const GridSpec& grid) {
  Eigen::VectorXd x(grid.points);
  for (int i = 0; i < grid.points; ++i) x(i) = grid.at(i);
  return x;
}

/// Densities (p, q) and log densities evaluated at every grid node.
struct GridDensities {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::VectorXd p;
  Eigen::VectorXd log_p;
  Eigen::VectorXd q;
  Eigen::VectorXd log_q;
};

template <typename Scalar>
GridDensities evaluate_on_grid(const GaussianMixture1DT<Scalar>& p, const Gaussian1DT<Scalar>& q,
                               const GridSpec& grid) {
  check_grid(grid, p, q);
  GridDensities d;
  d.nodes = grid_nodes(grid);
  d.weights = trapezoid_weights(grid);
  d.p.resize(grid.points);
  d.log_p.resize(grid.points);
  d.q.resize(grid.points);
  d.log_q.resize(grid.points);
  for (int i = 0; i < grid.points; ++i) {
    d.log_p(i) = p.log_pdf(d.nodes(i));
    d.p(i) = std::exp(d.log_p(i));
    d.log_q(i) = q.log_pdf(d.nodes(i));
    d.q(i) = std::exp(d.log_q(i));
  }
  return d;
}

/// Quadrature of p log(p/q) for densities tabulated on a grid. Nodes where p
/// underflows to zero contribute nothing; round-off below zero is clipped.
template <typename DerivedW, typename DerivedP, typename DerivedLogQ>
double kl_on_grid(const Eigen::MatrixBase<DerivedW>& weights, const Eigen::MatrixBase<DerivedP>& p_density,
                  const Eigen::MatrixBase<DerivedLogQ>& log_q) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p_density.size(); ++i) {
    const double pi = p_density(i);
    if (pi > 0.0) sum += weights(i) * pi * (std::log(pi) - log_q(i));
  }
  return std::max(0.0, sum);
}

/// 1/2 * integral |p - q| by composite trapezoid, clamped to [0, 1].
template <typename Scalar>
Scalar tv_continuous_1d(const GaussianMixture1DT<Scalar>& p, const Gaussian1DT<Scalar>& q, const GridSpec& grid) {
  const GridDensities d = evaluate_on_grid(p, q, grid);
  const double tv = 0.5 * d.weights.dot((d.p - d.q).cwiseAbs());
  return static_cast<Scalar>(std::clamp(tv, 0.0, 1.0));
}

/// E_p[log p - log q] by composite trapezoid; the log-loss objective of a
/// Gaussian fit up to the constant entropy of p.
template <typename Scalar>
Scalar kl_mixture_vs_gaussian(const GaussianMixture1DT<Scalar>& p, const Gaussian1DT<Scalar>& q,
                              const GridSpec& grid) {
  const GridDensities d = evaluate_on_grid(p, q, grid);
  return static_cast<Scalar>(kl_on_grid(d.weights, d.p, d.log_q));
}

}  // namespace losstrunc
