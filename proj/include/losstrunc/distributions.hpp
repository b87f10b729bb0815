#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "losstrunc/errors.hpp"

namespace losstrunc {

/// Probability vector over outcomes {0, ..., size()-1}.
template <typename Scalar>
class CategoricalT {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr Scalar kSumTolerance = Scalar(1e-9);

  explicit CategoricalT(Vector probs) : probs_(std::move(probs)) { validate(); }
  CategoricalT(std::initializer_list<Scalar> probs)
      : probs_(Eigen::Map<const Vector>(probs.begin(), static_cast<Eigen::Index>(probs.size()))) {
    validate();
  }

  static CategoricalT uniform(Eigen::Index n) {
    if (n < 1) throw DomainError("categorical support must be non-empty");
    return CategoricalT(Vector::Constant(n, Scalar(1) / Scalar(n)));
  }

  static CategoricalT one_hot(Eigen::Index n, Eigen::Index at) {
    if (at < 0 || at >= n) throw DomainError("one-hot index outside support");
    Vector v = Vector::Zero(n);
    v(at) = Scalar(1);
    return CategoricalT(std::move(v));
  }

  /// Numerically stable softmax of a logit vector.
  template <typename Derived>
  static CategoricalT softmax(const Eigen::MatrixBase<Derived>& logits) {
    if (logits.size() < 1) throw DomainError("categorical support must be non-empty");
    const Scalar peak = logits.maxCoeff();
    Vector e = (logits.array() - peak).exp().matrix();
    e /= e.sum();
    return CategoricalT(std::move(e));
  }

  /// Normalizes a non-negative weight vector.
  static CategoricalT from_weights(Vector weights) {
    if ((weights.array() < Scalar(0)).any()) throw DomainError("negative categorical weight");
    const Scalar total = weights.sum();
    if (!(total > Scalar(0))) throw DomainError("categorical weights sum to zero");
    weights /= total;
    return CategoricalT(std::move(weights));
  }

  Eigen::Index size() const { return probs_.size(); }
  const Vector& probs() const { return probs_; }
  Scalar operator()(Eigen::Index i) const { return probs_(i); }
  Scalar operator[](Eigen::Index i) const { return probs_(i); }

 private:
  void validate() const {
    if (probs_.size() < 1) throw DomainError("categorical support must be non-empty");
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      if (!(probs_(i) >= Scalar(0)) || !std::isfinite(probs_(i))) {
        throw DomainError("categorical probability " + std::to_string(i) + " is negative or non-finite");
      }
    }
    if (std::abs(probs_.sum() - Scalar(1)) > kSumTolerance) {
      throw DomainError("categorical probabilities do not sum to 1");
    }
  }

  Vector probs_;
};

template <typename Scalar>
class Gaussian1DT {
 public:
  Gaussian1DT(Scalar mean, Scalar variance) : mean_(mean), variance_(variance) {
    if (!(variance > Scalar(0)) || !std::isfinite(variance)) throw DomainError("gaussian variance must be positive");
    if (!std::isfinite(mean)) throw DomainError("gaussian mean must be finite");
  }

  Scalar mean() const { return mean_; }
  Scalar variance() const { return variance_; }
  Scalar stddev() const { return std::sqrt(variance_); }

  Scalar log_pdf(Scalar x) const {
    const Scalar d = x - mean_;
    return Scalar(-0.5) * (std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance_) + d * d / variance_);
  }
  Scalar pdf(Scalar x) const { return std::exp(log_pdf(x)); }
  Scalar cdf(Scalar x) const {
    return Scalar(0.5) * std::erfc(-(x - mean_) / (stddev() * std::numbers::sqrt2_v<Scalar>));
  }

 private:
  Scalar mean_;
  Scalar variance_;
};

template <typename Scalar>
class GaussianMixture1DT {
 public:
  struct Component {
    Scalar weight;
    Gaussian1DT<Scalar> gaussian;
  };

  explicit GaussianMixture1DT(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw DomainError("mixture needs at least one component");
    Scalar total = 0;
    for (const auto& c : components_) {
      if (!(c.weight >= Scalar(0) && c.weight <= Scalar(1))) throw DomainError("mixture weight outside [0,1]");
      total += c.weight;
    }
    if (std::abs(total - Scalar(1)) > Scalar(1e-9)) throw DomainError("mixture weights do not sum to 1");
  }

  GaussianMixture1DT(const Gaussian1DT<Scalar>& single)  // NOLINT(google-explicit-constructor)
      : GaussianMixture1DT(std::vector<Component>{{Scalar(1), single}}) {}

  const std::vector<Component>& components() const { return components_; }

  Scalar pdf(Scalar x) const {
    Scalar s = 0;
    for (const auto& c : components_) s += c.weight * c.gaussian.pdf(x);
    return s;
  }

  /// log-sum-exp over components; finite far into the tails.
  Scalar log_pdf(Scalar x) const {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (const auto& c : components_) {
      if (c.weight > Scalar(0)) peak = std::max(peak, std::log(c.weight) + c.gaussian.log_pdf(x));
    }
    Scalar s = 0;
    for (const auto& c : components_) {
      if (c.weight > Scalar(0)) s += std::exp(std::log(c.weight) + c.gaussian.log_pdf(x) - peak);
    }
    return peak + std::log(s);
  }

  Scalar cdf(Scalar x) const {
    Scalar s = 0;
    for (const auto& c : components_) s += c.weight * c.gaussian.cdf(x);
    return s;
  }

  Scalar mean() const {
    Scalar m = 0;
    for (const auto& c : components_) m += c.weight * c.gaussian.mean();
    return m;
  }

 private:
  std::vector<Component> components_;
};

/// Uniform quadrature grid on [lo, hi].
struct GridSpec {
  double lo;
  double hi;
  int points;

  GridSpec(double lo_, double hi_, int points_) : lo(lo_), hi(hi_), points(points_) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("grid requires lo < hi");
    if (points < 2) throw DomainError("grid requires at least 2 points");
  }

  double step() const { return (hi - lo) / static_cast<double>(points - 1); }
  double at(int i) const { return i == points - 1 ? hi : lo + step() * static_cast<double>(i); }
};

using Categorical = CategoricalT<double>;
using Gaussian1D = Gaussian1DT<double>;
using GaussianMixture1D = GaussianMixture1DT<double>;

}  // namespace losstrunc
