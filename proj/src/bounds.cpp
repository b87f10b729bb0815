#include "losstrunc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace losstrunc {

namespace {

constexpr double kSnapTolerance = 1e-13;

void require_fraction(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("truncation fraction c must lie in [0, 1]");
  if (c == 1.0) throw DegenerateTruncationError("c = 1 removes all probability mass");
}

// Indices ordered by descending loss, i.e. ascending log density; stable so
// that equal losses keep ascending index order.
template <typename Derived>
std::vector<Eigen::Index> loss_order(const Eigen::MatrixBase<Derived>& log_density) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(log_density.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return log_density(a) < log_density(b); });
  return order;
}

// Greedily removes `target` mass from `mass` following `order`. Returns the
// removed fractions per index and the mass actually removed.
double remove_mass(Eigen::VectorXd& mass, const std::vector<Eigen::Index>& order, double target,
                   std::vector<DroppedAtom>* ranking) {
  double remaining = target;
  for (Eigen::Index i : order) {
    if (remaining <= 0.0) break;
    const double m = mass(i);
    if (m <= 0.0) continue;
    double take = std::min(m, remaining);
    if (m - remaining <= kSnapTolerance * std::max(1.0, m)) take = m;
    mass(i) = (take == m) ? 0.0 : m - take;
    remaining -= take;
    if (ranking) ranking->push_back({i, take / m});
  }
  return target - remaining;
}

}  // namespace

TruncatedDistribution truncate_by_model_loss(const Categorical& p, const Categorical& model, double c) {
  detail::require_same_support(p, model);
  require_fraction(c);
  if (c == 0.0) return {p, 0.0, {}};

  const Eigen::VectorXd log_model = model.probs().array().log().matrix();
  Eigen::VectorXd mass = p.probs();
  std::vector<DroppedAtom> ranking;
  const double dropped = remove_mass(mass, loss_order(log_model), c, &ranking);
  return {Categorical::from_weights(std::move(mass)), dropped, std::move(ranking)};
}

Divergence pinsker_bound(const Divergence& kl) {
  if (kl.is_infinite()) return Divergence::infinite();
  if (kl.value() < 0.0) throw DomainError("KL divergence must be non-negative");
  return Divergence::finite(std::sqrt(0.5 * kl.value()));
}

namespace {
Divergence bound_from_truncated_kl(const Divergence& kl, double c) {
  if (kl.is_infinite()) return Divergence::infinite();
  return Divergence::finite(std::sqrt(0.5 * kl.value() + 2.0 * c + c * c));
}
}  // namespace

Divergence truncated_bound(const Categorical& p, const Categorical& model, double c) {
  const TruncatedDistribution trunc = truncate_by_model_loss(p, model, c);
  return bound_from_truncated_kl(kl_discrete(trunc.kept, model), c);
}

double check_lemma1(const Categorical& p, const TruncatedDistribution& trunc) {
  return tv_discrete(trunc.kept, p);
}

DivergenceReport bound_report(const Categorical& p, const Categorical& model, double c) {
  const Divergence kl = kl_discrete(p, model);
  return {tv_discrete(p, model), kl, pinsker_bound(kl), truncated_bound(p, model, c), c};
}

DivergenceReport bound_report(const GaussianMixture1D& p, const Gaussian1D& model, double c, const GridSpec& grid) {
  require_fraction(c);
  const GridDensities d = evaluate_on_grid(p, model, grid);

  const double tv = std::clamp(0.5 * d.weights.dot((d.p - d.q).cwiseAbs()), 0.0, 1.0);
  const Divergence kl = Divergence::finite(kl_on_grid(d.weights, d.p, d.log_q));

  Eigen::VectorXd kept_density = d.p;
  if (c > 0.0) {
    Eigen::VectorXd cell_mass = d.weights.cwiseProduct(d.p);
    const double total = cell_mass.sum();
    remove_mass(cell_mass, loss_order(d.log_q), c * total, nullptr);
    kept_density = cell_mass.cwiseQuotient(d.weights) / (1.0 - c);
  }
  const Divergence kl_kept = Divergence::finite(kl_on_grid(d.weights, kept_density, d.log_q));
  return {tv, kl, pinsker_bound(kl), bound_from_truncated_kl(kl_kept, c), c};
}

}  // namespace losstrunc
