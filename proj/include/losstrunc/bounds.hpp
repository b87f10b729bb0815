#pragma once

#include <Eigen/Core>

#include <vector>

#include "losstrunc/distributions.hpp"
#include "losstrunc/divergence.hpp"

namespace losstrunc {

struct DroppedAtom {
  Eigen::Index outcome;
  double fraction;  // share of the atom's mass removed, in (0, 1]
};

/// p = (1 - c) kept + c dropped, with the dropped part taken from the
/// outcomes the model finds least likely.
struct TruncatedDistribution {
  Categorical kept;
  double dropped_mass;
  std::vector<DroppedAtom> drop_ranking;  // in removal order
};

/// Removes exactly c of p's mass, highest model log loss first (lowest
/// outcome index first among equal losses), splitting the boundary atom.
TruncatedDistribution truncate_by_model_loss(const Categorical& p, const Categorical& model, double c);

/// sqrt(kl / 2): an upper bound on total variation.
Divergence pinsker_bound(const Divergence& kl);

/// sqrt(KL(p_c || model) / 2 + 2c + c^2) with p_c the loss-truncated p.
/// Infinite when the kept mass still meets a model zero.
Divergence truncated_bound(const Categorical& p, const Categorical& model, double c);

/// TV(trunc.kept, p); never exceeds trunc.dropped_mass.
double check_lemma1(const Categorical& p, const TruncatedDistribution& trunc);

struct DivergenceReport {
  double tv;
  Divergence kl;
  Divergence pinsker_bound;
  Divergence truncated_bound;
  double c;
};

DivergenceReport bound_report(const Categorical& p, const Categorical& model, double c);

/// Continuous analog: grid cells are ranked by model log density at the
/// node and the c share of p's quadrature mass is removed from the lowest.
DivergenceReport bound_report(const GaussianMixture1D& p, const Gaussian1D& model, double c, const GridSpec& grid);

}  // namespace losstrunc
