#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "losstrunc/distributions.hpp"
#include "losstrunc/models.hpp"
#include "losstrunc/rng.hpp"

namespace losstrunc {

struct RejectionConfig {
  std::size_t candidates = 100;
  double alpha = 0.1;

  /// ceil(alpha * N), at least one.
  std::size_t kept() const;
  void validate() const;
};

/// Sequence-level rejection sampling: N candidates from the model, ranked by
/// log loss (ties by draw order), one drawn uniformly from the ceil(alpha*N)
/// best. The pick index is drawn after all candidates. When every candidate
/// is kept the pick is distributed as a single direct sample, so only the
/// first candidate is drawn and returned; with alpha = 1 the output stream is
/// the direct-sampling stream.
template <TrainableModel M>
typename M::Reference rejection_sample(const M& model, int context, const RejectionConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t keep = cfg.kept();
  if (keep >= cfg.candidates) return model.sample(context, rng);

  std::vector<typename M::Reference> candidates;
  std::vector<double> losses;
  candidates.reserve(cfg.candidates);
  losses.reserve(cfg.candidates);
  for (std::size_t i = 0; i < cfg.candidates; ++i) {
    candidates.push_back(model.sample(context, rng));
    losses.push_back(model.example_loss(context, candidates.back()));
  }
  std::vector<std::size_t> order(cfg.candidates);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  const auto pick = static_cast<std::size_t>(rng.uniform_index(keep));
  return std::move(candidates[order[pick]]);
}

/// Keeps the k most probable outcomes (ties by lowest index), renormalized.
Categorical top_k(const Categorical& dist, std::size_t k);

/// Keeps the shortest probability-sorted prefix whose mass reaches p,
/// including the atom that crosses p, renormalized.
Categorical top_p(const Categorical& dist, double p);

/// Per-token decoding rule for sample-time truncation.
struct DecoderSpec {
  enum class Kind { Direct, Rejection, TopK, TopP };

  Kind kind = Kind::Direct;
  std::size_t k = 0;
  double p = 1.0;
  RejectionConfig rejection{};

  static DecoderSpec direct() { return {}; }
  static DecoderSpec top_k(std::size_t k) { return {Kind::TopK, k, 1.0, {}}; }
  static DecoderSpec top_p(double p) { return {Kind::TopP, 0, p, {}}; }
  static DecoderSpec rejection_sampling(RejectionConfig cfg) { return {Kind::Rejection, 0, 1.0, cfg}; }

  std::string name() const;
  /// The distribution sampled at one position; rejection returns dist as is.
  Categorical apply(const Categorical& dist) const;
};

/// One decoded sequence from the tabular model under `spec`.
TokenSequence decode_sequence(const TabularSeqModel& model, int context, const DecoderSpec& spec, Rng& rng);

/// Mean over contexts of the sequence entropy of the per-token decoded
/// distribution (a sum of per-position entropies under the factorized model).
/// Rejection sampling has no closed-form decoded distribution here and is
/// rejected with DomainError.
double decode_entropy(const TabularSeqModel& model, std::span<const int> contexts, const DecoderSpec& spec);

struct EntropyMatch {
  DecoderSpec decoder;
  double entropy;
  double target;
  double relative_gap() const { return target == 0.0 ? std::abs(entropy) : std::abs(entropy - target) / target; }
};

/// k in [1, V] whose decode_entropy is closest to target (smallest k on ties).
EntropyMatch match_top_k(const TabularSeqModel& model, std::span<const int> contexts, double target);
/// p in (0, 1] found by bisection on the monotone entropy curve.
EntropyMatch match_top_p(const TabularSeqModel& model, std::span<const int> contexts, double target);

}  // namespace losstrunc
