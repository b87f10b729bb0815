#pragma once

#include <Eigen/Core>

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "losstrunc/distributions.hpp"
#include "losstrunc/rng.hpp"

namespace losstrunc {

using TokenSequence = std::vector<int>;

/// One training pair. Deliberately carries no clean/noisy label.
template <typename Reference>
struct Example {
  int context;
  Reference reference;
};

/// The contract the trainer and decoders rely on.
///
/// example_loss is -log p(reference | context). Gradients are accumulated
/// with a per-example weight and applied in one step, so a minibatch update
/// is accumulate over the batch followed by apply_gradient(lr).
template <typename M>
concept TrainableModel = requires(M m, const M cm, int context, const typename M::Reference& ref, double x,
                                  Rng& rng) {
  typename M::Reference;
  { cm.example_loss(context, ref) } -> std::convertible_to<double>;
  m.accumulate_gradient(context, ref, x);
  m.apply_gradient(x);
  m.sgd_step(context, ref, x);
  { cm.sample(context, rng) } -> std::same_as<typename M::Reference>;
  { cm.parameters() } -> std::convertible_to<Eigen::VectorXd>;
};

/// N(theta, sigma^2) with learnable location and fixed scale; the context is
/// ignored.
class GaussianLocationModel {
 public:
  using Reference = double;

  explicit GaussianLocationModel(double theta = 0.0, double sigma = 1.0);

  double theta() const { return theta_; }
  double sigma() const { return sigma_; }
  void set_theta(double theta) { theta_ = theta; }

  double example_loss(int context, double y) const;
  double gradient(double y) const { return (theta_ - y) / (sigma_ * sigma_); }
  void accumulate_gradient(int context, double y, double weight);
  void apply_gradient(double lr);
  void sgd_step(int context, double y, double lr);
  double sample(int context, Rng& rng) const;
  Eigen::VectorXd parameters() const { return Eigen::VectorXd::Constant(1, theta_); }

 private:
  double theta_;
  double sigma_;
  double pending_gradient_ = 0.0;
};

/// Fixed-length sequence model with one softmax table per (context,
/// position); positions are independent given the context.
class TabularSeqModel {
 public:
  using Reference = TokenSequence;
  using LogitTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  static constexpr std::int64_t kMaxEnumeration = 1'000'000;

  /// Uniform initialization (all logits zero).
  TabularSeqModel(int contexts, int length, int vocab);

  int contexts() const { return contexts_; }
  int length() const { return length_; }
  int vocab() const { return vocab_; }

  const LogitTable& logits() const { return logits_; }
  LogitTable& logits() { return logits_; }
  auto logit_row(int context, int position) const { return logits_.row(row_index(context, position)); }
  auto logit_row(int context, int position) { return logits_.row(row_index(context, position)); }

  Categorical position_conditional(int context, int position) const;

  /// Full distribution over the vocab^length sequences, indexed by
  /// sequence_index. Throws CapacityError past kMaxEnumeration outcomes.
  Categorical sequence_distribution(int context) const;
  std::int64_t sequence_count() const;
  std::int64_t sequence_index(const TokenSequence& seq) const;
  TokenSequence sequence_at(std::int64_t index) const;

  double example_loss(int context, const TokenSequence& reference) const;
  void accumulate_gradient(int context, const TokenSequence& reference, double weight);
  void apply_gradient(double lr);
  void sgd_step(int context, const TokenSequence& reference, double lr);
  TokenSequence sample(int context, Rng& rng) const;
  Eigen::VectorXd parameters() const;

  void validate(int context, const TokenSequence& reference) const;

 private:
  Eigen::Index row_index(int context, int position) const {
    return static_cast<Eigen::Index>(context) * length_ + position;
  }

  int contexts_;
  int length_;
  int vocab_;
  LogitTable logits_;
  LogitTable pending_;
  std::vector<char> touched_;
  std::vector<Eigen::Index> touched_rows_;
};

static_assert(TrainableModel<GaussianLocationModel>);
static_assert(TrainableModel<TabularSeqModel>);

/// Draws one index from a categorical by inverse CDF using a single uniform.
Eigen::Index sample_categorical(const Categorical& dist, Rng& rng);

// Checkpoints are text: a versioned header, the shape, every parameter as a
// hexadecimal float (bit-exact round trip) and an FNV-1a checksum line.
using AnyModel = std::variant<GaussianLocationModel, TabularSeqModel>;

void save_checkpoint(std::ostream& out, const GaussianLocationModel& model);
void save_checkpoint(std::ostream& out, const TabularSeqModel& model);
void save_checkpoint(const std::filesystem::path& path, const AnyModel& model);
/// Throws DataError on any format or integrity failure.
AnyModel load_checkpoint(std::istream& in);
AnyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace losstrunc
