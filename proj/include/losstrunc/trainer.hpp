#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "losstrunc/errors.hpp"
#include "losstrunc/models.hpp"
#include "losstrunc/quantile.hpp"
#include "losstrunc/rng.hpp"

namespace losstrunc {

struct TrainConfig {
  double c = 0.0;
  std::size_t hotstart_steps = 0;
  std::size_t total_steps = 1;
  std::size_t batch_size = 1;
  double hotstart_lr = 1.0;
  double truncated_lr = 0.1;
  std::size_t window = QuantileTracker::kDefaultWindow;
  std::size_t bins = QuantileTracker::kDefaultBins;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Phase { Hotstart, Truncated };
const char* phase_name(Phase phase);

/// Full trace of a run: one record per step, with per-example losses and
/// drop flags stored flat in example order.
struct TrainLog {
  struct Step {
    std::size_t step;
    Phase phase;
    std::optional<double> threshold;
    std::size_t first_example;
    std::size_t batch_size;
  };

  std::vector<Step> steps;
  std::vector<double> losses;
  std::vector<char> dropped;

  std::size_t example_count() const { return losses.size(); }

  /// Fraction of dropped examples over [begin, end) in example order.
  double dropped_fraction(std::size_t begin, std::size_t end) const;
  /// Dropped fraction of each consecutive `span`-sized block of truncated
  /// phase examples (trailing partial block omitted).
  std::vector<double> drop_rate_trace(std::size_t span) const;
  std::size_t first_truncated_example() const;

  /// CSV with header step,phase,loss,threshold,dropped; one row per example.
  void write_csv(std::ostream& out) const;
};

/// The minibatch index stream shared by every training loop: a substream of
/// the run seed tagged "minibatch", drawing uniform indices with replacement.
inline Rng minibatch_stream(std::uint64_t seed) { return Rng::substream(seed, "minibatch"); }

/// One truncated minibatch update from precomputed losses. Examples whose
/// loss is strictly above the threshold contribute no gradient; the rest are
/// averaged over the full batch size. Returns the drop flags.
template <TrainableModel M>
std::vector<char> truncated_update(M& model, std::span<const Example<typename M::Reference>> batch,
                                   std::span<const double> losses, std::optional<double> threshold, double lr) {
  std::vector<char> dropped(batch.size(), 0);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (threshold && losses[i] > *threshold) {
      dropped[i] = 1;
      continue;
    }
    model.accumulate_gradient(batch[i].context, batch[i].reference, weight);
  }
  model.apply_gradient(lr);
  return dropped;
}

template <TrainableModel M>
std::vector<char> truncated_update(M& model, std::span<const Example<typename M::Reference>> batch,
                                   std::optional<double> threshold, double lr) {
  std::vector<double> losses(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) losses[i] = model.example_loss(batch[i].context, batch[i].reference);
  return truncated_update(model, batch, std::span<const double>(losses), threshold, lr);
}

/// Hotstart followed by truncated training.
///
/// During hotstart every loss is buffered and the observed min/max fixes the
/// histogram range (padded by 20%) when hotstart ends; the last `window`
/// buffered losses are then replayed into the tracker. Without a hotstart
/// the first window of truncated-phase losses plays that role. The window is
/// capped at the dataset size.
template <TrainableModel M>
class LossTruncationTrainer {
 public:
  using Reference = typename M::Reference;

  LossTruncationTrainer(M& model, std::span<const Example<Reference>> data, TrainConfig config)
      : model_(model), data_(data), config_(config), batches_(minibatch_stream(config.seed)) {
    config_.validate();
    if (data_.empty()) throw DataError("training data is empty");
    window_ = std::min<std::size_t>(config_.window, data_.size());
  }

  void run_hotstart() {
    while (step_ < config_.hotstart_steps) run_step(Phase::Hotstart);
    if (!pending_.empty()) build_tracker();
  }

  void run_truncated() {
    while (step_ < config_.total_steps) run_step(Phase::Truncated);
  }

  void run() {
    run_hotstart();
    run_truncated();
  }

  /// Called after every step with the step index and the updated model.
  void set_observer(std::function<void(std::size_t, const M&)> observer) { observer_ = std::move(observer); }

  const TrainLog& log() const { return log_; }
  TrainLog take_log() { return std::move(log_); }
  const std::optional<QuantileTracker>& tracker() const { return tracker_; }
  std::size_t effective_window() const { return window_; }

 private:
  void run_step(Phase phase) {
    batch_.clear();
    for (std::size_t i = 0; i < config_.batch_size; ++i) {
      batch_.push_back(data_[static_cast<std::size_t>(batches_.uniform_index(data_.size()))]);
    }
    batch_losses_.resize(batch_.size());
    for (std::size_t i = 0; i < batch_.size(); ++i) {
      batch_losses_[i] = model_.example_loss(batch_[i].context, batch_[i].reference);
      push_loss(batch_losses_[i], phase);
    }

    std::optional<double> threshold;
    double lr = config_.hotstart_lr;
    if (phase == Phase::Truncated) {
      lr = config_.truncated_lr;
      if (config_.c > 0.0 && tracker_) threshold = tracker_->estimate(1.0 - config_.c);
    }

    const std::span<const Example<Reference>> batch_view(batch_);
    const std::span<const double> loss_view(batch_losses_);
    const std::vector<char> flags = truncated_update(model_, batch_view, loss_view, threshold, lr);

    log_.steps.push_back({step_, phase, threshold, log_.losses.size(), batch_.size()});
    log_.losses.insert(log_.losses.end(), batch_losses_.begin(), batch_losses_.end());
    log_.dropped.insert(log_.dropped.end(), flags.begin(), flags.end());
    if (observer_) observer_(step_, model_);
    ++step_;
  }

  void push_loss(double loss, Phase phase) {
    if (tracker_) {
      tracker_->push(loss);
      return;
    }
    pending_.push_back(loss);
    min_loss_ = std::min(min_loss_, loss);
    max_loss_ = std::max(max_loss_, loss);
    if (phase == Phase::Truncated && pending_.size() >= window_) build_tracker();
  }

  void build_tracker() {
    const auto [lo, hi] = QuantileTracker::padded_range(min_loss_, max_loss_);
    tracker_.emplace(lo, hi, window_, config_.bins);
    const std::size_t start = pending_.size() > window_ ? pending_.size() - window_ : 0;
    for (std::size_t i = start; i < pending_.size(); ++i) tracker_->push(pending_[i]);
    pending_.clear();
    pending_.shrink_to_fit();
  }

  M& model_;
  std::span<const Example<Reference>> data_;
  TrainConfig config_;
  Rng batches_;
  std::size_t window_;
  std::size_t step_ = 0;

  std::optional<QuantileTracker> tracker_;
  std::vector<double> pending_;
  double min_loss_ = std::numeric_limits<double>::infinity();
  double max_loss_ = -std::numeric_limits<double>::infinity();

  std::function<void(std::size_t, const M&)> observer_;
  std::vector<Example<Reference>> batch_;
  std::vector<double> batch_losses_;
  TrainLog log_;
};

/// Plain log-loss training for config.hotstart_steps steps at hotstart_lr.
template <TrainableModel M>
TrainLog hotstart(M& model, std::span<const Example<typename M::Reference>> data, const TrainConfig& config) {
  LossTruncationTrainer<M> trainer(model, data, config);
  trainer.run_hotstart();
  return trainer.take_log();
}

template <TrainableModel M>
TrainLog train_truncated(M& model, std::span<const Example<typename M::Reference>> data, const TrainConfig& config) {
  LossTruncationTrainer<M> trainer(model, data, config);
  trainer.run();
  return trainer.take_log();
}

template <TrainableModel M>
TrainLog train_truncated(M& model, const std::vector<Example<typename M::Reference>>& data, const TrainConfig& config) {
  return train_truncated(model, std::span<const Example<typename M::Reference>>(data), config);
}

}  // namespace losstrunc
