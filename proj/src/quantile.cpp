#include "losstrunc/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "losstrunc/errors.hpp"

namespace losstrunc {

QuantileTracker::QuantileTracker(double range_lo, double range_hi, std::size_t window, std::size_t bins,
                                 std::size_t refresh_period)
    : lo_(range_lo), hi_(range_hi), window_(window), refresh_period_(refresh_period == 0 ? window : refresh_period) {
  if (!(range_lo < range_hi) || !std::isfinite(range_lo) || !std::isfinite(range_hi)) {
    throw DomainError("quantile tracker needs a finite range with lo < hi");
  }
  if (window == 0 || bins == 0) throw DomainError("quantile tracker needs positive window and bin count");
  width_ = (hi_ - lo_) / static_cast<double>(bins);
  ring_.assign(window_, 0);
  counts_.assign(bins, 0);
  snapshot_.assign(bins, 0);
}

std::pair<double, double> QuantileTracker::padded_range(double min_loss, double max_loss) {
  if (!std::isfinite(min_loss) || !std::isfinite(max_loss) || min_loss > max_loss) {
    throw DataError("invalid observed loss range");
  }
  double pad = 0.2 * (max_loss - min_loss);
  if (!(pad > 0.0)) pad = std::max(0.2 * std::abs(max_loss), 1.0);
  return {min_loss - pad, max_loss + pad};
}

std::size_t QuantileTracker::bin_of(double loss) const {
  const double pos = std::floor((loss - lo_) / width_);
  if (!(pos > 0.0)) return 0;
  const auto last = static_cast<double>(counts_.size() - 1);
  return pos >= last ? counts_.size() - 1 : static_cast<std::size_t>(pos);
}

double QuantileTracker::upper_edge(std::size_t bin) const {
  if (bin + 1 >= counts_.size()) return hi_;
  return lo_ + width_ * static_cast<double>(bin + 1);
}

double QuantileTracker::clamp(double loss) const { return std::clamp(loss, lo_, hi_); }

void QuantileTracker::push(double loss) {
  if (!std::isfinite(loss)) throw DataError("non-finite loss pushed to quantile tracker");
  const auto bin = static_cast<std::uint32_t>(bin_of(loss));
  if (fill_ == window_) {
    --counts_[ring_[head_]];
  } else {
    ++fill_;
  }
  ring_[head_] = bin;
  ++counts_[bin];
  head_ = (head_ + 1) % window_;
  if (++pushes_since_refresh_ >= refresh_period_) refresh();
}

void QuantileTracker::refresh() {
  snapshot_ = counts_;
  snapshot_fill_ = fill_;
  has_snapshot_ = fill_ > 0;
  pushes_since_refresh_ = 0;
  ++refresh_count_;
}

std::optional<double> QuantileTracker::estimate(double level) const {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("quantile level must lie in (0, 1), got " + std::to_string(level));
  }
  if (!has_snapshot_) return std::nullopt;
  const double target = level * static_cast<double>(snapshot_fill_);
  std::uint64_t cumulative = 0;
  for (std::size_t b = 0; b < snapshot_.size(); ++b) {
    cumulative += snapshot_[b];
    if (static_cast<double>(cumulative) >= target) return upper_edge(b);
  }
  return hi_;
}

}  // namespace losstrunc
