#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace losstrunc {

/// Windowed histogram over the most recent losses.
///
/// Bin counts are maintained incrementally on every push (O(1)). Every
/// `refresh_period` pushes the counts are snapshotted; estimate() reads
/// the snapshot, so thresholds are piecewise constant between refreshes.
/// Losses outside [range_lo, range_hi] land in the first or last bin.
///
/// Single writer: pushes and estimates must be serialized by the caller.
class QuantileTracker {
 public:
  static constexpr std::size_t kDefaultWindow = 10000;
  static constexpr std::size_t kDefaultBins = 1000;

  /// refresh_period = 0 selects refresh_period = window.
  QuantileTracker(double range_lo, double range_hi, std::size_t window = kDefaultWindow,
                  std::size_t bins = kDefaultBins, std::size_t refresh_period = 0);

  /// Histogram range from observed losses, padded by 20% of their spread on
  /// each side (or by max(20% of |value|, 1) when they are all equal).
  static std::pair<double, double> padded_range(double min_loss, double max_loss);

  void push(double loss);
  void refresh();

  /// Upper edge of the smallest bin whose cumulative snapshot count reaches
  /// level * fill; nullopt before the first refresh.
  std::optional<double> estimate(double level) const;

  std::size_t window() const { return window_; }
  std::size_t bins() const { return counts_.size(); }
  std::size_t refresh_period() const { return refresh_period_; }
  std::size_t size() const { return fill_; }
  std::size_t pushes_since_refresh() const { return pushes_since_refresh_; }
  std::uint64_t refresh_count() const { return refresh_count_; }
  double range_lo() const { return lo_; }
  double range_hi() const { return hi_; }
  double bin_width() const { return width_; }

  std::size_t bin_of(double loss) const;
  double upper_edge(std::size_t bin) const;
  double clamp(double loss) const;

 private:
  double lo_;
  double hi_;
  double width_;
  std::size_t window_;
  std::size_t refresh_period_;

  std::vector<std::uint32_t> ring_;  // bin index of each windowed loss
  std::size_t head_ = 0;
  std::size_t fill_ = 0;
  std::vector<std::uint32_t> counts_;

  std::vector<std::uint32_t> snapshot_;
  std::size_t snapshot_fill_ = 0;
  bool has_snapshot_ = false;
  std::size_t pushes_since_refresh_ = 0;
  std::uint64_t refresh_count_ = 0;
};

}  // namespace losstrunc
