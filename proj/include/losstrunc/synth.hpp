#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "losstrunc/distributions.hpp"
#include "losstrunc/models.hpp"

namespace losstrunc {

std::vector<double> gen_gaussian_mixture_data(const GaussianMixture1D& mix, std::size_t n, std::uint64_t seed);

/// Same draws as gen_gaussian_mixture_data plus the component of each draw.
struct MixtureDraws {
  std::vector<double> values;
  std::vector<int> components;
};
MixtureDraws gen_gaussian_mixture_draws(const GaussianMixture1D& mix, std::size_t n, std::uint64_t seed);

/// Noisy fixed-length sequence task. The clean reference of a context is a
/// frozen map f(context) drawn from `seed`; an epsilon share of records has
/// the tokens at `fact_positions` replaced by a uniform non-clean token.
struct NoisySeqSpec {
  int contexts = 50;
  int vocab = 20;
  int length = 3;
  double epsilon = 0.2;
  std::vector<int> fact_positions{2};
  std::uint64_t seed = 0;

  void validate() const;
};

/// contexts x length table of clean tokens.
std::vector<TokenSequence> clean_map(const NoisySeqSpec& spec);

enum class Label { Clean, Hallucinated };
const char* label_name(Label label);

struct LabeledRecord {
  int context;
  TokenSequence reference;
  Label label;
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(std::vector<LabeledRecord> records) : records_(std::move(records)) {}

  const std::vector<LabeledRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  double hallucinated_fraction() const;

  /// The training view: context and reference only.
  std::vector<Example<TokenSequence>> unlabeled() const;

  /// One record per line: context id, tab, space-separated tokens, tab, label.
  void write(std::ostream& out) const;
  /// Same layout with the label column omitted.
  void write_unlabeled(std::ostream& out) const;
  static LabeledDataset read(std::istream& in);

 private:
  std::vector<LabeledRecord> records_;
};

/// Records draw uniform contexts from `seed`; the clean map comes from spec.seed.
LabeledDataset gen_noisy_seq_data(const NoisySeqSpec& spec, std::size_t n, std::uint64_t seed);

struct LossSplitReport {
  std::optional<double> mean_loss_clean;
  std::optional<double> mean_loss_noisy;
  std::optional<double> loss_ratio;
  std::vector<double> bin_edges;  // shared, bins + 1 entries
  std::vector<double> histogram_clean;
  std::vector<double> histogram_noisy;
  std::vector<double> thresholds;
  /// Share of above-threshold examples that are hallucinated; absent when no
  /// example exceeds the threshold.
  std::vector<std::optional<double>> noisy_fraction_above;
  std::vector<std::size_t> count_above;
};

LossSplitReport loss_split_report(const TabularSeqModel& model, const LabeledDataset& data,
                                  const std::vector<double>& thresholds, std::size_t bins = 20);

/// Mean over contexts (uniform) of TV between the clean one-hot sequence
/// distribution and the model's sequence distribution, by full enumeration.
double exact_tv_to_clean(const TabularSeqModel& model, const NoisySeqSpec& spec);

/// Mean over contexts and fact positions of the model probability on
/// non-clean tokens at the fact positions.
double hallucinated_mass(const TabularSeqModel& model, const NoisySeqSpec& spec);

}  // namespace losstrunc
