#include "losstrunc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "losstrunc/divergence.hpp"
#include "losstrunc/errors.hpp"
#include "losstrunc/rng.hpp"

namespace losstrunc {

MixtureDraws gen_gaussian_mixture_draws(const GaussianMixture1D& mix, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample count must be positive");
  Rng rng = Rng::substream(seed, "mixture-data");
  const auto& comps = mix.components();
  MixtureDraws out;
  out.values.reserve(n);
  out.components.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cumulative = comps[0].weight;
    while (u >= cumulative && k + 1 < comps.size()) cumulative += comps[++k].weight;
    const auto& g = comps[k].gaussian;
    out.values.push_back(rng.normal(g.mean(), g.stddev()));
    out.components.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<double> gen_gaussian_mixture_data(const GaussianMixture1D& mix, std::size_t n, std::uint64_t seed) {
  return gen_gaussian_mixture_draws(mix, n, seed).values;
}

void NoisySeqSpec::validate() const {
  if (contexts < 1 || vocab < 1 || length < 1) throw DomainError("noisy task dimensions must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in [0, 1)");
  if (epsilon > 0.0 && fact_positions.empty()) throw DomainError("epsilon > 0 needs at least one fact position");
  if (epsilon > 0.0 && vocab < 2) throw DomainError("hallucinated tokens need a vocabulary of at least 2");
  for (int pos : fact_positions) {
    if (pos < 0 || pos >= length) throw DomainError("fact position outside the sequence");
  }
}

std::vector<TokenSequence> clean_map(const NoisySeqSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "clean-map");
  std::vector<TokenSequence> map(static_cast<std::size_t>(spec.contexts));
  for (auto& seq : map) {
    seq.resize(static_cast<std::size_t>(spec.length));
    for (int& tok : seq) tok = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.vocab)));
  }
  return map;
}

const char* label_name(Label label) { return label == Label::Clean ? "clean" : "hallucinated"; }

LabeledDataset gen_noisy_seq_data(const NoisySeqSpec& spec, std::size_t n, std::uint64_t seed) {
  const auto map = clean_map(spec);
  Rng rng = Rng::substream(seed, "noisy-seq-data");
  std::vector<LabeledRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int ctx = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.contexts)));
    TokenSequence ref = map[static_cast<std::size_t>(ctx)];
    Label label = Label::Clean;
    if (rng.uniform() < spec.epsilon) {
      label = Label::Hallucinated;
      for (int pos : spec.fact_positions) {
        const int clean = ref[static_cast<std::size_t>(pos)];
        int tok = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.vocab - 1)));
        if (tok >= clean) ++tok;
        ref[static_cast<std::size_t>(pos)] = tok;
      }
    }
    records.push_back({ctx, std::move(ref), label});
  }
  return LabeledDataset(std::move(records));
}

double LabeledDataset::hallucinated_fraction() const {
  if (records_.empty()) return 0.0;
  const auto n = std::count_if(records_.begin(), records_.end(),
                               [](const LabeledRecord& r) { return r.label == Label::Hallucinated; });
  return static_cast<double>(n) / static_cast<double>(records_.size());
}

std::vector<Example<TokenSequence>> LabeledDataset::unlabeled() const {
  std::vector<Example<TokenSequence>> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back({r.context, r.reference});
  return out;
}

namespace {
void write_tokens(std::ostream& out, const TokenSequence& seq) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out << ' ';
    out << seq[i];
  }
}
}  // namespace

void LabeledDataset::write(std::ostream& out) const {
  for (const auto& r : records_) {
    out << r.context << '\t';
    write_tokens(out, r.reference);
    out << '\t' << label_name(r.label) << '\n';
  }
}

void LabeledDataset::write_unlabeled(std::ostream& out) const {
  for (const auto& r : records_) {
    out << r.context << '\t';
    write_tokens(out, r.reference);
    out << '\n';
  }
}

LabeledDataset LabeledDataset::read(std::istream& in) {
  std::vector<LabeledRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw DataError("dataset line " + std::to_string(line_no) + ": expected 3 fields");
    LabeledRecord rec{};
    try {
      rec.context = std::stoi(line.substr(0, tab1));
    } catch (const std::exception&) {
      throw DataError("dataset line " + std::to_string(line_no) + ": bad context id");
    }
    std::istringstream toks(line.substr(tab1 + 1, tab2 - tab1 - 1));
    int tok;
    while (toks >> tok) rec.reference.push_back(tok);
    if (!toks.eof()) throw DataError("dataset line " + std::to_string(line_no) + ": bad token");
    const std::string label = line.substr(tab2 + 1);
    if (label == "clean") {
      rec.label = Label::Clean;
    } else if (label == "hallucinated") {
      rec.label = Label::Hallucinated;
    } else {
      throw DataError("dataset line " + std::to_string(line_no) + ": unknown label '" + label + "'");
    }
    records.push_back(std::move(rec));
  }
  return LabeledDataset(std::move(records));
}

LossSplitReport loss_split_report(const TabularSeqModel& model, const LabeledDataset& data,
                                  const std::vector<double>& thresholds, std::size_t bins) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  LossSplitReport report;
  std::vector<double> losses;
  losses.reserve(data.size());
  double sum_clean = 0.0, sum_noisy = 0.0;
  std::size_t n_clean = 0, n_noisy = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : data.records()) {
    const double loss = model.example_loss(r.context, r.reference);
    losses.push_back(loss);
    lo = std::min(lo, loss);
    hi = std::max(hi, loss);
    if (r.label == Label::Clean) {
      sum_clean += loss;
      ++n_clean;
    } else {
      sum_noisy += loss;
      ++n_noisy;
    }
  }
  if (n_clean) report.mean_loss_clean = sum_clean / static_cast<double>(n_clean);
  if (n_noisy) report.mean_loss_noisy = sum_noisy / static_cast<double>(n_noisy);
  if (report.mean_loss_clean && report.mean_loss_noisy && *report.mean_loss_clean > 0.0) {
    report.loss_ratio = *report.mean_loss_noisy / *report.mean_loss_clean;
  }

  if (losses.empty()) {
    lo = 0.0;
    hi = 1.0;
  } else if (!(hi > lo)) {
    hi = lo + 1.0;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) report.bin_edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
  report.histogram_clean.assign(bins, 0.0);
  report.histogram_noisy.assign(bins, 0.0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor((losses[i] - lo) / width));
    b = std::min(b, bins - 1);
    auto& hist = data.records()[i].label == Label::Clean ? report.histogram_clean : report.histogram_noisy;
    hist[b] += 1.0;
  }
  if (n_clean) {
    for (double& h : report.histogram_clean) h /= static_cast<double>(n_clean);
  }
  if (n_noisy) {
    for (double& h : report.histogram_noisy) h /= static_cast<double>(n_noisy);
  }

  for (double t : thresholds) {
    std::size_t above = 0, noisy_above = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (losses[i] > t) {
        ++above;
        if (data.records()[i].label == Label::Hallucinated) ++noisy_above;
      }
    }
    report.thresholds.push_back(t);
    report.count_above.push_back(above);
    report.noisy_fraction_above.push_back(
        above ? std::optional<double>(static_cast<double>(noisy_above) / static_cast<double>(above)) : std::nullopt);
  }
  return report;
}

namespace {
void require_matching(const TabularSeqModel& model, const NoisySeqSpec& spec) {
  if (model.contexts() != spec.contexts || model.vocab() != spec.vocab || model.length() != spec.length) {
    throw DimensionError("model shape does not match the task");
  }
}
}  // namespace

double exact_tv_to_clean(const TabularSeqModel& model, const NoisySeqSpec& spec) {
  require_matching(model, spec);
  double outcomes = static_cast<double>(spec.contexts);
  for (int i = 0; i < spec.length; ++i) outcomes *= spec.vocab;
  if (outcomes > 1e6) throw CapacityError("C * V^L exceeds 10^6 outcomes");
  const auto map = clean_map(spec);
  double total = 0.0;
  for (int ctx = 0; ctx < spec.contexts; ++ctx) {
    const Categorical model_dist = model.sequence_distribution(ctx);
    const Categorical clean =
        Categorical::one_hot(model_dist.size(), model.sequence_index(map[static_cast<std::size_t>(ctx)]));
    total += tv_discrete(clean, model_dist);
  }
  return total / static_cast<double>(spec.contexts);
}

double hallucinated_mass(const TabularSeqModel& model, const NoisySeqSpec& spec) {
  require_matching(model, spec);
  if (spec.fact_positions.empty()) return 0.0;
  const auto map = clean_map(spec);
  double total = 0.0;
  for (int ctx = 0; ctx < spec.contexts; ++ctx) {
    for (int pos : spec.fact_positions) {
      total += 1.0 - model.position_conditional(ctx, pos)(map[static_cast<std::size_t>(ctx)][static_cast<std::size_t>(pos)]);
    }
  }
  return total / static_cast<double>(spec.contexts * static_cast<int>(spec.fact_positions.size()));
}

}  // namespace losstrunc
