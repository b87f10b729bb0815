#include <filesystem>
#include <sstream>

#include "common.hpp"
#include "losstrunc/cli/commands.hpp"
#include "losstrunc/csv.hpp"
#include "losstrunc/decode.hpp"
#include "losstrunc/errors.hpp"

namespace losstrunc::cli {

namespace {

DecoderSpec decoder_from(const ExperimentConfig& cfg) {
  if (cfg.decoder == "direct") return DecoderSpec::direct();
  if (cfg.decoder == "rejection") {
    RejectionConfig rc{cfg.n_candidates, cfg.alpha};
    try {
      rc.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("invalid rejection decoder: ") + e.what());
    }
    return DecoderSpec::rejection_sampling(rc);
  }
  if (cfg.decoder == "top_k") return DecoderSpec::top_k(cfg.top_k);
  if (cfg.decoder == "top_p") {
    if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) throw ConfigError("top-p must lie in (0, 1]");
    return DecoderSpec::top_p(cfg.top_p);
  }
  throw ConfigError("unknown decoder '" + cfg.decoder + "'");
}

std::string parameter_of(const DecoderSpec& spec) {
  switch (spec.kind) {
    case DecoderSpec::Kind::Rejection:
      return "N=" + std::to_string(spec.rejection.candidates) + ";alpha=" + format_double(spec.rejection.alpha);
    case DecoderSpec::Kind::TopK:
      return std::to_string(spec.k);
    case DecoderSpec::Kind::TopP:
      return format_double(spec.p);
    default:
      return "";
  }
}

std::string join_tokens(const TokenSequence& seq) {
  std::ostringstream s;
  for (std::size_t i = 0; i < seq.size(); ++i) s << (i ? " " : "") << seq[i];
  return s.str();
}

struct SampleRow {
  int context;
  std::string value;
  double loss;
};

/// One private stream per (context, draw), so any decoder sees the same
/// randomness for the same output slot.
Rng slot_stream(const ExperimentConfig& cfg, int context, std::size_t j) {
  return Rng::substream(cfg.seed, "sample", static_cast<std::uint64_t>(context) * cfg.samples_per_context + j);
}

std::vector<SampleRow> sample_tabular(const ExperimentConfig& cfg, const TabularSeqModel& model,
                                      const DecoderSpec& spec) {
  if (spec.kind == DecoderSpec::Kind::TopK && (spec.k == 0 || spec.k > static_cast<std::size_t>(model.vocab()))) {
    throw ConfigError("top-k must lie in [1, vocab]");
  }
  std::vector<SampleRow> rows;
  for (int ctx = 0; ctx < model.contexts(); ++ctx) {
    for (std::size_t j = 0; j < cfg.samples_per_context; ++j) {
      Rng rng = slot_stream(cfg, ctx, j);
      const TokenSequence seq = decode_sequence(model, ctx, spec, rng);
      rows.push_back({ctx, join_tokens(seq), model.example_loss(ctx, seq)});
    }
  }
  return rows;
}

std::vector<SampleRow> sample_gaussian(const ExperimentConfig& cfg, const GaussianLocationModel& model,
                                       const DecoderSpec& spec) {
  if (spec.kind == DecoderSpec::Kind::TopK || spec.kind == DecoderSpec::Kind::TopP) {
    throw ConfigError("top-k / top-p decoding needs a discrete (tabular) checkpoint");
  }
  std::vector<SampleRow> rows;
  for (std::size_t j = 0; j < cfg.samples_per_context; ++j) {
    Rng rng = slot_stream(cfg, 0, j);
    const double y = spec.kind == DecoderSpec::Kind::Rejection ? rejection_sample(model, 0, spec.rejection, rng)
                                                               : model.sample(0, rng);
    rows.push_back({0, format_double(y), model.example_loss(0, y)});
  }
  return rows;
}

double mean_loss(const std::vector<SampleRow>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.loss;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::vector<int> all_contexts(const TabularSeqModel& model) {
  std::vector<int> ctx(static_cast<std::size_t>(model.contexts()));
  for (int i = 0; i < model.contexts(); ++i) ctx[static_cast<std::size_t>(i)] = i;
  return ctx;
}

}  // namespace

void cmd_sample(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("sample needs --checkpoint");
  if (cfg.samples_per_context == 0) throw ConfigError("samples-per-context must be positive");
  const DecoderSpec spec = decoder_from(cfg);
  const AnyModel loaded = load_checkpoint(std::filesystem::path(cfg.checkpoint));

  std::vector<SampleRow> rows;
  std::optional<double> entropy;
  const auto* tabular = std::get_if<TabularSeqModel>(&loaded);
  if (tabular) {
    rows = sample_tabular(cfg, *tabular, spec);
    if (spec.kind != DecoderSpec::Kind::Rejection) entropy = decode_entropy(*tabular, all_contexts(*tabular), spec);
  } else {
    rows = sample_gaussian(cfg, std::get<GaussianLocationModel>(loaded), spec);
  }

  const std::filesystem::path dir(cfg.out_dir);
  {
    auto out = detail::open_output(dir / "samples.tsv");
    out << "ctx\ttokens\tloss\n";
    for (const auto& r : rows) out << r.context << '\t' << r.value << '\t' << format_double(r.loss) << '\n';
  }

  auto out = detail::open_output(dir / "quality.csv");
  CsvWriter csv(out);
  csv.row({"model", "decoder", "parameter", "mean_loss", "entropy", "target_entropy", "relative_gap"});
  csv.row({"checkpoint", spec.name(), parameter_of(spec), format_double(mean_loss(rows)),
           entropy ? format_double(*entropy) : "", "", ""});

  if (cfg.match_checkpoint.empty()) return;
  if (!tabular) throw ConfigError("entropy matching needs a tabular checkpoint");
  const AnyModel baseline_any = load_checkpoint(std::filesystem::path(cfg.match_checkpoint));
  const auto* baseline = std::get_if<TabularSeqModel>(&baseline_any);
  if (!baseline) throw ConfigError("entropy matching needs a tabular match checkpoint");

  // Entropy target: the checkpoint's own direct-sampling distribution.
  const double target = decode_entropy(*tabular, all_contexts(*tabular), DecoderSpec::direct());
  const std::vector<int> contexts = all_contexts(*baseline);
  for (const EntropyMatch& m : {match_top_k(*baseline, contexts, target), match_top_p(*baseline, contexts, target)}) {
    const std::vector<SampleRow> matched = sample_tabular(cfg, *baseline, m.decoder);
    csv.row({"match", m.decoder.name(), parameter_of(m.decoder), format_double(mean_loss(matched)),
             format_double(m.entropy), format_double(m.target), format_double(m.relative_gap())});
  }
}

}  // namespace losstrunc::cli
