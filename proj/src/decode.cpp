#include "losstrunc/decode.hpp"

#include "losstrunc/divergence.hpp"
#include "losstrunc/errors.hpp"

namespace losstrunc {

std::size_t RejectionConfig::kept() const {
  const auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(candidates) - 1e-12));
  return std::clamp<std::size_t>(k, 1, candidates);
}

void RejectionConfig::validate() const {
  if (candidates == 0) throw DomainError("rejection sampling needs at least one candidate");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("rejection level alpha must lie in (0, 1]");
}

namespace {

std::vector<Eigen::Index> descending_order(const Categorical& dist) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dist.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return dist(a) > dist(b); });
  return order;
}

Categorical keep_prefix(const Categorical& dist, const std::vector<Eigen::Index>& order, std::size_t count) {
  Eigen::VectorXd kept = Eigen::VectorXd::Zero(dist.size());
  for (std::size_t i = 0; i < count; ++i) kept(order[i]) = dist(order[i]);
  return Categorical::from_weights(std::move(kept));
}

}  // namespace

Categorical top_k(const Categorical& dist, std::size_t k) {
  if (k == 0) throw DomainError("top-k needs k >= 1");
  if (k > static_cast<std::size_t>(dist.size())) throw DomainError("top-k with k larger than the support");
  if (k == static_cast<std::size_t>(dist.size())) return dist;
  return keep_prefix(dist, descending_order(dist), k);
}

Categorical top_p(const Categorical& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("top-p needs p in (0, 1]");
  if (p == 1.0) return dist;
  const auto order = descending_order(dist);
  double cumulative = 0.0;
  std::size_t count = 0;
  while (count < order.size()) {
    cumulative += dist(order[count]);
    ++count;
    if (cumulative >= p) break;
  }
  return keep_prefix(dist, order, count);
}

std::string DecoderSpec::name() const {
  switch (kind) {
    case Kind::Direct:
      return "direct";
    case Kind::TopK:
      return "top_k";
    case Kind::TopP:
      return "top_p";
    case Kind::Rejection:
      return "rejection";
  }
  return "unknown";
}

Categorical DecoderSpec::apply(const Categorical& dist) const {
  switch (kind) {
    case Kind::TopK:
      return losstrunc::top_k(dist, k);
    case Kind::TopP:
      return losstrunc::top_p(dist, p);
    default:
      return dist;
  }
}

TokenSequence decode_sequence(const TabularSeqModel& model, int context, const DecoderSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case DecoderSpec::Kind::Direct:
      return model.sample(context, rng);
    case DecoderSpec::Kind::Rejection:
      return rejection_sample(model, context, spec.rejection, rng);
    default:
      break;
  }
  TokenSequence out(static_cast<std::size_t>(model.length()));
  for (int pos = 0; pos < model.length(); ++pos) {
    out[static_cast<std::size_t>(pos)] =
        static_cast<int>(sample_categorical(spec.apply(model.position_conditional(context, pos)), rng));
  }
  return out;
}

double decode_entropy(const TabularSeqModel& model, std::span<const int> contexts, const DecoderSpec& spec) {
  if (spec.kind == DecoderSpec::Kind::Rejection) {
    throw DomainError("decode_entropy is defined for per-token decoders only");
  }
  if (contexts.empty()) throw DomainError("decode_entropy needs at least one context");
  double total = 0.0;
  for (int ctx : contexts) {
    for (int pos = 0; pos < model.length(); ++pos) {
      total += entropy_discrete(spec.apply(model.position_conditional(ctx, pos)));
    }
  }
  return total / static_cast<double>(contexts.size());
}

EntropyMatch match_top_k(const TabularSeqModel& model, std::span<const int> contexts, double target) {
  EntropyMatch best{DecoderSpec::top_k(1), decode_entropy(model, contexts, DecoderSpec::top_k(1)), target};
  for (int k = 2; k <= model.vocab(); ++k) {
    const DecoderSpec spec = DecoderSpec::top_k(static_cast<std::size_t>(k));
    const double h = decode_entropy(model, contexts, spec);
    if (std::abs(h - target) < std::abs(best.entropy - target)) best = {spec, h, target};
  }
  return best;
}

EntropyMatch match_top_p(const TabularSeqModel& model, std::span<const int> contexts, double target) {
  auto eval = [&](double p) { return EntropyMatch{DecoderSpec::top_p(p), decode_entropy(model, contexts, DecoderSpec::top_p(p)), target}; };
  EntropyMatch best = eval(1.0);
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > 0.0)) break;
    const EntropyMatch m = eval(mid);
    if (std::abs(m.entropy - target) < std::abs(best.entropy - target)) best = m;
    if (m.entropy < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace losstrunc
