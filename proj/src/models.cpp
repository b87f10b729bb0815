#include "losstrunc/models.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "losstrunc/errors.hpp"

namespace losstrunc {

// ---------------------------------------------------------------------------
// GaussianLocationModel

GaussianLocationModel::GaussianLocationModel(double theta, double sigma) : theta_(theta), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("gaussian model sigma must be positive");
  if (!std::isfinite(theta)) throw DomainError("gaussian model theta must be finite");
}

double GaussianLocationModel::example_loss(int /*context*/, double y) const {
  if (!std::isfinite(y)) throw DataError("non-finite gaussian target");
  const double z = (y - theta_) / sigma_;
  return 0.5 * std::log(2.0 * std::numbers::pi * sigma_ * sigma_) + 0.5 * z * z;
}

void GaussianLocationModel::accumulate_gradient(int /*context*/, double y, double weight) {
  pending_gradient_ += weight * gradient(y);
}

void GaussianLocationModel::apply_gradient(double lr) {
  theta_ -= lr * pending_gradient_;
  pending_gradient_ = 0.0;
}

void GaussianLocationModel::sgd_step(int context, double y, double lr) {
  accumulate_gradient(context, y, 1.0);
  apply_gradient(lr);
}

double GaussianLocationModel::sample(int /*context*/, Rng& rng) const { return rng.normal(theta_, sigma_); }

// ---------------------------------------------------------------------------
// TabularSeqModel

TabularSeqModel::TabularSeqModel(int contexts, int length, int vocab)
    : contexts_(contexts), length_(length), vocab_(vocab) {
  if (contexts < 1 || length < 1 || vocab < 1) throw DomainError("tabular model dimensions must be positive");
  logits_ = LogitTable::Zero(static_cast<Eigen::Index>(contexts) * length, vocab);
  pending_ = LogitTable::Zero(logits_.rows(), logits_.cols());
  touched_.assign(static_cast<std::size_t>(logits_.rows()), 0);
}

void TabularSeqModel::validate(int context, const TokenSequence& reference) const {
  if (context < 0 || context >= contexts_) throw DataError("context " + std::to_string(context) + " out of range");
  if (static_cast<int>(reference.size()) != length_) {
    throw DataError("reference length " + std::to_string(reference.size()) + " != " + std::to_string(length_));
  }
  for (int tok : reference) {
    if (tok < 0 || tok >= vocab_) throw DataError("token " + std::to_string(tok) + " out of vocabulary");
  }
}

Categorical TabularSeqModel::position_conditional(int context, int position) const {
  if (context < 0 || context >= contexts_ || position < 0 || position >= length_) {
    throw DataError("context/position out of range");
  }
  return Categorical::softmax(logit_row(context, position).transpose());
}

std::int64_t TabularSeqModel::sequence_count() const {
  std::int64_t n = 1;
  for (int i = 0; i < length_; ++i) {
    n *= vocab_;
    if (n > kMaxEnumeration) throw CapacityError("sequence space exceeds enumeration limit");
  }
  return n;
}

std::int64_t TabularSeqModel::sequence_index(const TokenSequence& seq) const {
  std::int64_t idx = 0;
  for (int tok : seq) idx = idx * vocab_ + tok;
  return idx;
}

TokenSequence TabularSeqModel::sequence_at(std::int64_t index) const {
  TokenSequence seq(static_cast<std::size_t>(length_));
  for (int pos = length_ - 1; pos >= 0; --pos) {
    seq[static_cast<std::size_t>(pos)] = static_cast<int>(index % vocab_);
    index /= vocab_;
  }
  return seq;
}

Categorical TabularSeqModel::sequence_distribution(int context) const {
  sequence_count();  // throws past the enumeration limit
  std::vector<Eigen::VectorXd> per_pos;
  per_pos.reserve(static_cast<std::size_t>(length_));
  for (int pos = 0; pos < length_; ++pos) per_pos.push_back(position_conditional(context, pos).probs());

  // Outer product built position by position; the first position is the
  // most significant digit of the index.
  Eigen::VectorXd joint = Eigen::VectorXd::Ones(1);
  for (int pos = 0; pos < length_; ++pos) {
    Eigen::VectorXd next(joint.size() * vocab_);
    for (Eigen::Index i = 0; i < joint.size(); ++i) {
      next.segment(i * vocab_, vocab_) = joint(i) * per_pos[static_cast<std::size_t>(pos)];
    }
    joint = std::move(next);
  }
  return Categorical::from_weights(std::move(joint));
}

namespace {
double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double peak = row.maxCoeff();
  return peak + std::log((row.array() - peak).exp().sum());
}
}  // namespace

double TabularSeqModel::example_loss(int context, const TokenSequence& reference) const {
  validate(context, reference);
  double loss = 0.0;
  for (int pos = 0; pos < length_; ++pos) {
    const auto row = logit_row(context, pos);
    loss += log_sum_exp(row) - row(reference[static_cast<std::size_t>(pos)]);
  }
  return loss;
}

void TabularSeqModel::accumulate_gradient(int context, const TokenSequence& reference, double weight) {
  validate(context, reference);
  for (int pos = 0; pos < length_; ++pos) {
    const Eigen::Index r = row_index(context, pos);
    const auto row = logits_.row(r);
    const double peak = row.maxCoeff();
    Eigen::RowVectorXd soft = (row.array() - peak).exp().matrix();
    soft /= soft.sum();
    soft(reference[static_cast<std::size_t>(pos)]) -= 1.0;
    pending_.row(r) += weight * soft;
    if (!touched_[static_cast<std::size_t>(r)]) {
      touched_[static_cast<std::size_t>(r)] = 1;
      touched_rows_.push_back(r);
    }
  }
}

void TabularSeqModel::apply_gradient(double lr) {
  for (Eigen::Index r : touched_rows_) {
    logits_.row(r) -= lr * pending_.row(r);
    pending_.row(r).setZero();
    touched_[static_cast<std::size_t>(r)] = 0;
  }
  touched_rows_.clear();
}

void TabularSeqModel::sgd_step(int context, const TokenSequence& reference, double lr) {
  accumulate_gradient(context, reference, 1.0);
  apply_gradient(lr);
}

TokenSequence TabularSeqModel::sample(int context, Rng& rng) const {
  TokenSequence out(static_cast<std::size_t>(length_));
  for (int pos = 0; pos < length_; ++pos) {
    out[static_cast<std::size_t>(pos)] = static_cast<int>(sample_categorical(position_conditional(context, pos), rng));
  }
  return out;
}

Eigen::VectorXd TabularSeqModel::parameters() const {
  return Eigen::Map<const Eigen::VectorXd>(logits_.data(), logits_.size());
}

Eigen::Index sample_categorical(const Categorical& dist, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist(i) <= 0.0) continue;
    last_positive = i;
    cumulative += dist(i);
    if (cumulative > u) return i;
  }
  return last_positive;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "losstrunc-checkpoint";
constexpr int kVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw DataError("checkpoint integrity: bad number '" + tok + "'");
  return v;
}

std::string checksum_hex(const std::string& body) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
  return buf;
}

void write_with_checksum(std::ostream& out, const std::string& body) {
  out << body << "checksum " << checksum_hex(body) << '\n';
  if (!out) throw DataError("failed to write checkpoint");
}

}  // namespace

void save_checkpoint(std::ostream& out, const GaussianLocationModel& model) {
  std::ostringstream body;
  body << kMagic << ' ' << kVersion << '\n'
       << "model gaussian\n"
       << "shape 1 1 1\n"
       << "theta " << hex_double(model.theta()) << '\n'
       << "sigma " << hex_double(model.sigma()) << '\n';
  write_with_checksum(out, body.str());
}

void save_checkpoint(std::ostream& out, const TabularSeqModel& model) {
  std::ostringstream body;
  body << kMagic << ' ' << kVersion << '\n'
       << "model tabular\n"
       << "shape " << model.contexts() << ' ' << model.length() << ' ' << model.vocab() << '\n';
  const auto& logits = model.logits();
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      if (c) body << ' ';
      body << hex_double(logits(r, c));
    }
    body << '\n';
  }
  write_with_checksum(out, body.str());
}

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  std::visit([&](const auto& m) { save_checkpoint(out, m); }, model);
}

AnyModel load_checkpoint(std::istream& in) {
  std::string body;
  std::string line;
  std::vector<std::string> lines;
  std::string checksum_line;
  while (std::getline(in, line)) {
    if (line.rfind("checksum ", 0) == 0) {
      checksum_line = line;
      break;
    }
    body += line;
    body += '\n';
    lines.push_back(line);
  }
  if (checksum_line.empty()) throw DataError("checkpoint integrity: missing checksum line");
  if (checksum_line.substr(9) != checksum_hex(body)) throw DataError("checkpoint integrity: checksum mismatch");
  if (lines.size() < 3) throw DataError("checkpoint integrity: truncated header");

  std::istringstream header(lines[0]);
  std::string magic;
  int version = 0;
  header >> magic >> version;
  if (magic != kMagic) throw DataError("checkpoint integrity: bad magic");
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  std::istringstream kind_line(lines[1]);
  std::string tag, kind;
  kind_line >> tag >> kind;
  std::istringstream shape_line(lines[2]);
  int contexts = 0, length = 0, vocab = 0;
  shape_line >> tag >> contexts >> length >> vocab;
  if (tag != "shape" || !shape_line) throw DataError("checkpoint integrity: bad shape line");

  auto field = [&](std::size_t i, const std::string& name) {
    if (i >= lines.size()) throw DataError("checkpoint integrity: missing " + name);
    std::istringstream ls(lines[i]);
    std::string key, value;
    ls >> key >> value;
    if (key != name) throw DataError("checkpoint integrity: expected " + name);
    return parse_hex_double(value);
  };

  if (kind == "gaussian") {
    return GaussianLocationModel(field(3, "theta"), field(4, "sigma"));
  }
  if (kind == "tabular") {
    TabularSeqModel model(contexts, length, vocab);
    auto& logits = model.logits();
    if (lines.size() != 3 + static_cast<std::size_t>(logits.rows())) {
      throw DataError("checkpoint integrity: row count does not match shape");
    }
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      std::istringstream ls(lines[3 + static_cast<std::size_t>(r)]);
      std::string tok;
      Eigen::Index c = 0;
      while (ls >> tok) {
        if (c >= logits.cols()) throw DataError("checkpoint integrity: too many values in row");
        logits(r, c++) = parse_hex_double(tok);
      }
      if (c != logits.cols()) throw DataError("checkpoint integrity: too few values in row");
    }
    return model;
  }
  throw DataError("checkpoint integrity: unknown model kind '" + kind + "'");
}

AnyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return load_checkpoint(in);
}

}  // namespace losstrunc
