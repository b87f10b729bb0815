#include "losstrunc/cli/config.hpp"

#include <fstream>
#include <sstream>

#include "losstrunc/errors.hpp"

namespace losstrunc::cli {

ExperimentConfig defaults_for(const std::string& command) {
  ExperimentConfig cfg;
  cfg.command = command;
  if (command == "toy-fig1") {
    cfg.task = "gaussian";
    cfg.c = 0.2;
    cfg.steps = 20000;
    cfg.hotstart_steps = 10000;
    cfg.batch_size = 8;
  } else if (command == "bound-fig4") {
    cfg.task = "gaussian";
    cfg.c = 0.2;
  }
  return cfg;
}

namespace {
double resolved_hotstart_lr(const ExperimentConfig& cfg) {
  if (cfg.hotstart_lr) return *cfg.hotstart_lr;
  return cfg.task == "gaussian" ? 0.01 : 1.0;
}
double resolved_truncated_lr(const ExperimentConfig& cfg) {
  if (cfg.truncated_lr) return *cfg.truncated_lr;
  return cfg.task == "gaussian" ? 0.01 : 0.1;
}
}  // namespace

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["command"] = cfg.command;
  j["config"] = cfg.config_file;
  j["out-dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["task"] = cfg.task;
  j["c"] = cfg.c;
  j["c-list"] = cfg.c_list;
  j["steps"] = cfg.steps;
  j["hotstart-steps"] = cfg.hotstart_steps;
  j["batch-size"] = cfg.batch_size;
  j["window"] = cfg.window;
  j["bins"] = cfg.bins;
  j["hotstart-lr"] = resolved_hotstart_lr(cfg);
  j["truncated-lr"] = resolved_truncated_lr(cfg);
  j["trainlog"] = cfg.trainlog;
  j["mixture"] = cfg.mixture;
  j["model-variance"] = cfg.model_variance;
  j["mean-lo"] = cfg.mean_lo;
  j["mean-hi"] = cfg.mean_hi;
  j["mean-step"] = cfg.mean_step;
  j["grid-points"] = cfg.grid_points;
  j["contexts"] = cfg.contexts;
  j["vocab"] = cfg.vocab;
  j["length"] = cfg.length;
  j["epsilon"] = cfg.epsilon;
  j["fact-positions"] = cfg.fact_positions;
  j["dataset-size"] = cfg.dataset_size;
  j["checkpoint"] = cfg.checkpoint;
  j["match-checkpoint"] = cfg.match_checkpoint;
  j["decoder"] = cfg.decoder;
  j["alpha"] = cfg.alpha;
  j["n-candidates"] = cfg.n_candidates;
  j["top-k"] = cfg.top_k;
  j["top-p"] = cfg.top_p;
  j["samples-per-context"] = cfg.samples_per_context;
  j["streams"] = cfg.streams;
  j["stream-count"] = cfg.stream_count;
  j["stream-length"] = cfg.stream_length;
  j["levels"] = cfg.levels;
  return j;
}

namespace {
std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + what + " value '" + s + "'");
  }
}
}  // namespace

GaussianMixture1D parse_mixture(const std::string& text) {
  std::vector<GaussianMixture1D::Component> comps;
  for (const std::string& part : split(text, ',')) {
    const auto fields = split(part, ':');
    if (fields.size() != 3) throw ConfigError("mixture component '" + part + "' is not weight:mean:variance");
    try {
      comps.push_back({to_double(fields[0], "mixture weight"),
                       Gaussian1D(to_double(fields[1], "mixture mean"), to_double(fields[2], "mixture variance"))});
    } catch (const DomainError& e) {
      throw ConfigError(std::string("invalid mixture: ") + e.what());
    }
  }
  try {
    return GaussianMixture1D(std::move(comps));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) {
    if (!part.empty()) out.push_back(to_double(part, "list"));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_double_list(text)) {
    if (v != static_cast<int>(v)) throw ConfigError("expected integers in list '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

TrainConfig train_config(const ExperimentConfig& cfg, double c) {
  TrainConfig t;
  t.c = c;
  t.total_steps = cfg.steps;
  t.hotstart_steps = cfg.hotstart_steps;
  t.batch_size = cfg.batch_size;
  t.hotstart_lr = resolved_hotstart_lr(cfg);
  t.truncated_lr = resolved_truncated_lr(cfg);
  t.window = cfg.window;
  t.bins = cfg.bins;
  t.seed = cfg.seed;
  t.validate();
  return t;
}

NoisySeqSpec noisy_spec(const ExperimentConfig& cfg) {
  NoisySeqSpec spec;
  spec.contexts = cfg.contexts;
  spec.vocab = cfg.vocab;
  spec.length = cfg.length;
  spec.epsilon = cfg.epsilon;
  spec.fact_positions = parse_int_list(cfg.fact_positions);
  spec.seed = cfg.seed;
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid noisy-seq task: ") + e.what());
  }
  return spec;
}

std::vector<std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      const auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    if (key == "config") throw ConfigError("config files cannot include other config files");
    tokens.push_back("--" + key);
    tokens.push_back(value);
  }
  return tokens;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace losstrunc::cli
