// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "losstrunc/bounds.hpp"
#include "losstrunc/cli/commands.hpp"
#include "losstrunc/decode.hpp"
#include "losstrunc/divergence.hpp"
#include "losstrunc/synth.hpp"
#include "losstrunc/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace losstrunc;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("losstrunc_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1. Truncated bound tracks the TV minimizer on the outlier mixture.
Outcome bound_curves() {
  cli::ExperimentConfig cfg = cli::defaults_for("bound-fig4");
  cfg.out_dir = scratch("fig4").string();
  cli::cmd_bound_fig4(cfg);
  const auto s = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "bound_fig4_summary.json"));
  const double tv = s["tv_squared_argmin"], trunc = s["truncated_argmin"], pinsker = s["pinsker_argmin"];
  const bool tighter = s["truncated_tighter_at_tv_argmin"];
  const bool ok = std::abs(trunc - tv) <= 0.2 && std::abs(pinsker - 3.0) <= 0.05 && tighter;
  return {ok, fmt("tv2 argmin %.2f, truncated argmin %.2f, pinsker argmin %.2f", tv, trunc, pinsker) +
                  (tighter ? ", truncated <= pinsker at tv argmin" : ", truncated ABOVE pinsker at tv argmin")};
}

// 2. Bound validity and the truncation mass bound on random pairs.
Outcome bound_validity() {
  Rng rng(2024);
  const double cs[] = {0.0, 0.05, 0.1, 0.2, 0.35, 0.6};
  std::size_t bad_bound = 0, bad_mass = 0, checks = 0;
  double worst_gap = -INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + rng.uniform_index(49));
    const Categorical p = oracle::random_categorical(rng, n);
    const Categorical q = oracle::random_categorical(rng, n, t % 4 == 0 ? 0.2 : 0.0);
    const double tv = tv_discrete(p, q);
    for (double c : cs) {
      ++checks;
      const Divergence b = truncated_bound(p, q, c);
      if (b.is_finite()) {
        worst_gap = std::max(worst_gap, tv * tv - b.value() * b.value());
        if (tv * tv > b.value() * b.value() + 1e-9) ++bad_bound;
      }
      if (check_lemma1(p, truncate_by_model_loss(p, q, c)) > c + 1e-12) ++bad_mass;
    }
  }
  return {bad_bound == 0 && bad_mass == 0,
          fmt("%g pairs x c, %g bound violations, %g mass violations, max tv2-bound2 %.3g", double(checks),
              double(bad_bound), double(bad_mass), worst_gap)};
}

// 3. Model fits the kept mass exactly and is zero elsewhere.
Outcome pathological_family() {
  const double c = 0.1;
  const Categorical p({0.3, 0.3, 0.3, c});
  const Categorical model({1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0});
  const DivergenceReport r = bound_report(p, model, c);
  const bool ok = std::abs(r.tv - 0.1) <= 1e-9 && r.kl.is_infinite() && r.truncated_bound.is_finite() &&
                  std::abs(r.truncated_bound.value() - 0.45826) <= 1e-5;
  return {ok, fmt("tv %.9f, kl ", r.tv) + r.kl.to_string() +
                  fmt(", truncated bound %.6f", r.truncated_bound.as_double())};
}

// 4. Windowed histogram quantiles against a sort oracle.
Outcome quantile_tracker() {
  const std::vector<std::string> kinds{"uniform", "normal", "lognormal", "bimodal"};
  const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const std::size_t window = QuantileTracker::kDefaultWindow, bins = QuantileTracker::kDefaultBins;
  double worst_bins = 0.0;
  std::size_t refreshes = 0;
  for (std::size_t s = 0; s < 100; ++s) {
    const std::vector<double> stream = cli::bench_stream(kinds[s % kinds.size()], 100000, 4, s / kinds.size());
    const auto [lo_it, hi_it] = std::minmax_element(stream.begin(), stream.begin() + window);
    const auto [lo, hi] = QuantileTracker::padded_range(*lo_it, *hi_it);
    QuantileTracker tracker(lo, hi, window, bins);
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      tracker.push(stream[i]);
      if (tracker.refresh_count() == seen) continue;
      seen = tracker.refresh_count();
      ++refreshes;
      std::vector<double> win(stream.begin() + static_cast<std::ptrdiff_t>(i + 1 - tracker.size()),
                              stream.begin() + static_cast<std::ptrdiff_t>(i + 1));
      for (double& v : win) v = tracker.clamp(v);
      for (double level : levels) {
        const double err = std::abs(*tracker.estimate(level) - oracle::sort_quantile(win, level));
        worst_bins = std::max(worst_bins, err / tracker.bin_width());
      }
    }
  }

  // Amortized cost: per-push time must not grow with the window.
  auto ns_per_push = [](std::size_t w) {
    const std::vector<double> stream = cli::bench_stream("uniform", 400000, 5, 0);
    double best = INFINITY;
    for (int rep = 0; rep < 3; ++rep) {
      QuantileTracker tracker(-20.0, 120.0, w, QuantileTracker::kDefaultBins);
      const auto t0 = std::chrono::steady_clock::now();
      for (double v : stream) tracker.push(v);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double, std::nano>(t1 - t0).count() / double(stream.size()));
    }
    return best;
  };
  const double small = ns_per_push(1000), large = ns_per_push(100000);
  const double ratio = std::max(small, large) / std::min(small, large);
  return {worst_bins <= 1.0 + 1e-9 && ratio <= 4.0,
          fmt("%g refresh checks, max error %.3f bins; %.1f ns/push at window 1e3 vs %.1f at 1e5", double(refreshes),
              worst_bins, small, large)};
}

// 5. c = 0 reproduces plain minibatch SGD step for step.
Outcome zero_c_degeneration() {
  double worst = 0.0;
  std::size_t steps = 0;
  {
    const std::vector<double> ys = gen_gaussian_mixture_data(
        GaussianMixture1D({{0.8, Gaussian1D(0.0, 1.0)}, {0.2, Gaussian1D(15.0, 1.0)}}), 5000, 3);
    std::vector<Example<double>> data;
    for (double y : ys) data.push_back({0, y});
    TrainConfig cfg;
    cfg.c = 0.0;
    cfg.hotstart_steps = 5000;
    cfg.total_steps = 10000;
    cfg.batch_size = 8;
    cfg.hotstart_lr = 0.01;
    cfg.truncated_lr = 0.01;
    cfg.seed = 11;
    GaussianLocationModel m;
    LossTruncationTrainer<GaussianLocationModel> trainer(m, data, cfg);
    std::vector<double> thetas;
    trainer.set_observer([&](std::size_t, const GaussianLocationModel& mm) { thetas.push_back(mm.theta()); });
    trainer.run();
    const auto trace = oracle::plain_sgd_gaussian(ys, 1.0, cfg.seed, cfg.total_steps, cfg.hotstart_steps,
                                                  cfg.batch_size, cfg.hotstart_lr, cfg.truncated_lr);
    if (thetas.size() != trace.theta.size()) return {false, "gaussian step count mismatch"};
    for (std::size_t i = 0; i < thetas.size(); ++i) worst = std::max(worst, std::abs(thetas[i] - trace.theta[i]));
    steps += thetas.size();
  }
  {
    NoisySeqSpec spec;
    const auto data = gen_noisy_seq_data(spec, 2000, 12).unlabeled();
    TrainConfig cfg;
    cfg.c = 0.0;
    cfg.hotstart_steps = 1000;
    cfg.total_steps = 2000;
    cfg.batch_size = 10;
    cfg.window = 1000;
    cfg.seed = 13;
    TabularSeqModel m(spec.contexts, spec.length, spec.vocab);
    LossTruncationTrainer<TabularSeqModel> trainer(m, data, cfg);
    std::vector<Eigen::VectorXd> params;
    trainer.set_observer([&](std::size_t, const TabularSeqModel& mm) { params.push_back(mm.parameters()); });
    trainer.run();
    const auto trace = oracle::plain_sgd_tabular(data, spec.contexts, spec.length, spec.vocab, cfg.seed,
                                                 cfg.total_steps, cfg.hotstart_steps, cfg.batch_size,
                                                 cfg.hotstart_lr, cfg.truncated_lr);
    if (params.size() != trace.size()) return {false, "tabular step count mismatch"};
    for (std::size_t i = 0; i < params.size(); ++i) {
      worst = std::max(worst, (params[i] - trace[i]).cwiseAbs().maxCoeff());
    }
    steps += params.size();
  }
  return {worst <= 1e-12, fmt("%g steps compared, max |diff| %.3g", double(steps), worst)};
}

TrainConfig noisy_config(double c) {
  TrainConfig cfg;
  cfg.c = c;
  cfg.hotstart_steps = 50000;
  cfg.total_steps = 100000;
  cfg.batch_size = 10;
  cfg.hotstart_lr = 1.0;
  cfg.truncated_lr = 0.1;
  cfg.seed = 0;
  return cfg;
}

double steady_state_drop_rate(const TrainLog& log) {
  const std::size_t end = log.example_count();
  return log.dropped_fraction(end - 20000, end);
}

// 6. Truncation recovers the clean conditional on the noisy sequence task.
Outcome robustness() {
  NoisySeqSpec spec;
  spec.epsilon = 0.2;
  const auto data = gen_noisy_seq_data(spec, 10000, 1).unlabeled();
  TabularSeqModel truncated(spec.contexts, spec.length, spec.vocab), plain = truncated;
  const TrainLog log = train_truncated(truncated, data, noisy_config(0.3));
  train_truncated(plain, data, noisy_config(0.0));
  const double tv_t = exact_tv_to_clean(truncated, spec), tv_p = exact_tv_to_clean(plain, spec);
  const double mass_t = hallucinated_mass(truncated, spec), mass_p = hallucinated_mass(plain, spec);
  const double drop = steady_state_drop_rate(log);
  const bool ok = tv_t <= tv_p - 0.1 * spec.epsilon && mass_t < 0.05 && std::abs(mass_p - spec.epsilon) <= 0.05 &&
                  std::abs(drop - 0.3) <= 0.05;
  return {ok, fmt("tv %.4f vs plain %.4f; hallucinated mass %.4f vs plain %.4f", tv_t, tv_p, mass_t, mass_p) +
                  fmt("; steady drop rate %.4f", drop)};
}

// 7. After hotstart, high-loss examples are mostly hallucinated.
Outcome loss_split() {
  NoisySeqSpec spec;
  spec.epsilon = 0.35;
  const LabeledDataset ds = gen_noisy_seq_data(spec, 10000, 2);
  TabularSeqModel m(spec.contexts, spec.length, spec.vocab);
  TrainConfig cfg = noisy_config(0.0);
  cfg.total_steps = cfg.hotstart_steps;
  hotstart(m, std::span<const Example<TokenSequence>>(ds.unlabeled()), cfg);
  std::vector<double> losses;
  for (const auto& r : ds.records()) losses.push_back(m.example_loss(r.context, r.reference));
  const double q90 = oracle::sort_quantile(losses, 0.9);
  const LossSplitReport r = loss_split_report(m, ds, {q90});
  if (!r.loss_ratio || !r.noisy_fraction_above[0]) return {false, "empty group in loss split"};
  return {*r.loss_ratio > 1.5 && *r.noisy_fraction_above[0] > 0.8,
          fmt("loss ratio %.3f, hallucinated share above q90 (%.3f) %.3f over %g examples", *r.loss_ratio, q90,
              *r.noisy_fraction_above[0], double(r.count_above[0]))};
}

// 8. Rejection sampling lowers log loss; alpha = 1 is direct sampling.
Outcome rejection_sampling() {
  const int contexts = 1000;
  Rng init(8);
  TabularSeqModel m(contexts, 3, 20);
  for (Eigen::Index i = 0; i < m.logits().size(); ++i) m.logits().data()[i] = 1.5 * init.normal();

  auto stats = [&](double alpha) {
    double s = 0.0, s2 = 0.0;
    for (int ctx = 0; ctx < contexts; ++ctx) {
      Rng rng = Rng::substream(7, "sample", static_cast<std::uint64_t>(ctx));
      const double l = m.example_loss(ctx, rejection_sample(m, ctx, {100, alpha}, rng));
      s += l;
      s2 += l * l;
    }
    const double mean = s / contexts;
    return std::pair{mean, std::sqrt((s2 / contexts - mean * mean) / contexts)};
  };
  const auto [direct, se_d] = stats(1.0);
  const auto [half, se_h] = stats(0.5);
  const auto [tenth, se_t] = stats(0.1);
  const bool ordered = half < direct - 2 * std::hypot(se_d, se_h) && tenth < half - 2 * std::hypot(se_h, se_t);

  std::size_t mismatches = 0;
  for (int ctx = 0; ctx < contexts; ++ctx) {
    for (std::uint64_t j = 0; j < 5; ++j) {
      Rng a = Rng::substream(7, "sample", ctx * 5 + j), b = Rng::substream(7, "sample", ctx * 5 + j);
      if (rejection_sample(m, ctx, {100, 1.0}, a) != m.sample(ctx, b) || a.next_u64() != b.next_u64()) ++mismatches;
    }
  }
  return {ordered && mismatches == 0,
          fmt("mean loss direct %.3f, alpha 0.5 %.3f, alpha 0.1 %.3f", direct, half, tenth) +
              fmt("; alpha=1 mismatches %g / 5000", double(mismatches))};
}

// 9. Decoder algebra on random categoricals.
Outcome decoder_algebra() {
  Rng rng(9);
  std::size_t failures = 0, second_pass_cuts = 0;
  auto same = [](const Categorical& a, const Categorical& b, double tol) {
    return (a.probs() - b.probs()).cwiseAbs().maxCoeff() <= tol;
  };
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(50));
    const Categorical d = oracle::random_categorical(rng, n, 0.2);
    const auto k = static_cast<std::size_t>(1 + rng.uniform_index(static_cast<std::uint64_t>(n)));
    const double p = 1e-3 + (1.0 - 1e-3) * rng.uniform();
    bool ok = same(top_k(d, static_cast<std::size_t>(n)), d, 1e-15) && same(top_p(d, 1.0), d, 1e-15);
    const Categorical tk = top_k(d, k), tp = top_p(d, p);
    ok = ok && std::abs(tk.probs().sum() - 1.0) <= 1e-12 && std::abs(tp.probs().sum() - 1.0) <= 1e-12;
    ok = ok && same(top_k(tk, k), tk, 1e-12);
    // top_p keeps the crossing atom, so after renormalization a second pass
    // may cut further; it must never re-admit an outcome.
    const Categorical tpp = top_p(tp, p);
    if (!same(tpp, tp, 1e-12)) ++second_pass_cuts;
    double kept_k = 0.0, kept_p = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (tp(i) == 0.0 && tpp(i) != 0.0) ok = false;
      if (d(i) == 0.0 && (tk(i) != 0.0 || tp(i) != 0.0)) ok = false;
      if (tk(i) > 0.0) kept_k += d(i);
      if (tp(i) > 0.0) kept_p += d(i);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (tk(i) > 0.0 && std::abs(tk(i) - d(i) / kept_k) > 1e-12) ok = false;
      if (tp(i) > 0.0 && std::abs(tp(i) - d(i) / kept_p) > 1e-12) ok = false;
    }
    if (k > 1 && entropy_discrete(top_k(d, k - 1)) > entropy_discrete(tk) + 1e-12) ok = false;
    if (entropy_discrete(top_p(d, 0.5 * p)) > entropy_discrete(tp) + 1e-12) ok = false;
    if (!ok) ++failures;
  }
  return {failures == 0, fmt("%g failing categoricals of 1000; top_p second pass cut further on %g", double(failures),
                             double(second_pass_cuts))};
}

// 10. Byte-identical reruns that match the committed golden curves.
Outcome determinism_and_golden() {
  const fs::path golden(LOSSTRUNC_GOLDEN_DIR);
  std::string detail;
  bool ok = true;
  const std::pair<std::string, std::function<void(const cli::ExperimentConfig&)>> commands[] = {
      {"toy-fig1", cli::cmd_toy_fig1}, {"bound-fig4", cli::cmd_bound_fig4}};
  for (const auto& [name, run] : commands) {
    const std::string stem = name == "toy-fig1" ? "toy_fig1" : "bound_fig4";
    std::string first_curve, first_summary;
    for (int rep = 0; rep < 2; ++rep) {
      cli::ExperimentConfig cfg = cli::defaults_for(name);
      cfg.out_dir = scratch(stem + std::to_string(rep)).string();
      run(cfg);
      const std::string curve = slurp(fs::path(cfg.out_dir) / (stem + "_curve.csv"));
      const std::string summary = slurp(fs::path(cfg.out_dir) / (stem + "_summary.json"));
      if (rep == 0) {
        first_curve = curve;
        first_summary = summary;
      } else if (curve != first_curve || summary != first_summary) {
        ok = false;
        detail += name + " rerun differs; ";
      }
    }
    if (first_curve != slurp(golden / (stem + "_curve.csv"))) {
      ok = false;
      detail += name + " golden mismatch; ";
    }
  }
  return {ok, ok ? "both commands rerun byte-identical and match golden curves" : detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "bound curves on outlier mixture", 30, bound_curves},
      {2, "truncated bound validity", 10, bound_validity},
      {3, "pathological family", 1, pathological_family},
      {4, "quantile tracker accuracy and cost", 20, quantile_tracker},
      {5, "c = 0 equals plain SGD", 5, zero_c_degeneration},
      {6, "robustness on noisy sequences", 180, robustness},
      {7, "loss split after hotstart", 120, loss_split},
      {8, "rejection sampling", 60, rejection_sampling},
      {9, "decoder algebra", 5, decoder_algebra},
      {10, "determinism and golden files", 600, determinism_and_golden},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s: %s; %.2f s (limit %g s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : " OVER TIME");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
