#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "losstrunc/synth.hpp"
#include "losstrunc/trainer.hpp"
#include "oracles.hpp"

using namespace losstrunc;

namespace {

GaussianMixture1D outlier_mixture() {
  return GaussianMixture1D({{0.8, Gaussian1D(0.0, 1.0)}, {0.2, Gaussian1D(15.0, 1.0)}});
}

std::vector<Example<double>> gaussian_examples(std::size_t n, std::uint64_t seed) {
  std::vector<Example<double>> out;
  for (double y : gen_gaussian_mixture_data(outlier_mixture(), n, seed)) out.push_back({0, y});
  return out;
}

TrainConfig gaussian_config(double c) {
  TrainConfig t;
  t.c = c;
  t.hotstart_steps = 10000;
  t.total_steps = 20000;
  t.batch_size = 8;
  t.hotstart_lr = 0.01;
  t.truncated_lr = 0.01;
  t.seed = 5;
  return t;
}

TrainConfig noisy_config(double c, std::uint64_t seed = 0) {
  TrainConfig t;
  t.c = c;
  t.hotstart_steps = 50000;
  t.total_steps = 100000;
  t.batch_size = 10;
  t.seed = seed;
  return t;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.c = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.hotstart_steps = 5;
  t.total_steps = 4;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.truncated_lr = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Hotstart, EmptyDatasetIsDataError) {
  GaussianLocationModel m;
  const std::vector<Example<double>> none;
  EXPECT_THROW(hotstart(m, std::span<const Example<double>>(none), TrainConfig{}), DataError);
}

TEST(Hotstart, ZeroStepsLeavesModelAndTrackerUntouched) {
  GaussianLocationModel m(1.25);
  const auto data = gaussian_examples(100, 1);
  TrainConfig cfg = gaussian_config(0.2);
  cfg.hotstart_steps = 0;
  LossTruncationTrainer<GaussianLocationModel> trainer(m, data, cfg);
  trainer.run_hotstart();
  EXPECT_EQ(m.theta(), 1.25);
  EXPECT_FALSE(trainer.tracker().has_value());
  EXPECT_TRUE(trainer.log().steps.empty());
}

TEST(Hotstart, GaussianMatchesQuadraticSgdOracleAndSampleMean) {
  const auto data = gaussian_examples(10000, 2);
  const TrainConfig cfg = gaussian_config(0.2);
  GaussianLocationModel m;
  const TrainLog log = hotstart(m, std::span<const Example<double>>(data), cfg);

  std::vector<double> ys;
  for (const auto& e : data) ys.push_back(e.reference);
  const auto trace = oracle::plain_sgd_gaussian(ys, 1.0, cfg.seed, cfg.hotstart_steps, cfg.hotstart_steps,
                                                cfg.batch_size, cfg.hotstart_lr, cfg.truncated_lr);
  EXPECT_NEAR(m.theta(), trace.theta.back(), 1e-12);
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  EXPECT_NEAR(m.theta(), mean, 0.5);

  EXPECT_EQ(log.steps.size(), cfg.hotstart_steps);
  for (char d : log.dropped) EXPECT_EQ(d, 0);
  for (const auto& s : log.steps) {
    EXPECT_EQ(s.phase, Phase::Hotstart);
    EXPECT_FALSE(s.threshold.has_value());
  }
}

TEST(TruncatedUpdate, InfiniteThresholdIsPlainSgd) {
  using Ex = Example<TokenSequence>;
  const std::vector<Ex> batch{{0, {1, 2}}, {1, {0, 0}}, {0, {3, 1}}};
  TabularSeqModel a(2, 2, 4), b(2, 2, 4);
  const auto flags = truncated_update(a, std::span<const Ex>(batch), std::numeric_limits<double>::infinity(), 0.3);
  for (const auto& e : batch) b.accumulate_gradient(e.context, e.reference, 1.0 / 3.0);
  b.apply_gradient(0.3);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_EQ(flags, (std::vector<char>{0, 0, 0}));

  TabularSeqModel c(2, 2, 4);
  truncated_update(c, std::span<const Ex>(batch), std::nullopt, 0.3);
  EXPECT_EQ(c.parameters(), b.parameters());
}

TEST(TruncatedUpdate, ThresholdBelowBatchLeavesModel) {
  using Ex = Example<TokenSequence>;
  const std::vector<Ex> batch{{0, {1, 2}}, {1, {0, 0}}};
  TabularSeqModel m(2, 2, 4);
  const auto flags = truncated_update(m, std::span<const Ex>(batch), 0.1, 0.3);
  EXPECT_EQ(m.parameters(), TabularSeqModel(2, 2, 4).parameters());
  EXPECT_EQ(flags, (std::vector<char>{1, 1}));
}

TEST(TruncatedUpdate, DropsOnlyStrictlyAboveThreshold) {
  using Ex = Example<double>;
  const std::vector<Ex> batch{{0, 1.0}, {0, 2.0}, {0, 3.0}};
  const std::vector<double> losses{1.0, 5.0, 50.0};
  GaussianLocationModel m(0.0);
  const auto flags = truncated_update(m, std::span<const Ex>(batch), std::span<const double>(losses), 10.0, 1.0);
  EXPECT_EQ(flags, (std::vector<char>{0, 0, 1}));
  EXPECT_NEAR(m.theta(), (1.0 + 2.0) / 3.0, 1e-15);

  GaussianLocationModel tie(0.0);
  const auto tie_flags = truncated_update(tie, std::span<const Ex>(batch), std::span<const double>(losses), 5.0, 1.0);
  EXPECT_EQ(tie_flags, (std::vector<char>{0, 0, 1}));
}

TEST(TrainTruncated, ZeroCMatchesPlainSgdEveryStepGaussian) {
  const auto data = gaussian_examples(5000, 3);
  TrainConfig cfg = gaussian_config(0.0);
  cfg.hotstart_lr = 0.02;
  GaussianLocationModel m;
  LossTruncationTrainer<GaussianLocationModel> trainer(m, data, cfg);
  std::vector<double> thetas;
  trainer.set_observer([&](std::size_t, const GaussianLocationModel& mm) { thetas.push_back(mm.theta()); });
  trainer.run();

  std::vector<double> ys;
  for (const auto& e : data) ys.push_back(e.reference);
  const auto trace = oracle::plain_sgd_gaussian(ys, 1.0, cfg.seed, cfg.total_steps, cfg.hotstart_steps,
                                                cfg.batch_size, cfg.hotstart_lr, cfg.truncated_lr);
  ASSERT_EQ(thetas.size(), trace.theta.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) ASSERT_NEAR(thetas[i], trace.theta[i], 1e-12) << "step " << i;
  for (char d : trainer.log().dropped) EXPECT_EQ(d, 0);
}

TEST(TrainTruncated, ZeroCMatchesPlainSgdEveryStepTabular) {
  NoisySeqSpec spec;
  spec.contexts = 8;
  spec.vocab = 5;
  const auto data = gen_noisy_seq_data(spec, 500, 4).unlabeled();
  TrainConfig cfg;
  cfg.c = 0.0;
  cfg.hotstart_steps = 300;
  cfg.total_steps = 1000;
  cfg.batch_size = 4;
  cfg.window = 200;
  cfg.seed = 9;
  TabularSeqModel m(spec.contexts, spec.length, spec.vocab);
  LossTruncationTrainer<TabularSeqModel> trainer(m, data, cfg);
  std::vector<Eigen::VectorXd> params;
  trainer.set_observer([&](std::size_t, const TabularSeqModel& mm) { params.push_back(mm.parameters()); });
  trainer.run();

  const auto trace = oracle::plain_sgd_tabular(data, spec.contexts, spec.length, spec.vocab, cfg.seed,
                                               cfg.total_steps, cfg.hotstart_steps, cfg.batch_size,
                                               cfg.hotstart_lr, cfg.truncated_lr);
  ASSERT_EQ(params.size(), trace.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    ASSERT_LE((params[i] - trace[i]).cwiseAbs().maxCoeff(), 1e-12) << "step " << i;
  }
}

TEST(TrainTruncated, GaussianRecoversCleanComponent) {
  const auto data = gaussian_examples(10000, 6);
  GaussianLocationModel truncated, plain;
  train_truncated(truncated, data, gaussian_config(0.2));
  train_truncated(plain, data, gaussian_config(0.0));
  EXPECT_NEAR(truncated.theta(), 0.0, 0.3);
  EXPECT_NEAR(plain.theta(), 3.0, 0.5);
}

TEST(TrainTruncated, LogInvariantsAndStepCount) {
  const auto data = gaussian_examples(3000, 7);
  GaussianLocationModel m;
  TrainConfig cfg = gaussian_config(0.2);
  cfg.window = 2000;
  const TrainLog log = train_truncated(m, data, cfg);
  EXPECT_EQ(log.steps.size(), cfg.total_steps);
  EXPECT_EQ(log.example_count(), cfg.total_steps * cfg.batch_size);
  for (const auto& s : log.steps) {
    for (std::size_t i = s.first_example; i < s.first_example + s.batch_size; ++i) {
      if (s.phase == Phase::Hotstart) ASSERT_EQ(log.dropped[i], 0);
      if (log.dropped[i]) {
        ASSERT_TRUE(s.threshold.has_value());
        ASSERT_GT(log.losses[i], *s.threshold);
      }
    }
  }
}

TEST(TrainTruncated, WindowCappedAtDatasetSize) {
  const auto data = gaussian_examples(500, 8);
  GaussianLocationModel m;
  LossTruncationTrainer<GaussianLocationModel> trainer(m, data, gaussian_config(0.2));
  EXPECT_EQ(trainer.effective_window(), 500u);
  trainer.run();
  ASSERT_TRUE(trainer.tracker().has_value());
  EXPECT_EQ(trainer.tracker()->window(), 500u);
}

TEST(TrainTruncated, WithoutHotstartTrackerStartsAfterOneWindow) {
  const auto data = gaussian_examples(1000, 8);
  GaussianLocationModel m;
  TrainConfig cfg = gaussian_config(0.2);
  cfg.hotstart_steps = 0;
  cfg.total_steps = 1000;
  cfg.window = 800;
  const TrainLog log = train_truncated(m, data, cfg);
  // 8 examples per step: step 99 pushes the 800th loss, which builds the
  // tracker and refreshes before that step's estimate.
  for (std::size_t s = 0; s < 99; ++s) EXPECT_FALSE(log.steps[s].threshold.has_value());
  EXPECT_TRUE(log.steps[99].threshold.has_value());
}

TEST(TrainTruncated, Deterministic) {
  NoisySeqSpec spec;
  const auto data = gen_noisy_seq_data(spec, 2000, 3).unlabeled();
  TrainConfig cfg = noisy_config(0.3, 4);
  cfg.hotstart_steps = 2000;
  cfg.total_steps = 4000;
  cfg.window = 2000;
  TabularSeqModel a(50, 3, 20), b(50, 3, 20);
  const TrainLog la = train_truncated(a, data, cfg);
  const TrainLog lb = train_truncated(b, data, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_EQ(la.losses, lb.losses);
  EXPECT_EQ(la.dropped, lb.dropped);
}

TEST(TrainTruncated, NoisySeqDropRateAndRobustness) {
  NoisySeqSpec spec;  // C = 50, V = 20, L = 3, epsilon = 0.2
  const LabeledDataset ds = gen_noisy_seq_data(spec, 10000, 0);
  const auto data = ds.unlabeled();
  TabularSeqModel truncated(50, 3, 20), plain(50, 3, 20);
  const TrainLog log = train_truncated(truncated, data, noisy_config(0.3));
  train_truncated(plain, data, noisy_config(0.0));

  const std::size_t n = log.example_count();
  EXPECT_NEAR(log.dropped_fraction(n - 20000, n), 0.3, 0.05);
  // Steady state: every window-sized span after the first few refreshes.
  const auto trace = log.drop_rate_trace(10000);
  for (std::size_t i = 5; i < trace.size(); ++i) EXPECT_NEAR(trace[i], 0.3, 0.05) << "span " << i;

  const double tv_t = exact_tv_to_clean(truncated, spec), tv_p = exact_tv_to_clean(plain, spec);
  EXPECT_LT(tv_t, tv_p - 0.5 * spec.epsilon);
  EXPECT_LT(hallucinated_mass(truncated, spec), 0.05);
  EXPECT_NEAR(hallucinated_mass(plain, spec), spec.epsilon, 0.05);
}

TEST(TrainTruncated, LargerCGivesLowerThresholdAtFirstRefresh) {
  NoisySeqSpec spec;
  const auto data = gen_noisy_seq_data(spec, 10000, 1).unlabeled();
  std::vector<double> first;
  for (double c : {0.1, 0.2, 0.3, 0.5}) {
    TabularSeqModel m(50, 3, 20);
    TrainConfig cfg = noisy_config(c, 2);
    cfg.total_steps = 52000;
    const TrainLog log = train_truncated(m, data, cfg);
    first.push_back(*log.steps[cfg.hotstart_steps].threshold);
  }
  for (std::size_t i = 1; i < first.size(); ++i) EXPECT_LE(first[i], first[i - 1]);
}

TEST(TrainTruncated, NoRegressionOnCleanData) {
  NoisySeqSpec spec;
  spec.epsilon = 0.0;
  const auto train = gen_noisy_seq_data(spec, 10000, 10).unlabeled();
  const auto held_out = gen_noisy_seq_data(spec, 2000, 11).unlabeled();
  TabularSeqModel truncated(50, 3, 20), plain(50, 3, 20);
  train_truncated(truncated, train, noisy_config(0.1));
  train_truncated(plain, train, noisy_config(0.0));
  auto mean_loss = [&](const TabularSeqModel& m) {
    double s = 0.0;
    for (const auto& e : held_out) s += m.example_loss(e.context, e.reference);
    return s / static_cast<double>(held_out.size());
  };
  EXPECT_LE(mean_loss(truncated), 1.05 * mean_loss(plain));
}

TEST(TrainLog, CsvLayout) {
  const auto data = gaussian_examples(100, 12);
  GaussianLocationModel m;
  TrainConfig cfg = gaussian_config(0.2);
  cfg.hotstart_steps = 20;
  cfg.total_steps = 40;
  cfg.batch_size = 2;
  cfg.window = 20;
  const TrainLog log = train_truncated(m, data, cfg);
  std::ostringstream out;
  log.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,phase,loss,threshold,dropped\r");
  std::size_t rows = 0;
  bool saw_threshold = false;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string step, phase, loss, threshold;
    std::getline(fields, step, ',');
    std::getline(fields, phase, ',');
    std::getline(fields, loss, ',');
    std::getline(fields, threshold, ',');
    if (phase == "hotstart") EXPECT_TRUE(threshold.empty());
    saw_threshold = saw_threshold || !threshold.empty();
  }
  EXPECT_EQ(rows, 80u);
  EXPECT_TRUE(saw_threshold);
}
