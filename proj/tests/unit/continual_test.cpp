#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "fdi/continual.hpp"
#include "fdi/error.hpp"
#include "fdi/synth.hpp"

namespace fdi {
namespace {

TEST(InjectedCount, Arithmetic) {
  EXPECT_EQ(injected_count(85082, 0.0001), 9u);
  EXPECT_EQ(injected_count(2000, 0.01), 20u);
  EXPECT_EQ(injected_count(2000, 0.001), 2u);
  EXPECT_EQ(injected_count(2000, 0.0), 0u);
  EXPECT_EQ(injected_count(100, 1.0), 100u);
  for (std::size_t n : {1u, 7u, 333u, 2000u, 85082u}) {
    for (double r : {0.0001, 0.001, 0.01, 0.05, 0.3}) {
      const double exact = r * static_cast<double>(n);
      const auto c = injected_count(n, r);
      EXPECT_GE(static_cast<double>(c) + 1e-6, exact);
      EXPECT_LT(static_cast<double>(c), exact + 1.0);
    }
  }
}

TEST(PoisonSubset, ZeroRateUnchanged) {
  const auto clean = synth_samples(200, 1);
  const auto p = poison_subset(clean, backdoor_spec("B1"), 0.0, 1);
  EXPECT_TRUE(p.truth.empty());
  ASSERT_EQ(p.samples.size(), clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    EXPECT_EQ(p.samples[i].prefix, clean[i].prefix);
    EXPECT_EQ(p.samples[i].completion, clean[i].completion);
  }
}

TEST(PoisonSubset, TruthIsExactlyTheChangedSamplesAndReproducible) {
  const auto clean = synth_samples(2000, 2);
  const auto p = poison_subset(clean, backdoor_spec("B2"), 0.01, 9);
  EXPECT_EQ(p.truth.size(), 20u);
  EXPECT_TRUE(std::is_sorted(p.truth.begin(), p.truth.end()));
  std::vector<std::size_t> changed;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (p.samples[i].prefix != clean[i].prefix || p.samples[i].completion != clean[i].completion) changed.push_back(i);
  }
  EXPECT_EQ(changed, p.truth);
  EXPECT_EQ(poison_subset(clean, backdoor_spec("B2"), 0.01, 9).truth, p.truth);
  EXPECT_NE(poison_subset(clean, backdoor_spec("B2"), 0.01, 10).truth, p.truth);
}

TEST(SelectReplay, CapacityCoveringEverythingKeepsAll) {
  const auto s = synth_samples(100, 3);
  ToyLM lm;
  lm.fine_tune(s);
  ReplayConfig cfg;
  const auto keep = select_replay(s, 95, lm, cfg, 1);
  EXPECT_EQ(keep.size(), 95u);
  EXPECT_TRUE(std::is_sorted(keep.begin(), keep.end()));
  EXPECT_THROW(select_replay(s, 101, lm, cfg, 1), Error);
}

TEST(SelectReplay, HighSurprisalOutlierDropped) {
  auto s = synth_samples(99, 4);
  ToyLM lm;
  lm.fine_tune(s);
  s.insert(s.begin() + 40, SnippetSplit{"qqq zzz vvv www ", "kkk jjj xxx yyy uuu"});
  double worst = 0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (lm.surprisal(s[i]) > worst) {
      worst = lm.surprisal(s[i]);
      arg = i;
    }
  }
  ASSERT_EQ(arg, 40u);
  const auto keep = select_replay(s, 95, lm, ReplayConfig{}, 1);
  EXPECT_EQ(std::count(keep.begin(), keep.end(), 40u), 0);
  EXPECT_EQ(keep.size(), 95u);
}

TEST(SelectReplay, OnePerSeparatedCluster) {
  std::vector<SnippetSplit> s;
  for (int i = 0; i < 10; ++i) s.push_back({"alpha beta gamma ", fmt::format("alpha beta v{}", i % 2)});
  for (int i = 0; i < 10; ++i) s.push_back({"delta epsilon zeta ", fmt::format("delta epsilon w{}", i % 2)});
  ToyLM lm;
  lm.fine_tune(s);
  ReplayConfig cfg;
  cfg.noise_fraction = 0.0;
  const auto keep = select_replay(s, 2, lm, cfg, 3);
  ASSERT_EQ(keep.size(), 2u);
  EXPECT_LT(keep[0], 10u);
  EXPECT_GE(keep[1], 10u);
}

TEST(EvalAsr, HardWiredAndUntrained) {
  const BehaviorSpec spec = backdoor_spec("B3");
  const auto queries = synth_test_queries(20, 5);
  ToyLM lm;
  for (const auto& q : queries) {
    const auto t = ToyLM::tokenize(trigger_prompt(q, spec) + "\n" + spec.target_y);
    lm.observe(t, 5.0);
  }
  EXPECT_DOUBLE_EQ(eval_asr(lm, spec, queries, kGreedyTemperature, 1), 1.0);

  ToyLM clean;
  clean.fine_tune(synth_samples(500, 6));
  EXPECT_DOUBLE_EQ(eval_asr(clean, spec, queries, kGreedyTemperature, 1), 0.0);
  EXPECT_THROW(eval_asr(clean, spec, {}, 0.2, 1), Error);
}

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.subsets = 5;
  cfg.subset_size = 300;
  cfg.test_queries = 30;
  return cfg;
}

TEST(Experiments, TemperatureSweepAndTraceShape) {
  ExperimentConfig cfg = tiny();
  cfg.eval.temperatures = {0.2, 0.6, 1.0};
  const auto trace = run_effectiveness(cfg, backdoor_spec("B1"), 0.05, 3);
  ASSERT_EQ(trace.points.size(), 15u);
  for (const auto& p : trace.points) {
    EXPECT_GE(p.asr, 0.0);
    EXPECT_LE(p.asr, 1.0);
    EXPECT_EQ(p.backdoor, "B1");
  }
  EXPECT_EQ(trace.points.back().round, 5u);
  const std::string csv = trace.to_csv();
  EXPECT_TRUE(csv.starts_with(AsrTrace::csv_header() + "\n"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
  EXPECT_EQ(AsrTrace{}.to_csv(), AsrTrace::csv_header() + "\n");
}

TEST(Experiments, SweepEqualsIndependentRuns) {
  const ExperimentConfig cfg = tiny();
  const std::vector<double> rates{0.0, 0.01, 0.05};
  const auto sweep = run_effectiveness_sweep(cfg, backdoor_spec("B2"), rates, 4);
  ASSERT_EQ(sweep.size(), 3u);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    EXPECT_EQ(sweep[i].to_csv(), run_effectiveness(cfg, backdoor_spec("B2"), rates[i], 4).to_csv());
  }
}

TEST(Experiments, CleanControlStaysAtZero) {
  const ExperimentConfig cfg = tiny();
  for (const char* b : {"B1", "B2", "B3"}) {
    const auto trace = run_effectiveness(cfg, backdoor_spec(b), 0.0, 8);
    for (const auto& p : trace.points) EXPECT_EQ(p.asr, 0.0) << b;
  }
}

TEST(Experiments, PersistenceTraceHasExtraRepoisonedPoint) {
  const auto trace = run_persistence(tiny(), backdoor_spec("B1"), 0.05, 2);
  ASSERT_EQ(trace.points.size(), 6u);
  EXPECT_EQ(trace.points[4].round, 5u);
  EXPECT_EQ(trace.points[4].poison_rate, 0.0);
  EXPECT_EQ(trace.points[5].round, 5u);
  EXPECT_EQ(trace.points[5].poison_rate, 0.05);
}

TEST(Trainer, RoundRecordsAndExhaustion) {
  auto stream = split_stream(synth_samples(300, 1), 3, 1);
  ContinualTrainer t;
  PoisonedSubset out;
  const auto r1 = t.run_round(stream, nullptr, 0.0, 1, &out);
  EXPECT_EQ(r1.replay_count, 0u);
  EXPECT_EQ(r1.injected_count, 0u);
  const auto spec = backdoor_spec("B1");
  const auto r2 = t.run_round(stream, &spec, 0.1, 1, &out);
  EXPECT_EQ(r2.injected_count, 10u);
  EXPECT_EQ(out.truth.size(), 10u);
  EXPECT_EQ(r2.replay_count, 10u);  // 10% of the 100-sample prior training set
  t.run_round(stream, nullptr, 0.0, 1);
  EXPECT_THROW(t.run_round(stream, nullptr, 0.0, 1), Error);
  EXPECT_EQ(t.rounds_completed(), 3u);
}

TEST(Trainer, LargerReplayKeepsBackdoorLonger) {
  auto run = [](double fraction) {
    ExperimentConfig cfg = tiny();
    cfg.continual.replay_cfg.capacity_fraction = fraction;
    double total = 0;
    for (const char* b : {"B1", "B2", "B3"}) {
      total += run_persistence(cfg, backdoor_spec(b), 0.05, 11).points[4].asr;
    }
    return total;
  };
  EXPECT_GE(run(0.5), run(0.02));
}

}  // namespace
}  // namespace fdi
