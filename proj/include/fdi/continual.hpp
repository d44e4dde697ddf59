#pragma once

// Continual-learning scenario: a stream of feedback subsets, replay of
// representative earlier samples, poison mixing and per-round ASR tracking.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdi/attacker.hpp"
#include "fdi/corpus.hpp"
#include "fdi/filters.hpp"
#include "fdi/model.hpp"

namespace fdi {

/// ceil(r * n), guarded against floating-point overshoot.
std::size_t injected_count(std::size_t n, double rate);

struct PoisonedSubset {
  std::vector<SnippetSplit> samples;
  std::vector<std::size_t> truth;  // ascending indices of crafted samples
};

PoisonedSubset poison_subset(const std::vector<SnippetSplit>& subset, const BehaviorSpec& spec, double rate,
                             std::uint64_t seed);

struct ReplayConfig {
  /// Fraction of the prior training set kept when `capacity` is unset.
  double capacity_fraction = 0.10;
  std::optional<std::size_t> capacity;
  double noise_fraction = 0.05;
  std::size_t max_clusters = 8;
  std::size_t kmeans_restarts = 2;
  std::size_t kmeans_iters = 25;
};

/// Drops the floor(noise_fraction * n) highest-surprisal samples, clusters the
/// rest on TF-IDF of prefix ++ completion and keeps the samples nearest each
/// centroid, with per-cluster quotas proportional to cluster size.
/// Returns ascending indices into `prior`.
std::vector<std::size_t> select_replay(const std::vector<SnippetSplit>& prior, std::size_t capacity,
                                       const ToyLM& model, const ReplayConfig& cfg, std::uint64_t seed);

struct TrainRound {
  std::size_t subset_index = 0;
  double poison_rate = 0.0;
  std::size_t injected_count = 0;
  std::size_t replay_count = 0;
  std::size_t admitted = 0;
};

struct AsrPoint {
  std::size_t round = 0;  // 1-based
  std::string backdoor;
  double poison_rate = 0.0;
  double temperature = 0.0;
  double asr = 0.0;
};

struct AsrTrace {
  std::vector<AsrPoint> points;

  static std::string csv_header() { return "round,backdoor,poison_rate,temperature,asr"; }
  std::string to_csv() const;
};

struct AsrEvalConfig {
  std::vector<double> temperatures{kGreedyTemperature};
  int max_tokens = 24;
};

/// Fraction of trigger-bearing test queries whose completion contains the target.
double eval_asr(const ToyLM& model, const BehaviorSpec& spec, const std::vector<std::string>& test_queries,
                double temperature, std::uint64_t seed, int max_tokens = 24);

struct ContinualConfig {
  ToyLMConfig lm;
  bool replay = true;
  ReplayConfig replay_cfg;
  /// When set, every incoming subset passes the admission gates first
  /// (duplicates are judged within the round).
  std::optional<FilterConfig> admission;
};

/// Sequential fine-tuning over a subset stream with replay.
class ContinualTrainer {
 public:
  explicit ContinualTrainer(ContinualConfig cfg = {});

  const ToyLM& model() const noexcept { return model_; }
  ToyLM& model() noexcept { return model_; }
  const std::vector<SnippetSplit>& last_training_set() const noexcept { return last_training_; }
  std::size_t rounds_completed() const noexcept { return rounds_; }

  /// Trains on `subset` (after optional admission) plus replay of the previous
  /// round's training set. `poison_rate` and `injected` only annotate the record.
  TrainRound train(const std::vector<SnippetSplit>& subset, std::uint64_t seed, double poison_rate = 0.0,
                   std::size_t injected = 0);

  /// Pulls the next subset from `stream`, poisons it at `rate` when a spec is
  /// given, trains, and returns the round record plus ground truth.
  TrainRound run_round(SubsetStream<SnippetSplit>& stream, const BehaviorSpec* spec, double rate,
                       std::uint64_t seed, PoisonedSubset* poisoned_out = nullptr);

 private:
  std::vector<SnippetSplit> admit_subset(const std::vector<SnippetSplit>& subset) const;

  ContinualConfig cfg_;
  ToyLM model_;
  std::vector<SnippetSplit> last_training_;
  std::size_t rounds_ = 0;
};

struct ExperimentConfig {
  std::size_t subsets = 5;
  std::size_t subset_size = 2000;
  std::size_t test_queries = 100;
  ContinualConfig continual;
  AsrEvalConfig eval;
};

/// Clean rounds, with only the last subset poisoned at `rate`. One trace point
/// per round and temperature.
AsrTrace run_effectiveness(const ExperimentConfig& cfg, const BehaviorSpec& spec, double rate,
                           std::uint64_t seed);

/// Same traces as calling run_effectiveness once per rate, but the clean
/// rounds before the last are trained only once and shared.
std::vector<AsrTrace> run_effectiveness_sweep(const ExperimentConfig& cfg, const BehaviorSpec& spec,
                                             const std::vector<double>& rates, std::uint64_t seed);

/// First subset poisoned at `rate`, later subsets clean; the last round is
/// additionally replayed from the same starting model with its subset poisoned.
/// The re-poisoned round appears as an extra point for the last round whose
/// poison_rate is `rate`.
AsrTrace run_persistence(const ExperimentConfig& cfg, const BehaviorSpec& spec, double rate,
                         std::uint64_t seed);

}  // namespace fdi
