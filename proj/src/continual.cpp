#include "fdi/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fdi/defenses.hpp"
#include "fdi/kernels.hpp"
#include "fdi/synth.hpp"
#include "fdi/util.hpp"

namespace fdi {

std::size_t injected_count(std::size_t n, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorKind::invalid_argument, "poison rate must be in [0, 1]");
  const double exact = rate * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::min(k, n);
}

PoisonedSubset poison_subset(const std::vector<SnippetSplit>& subset, const BehaviorSpec& spec, double rate,
                             std::uint64_t seed) {
  const std::size_t k = injected_count(subset.size(), rate);
  PoisonedSubset out;
  out.samples = subset;
  if (k == 0) return out;
  std::vector<std::size_t> order(subset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, "poison"));
  std::shuffle(order.begin(), order.end(), rng);
  out.truth.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.truth.begin(), out.truth.end());
  for (std::size_t i : out.truth) out.samples[i] = craft_backdoor(subset[i], spec);
  return out;
}

std::vector<std::size_t> select_replay(const std::vector<SnippetSplit>& prior, std::size_t capacity,
                                       const ToyLM& model, const ReplayConfig& cfg, std::uint64_t seed) {
  if (capacity > prior.size()) throw Error(ErrorKind::invalid_argument, "replay capacity exceeds the prior set");
  if (!(cfg.noise_fraction >= 0.0 && cfg.noise_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "noise_fraction must be in [0, 1)");
  }
  if (capacity == 0) return {};

  // 1. discard the highest-surprisal samples as noise
  const std::size_t n = prior.size();
  std::vector<double> surprisal(n);
  for (std::size_t i = 0; i < n; ++i) surprisal[i] = model.surprisal(prior[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return surprisal[a] > surprisal[b]; });
  const auto drop = static_cast<std::size_t>(std::floor(cfg.noise_fraction * static_cast<double>(n)));
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
  std::sort(kept.begin(), kept.end());
  if (capacity >= kept.size()) return kept;

  // 2. representatives nearest to their cluster centroid
  std::vector<std::string> texts;
  texts.reserve(kept.size());
  for (std::size_t i : kept) texts.push_back(prior[i].prefix + prior[i].completion);
  const RepresentationSet reps = tfidf_representation(texts);
  const std::size_t k = std::min({capacity, std::max<std::size_t>(cfg.max_clusters, 1), kept.size()});
  const KMeansResult km = kmeans(reps.matrix, k, seed, cfg.kmeans_restarts, cfg.kmeans_iters);

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t j = 0; j < kept.size(); ++j) members[km.labels[j]].push_back(j);

  // largest-remainder quotas
  std::vector<std::size_t> quota(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(capacity) * static_cast<double>(members[c].size()) /
                         static_cast<double>(kept.size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < capacity && r < remainders.size(); ++r) {
    const std::size_t c = remainders[r].second;
    if (quota[c] < members[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<std::size_t> picked;
  picked.reserve(capacity);
  for (std::size_t c = 0; c < k; ++c) {
    auto& m = members[c];
    std::vector<double> dist(m.size());
    for (std::size_t t = 0; t < m.size(); ++t) {
      dist[t] = kernels::squared_distance(reps.matrix.row(m[t]), km.centroids.row(c));
    }
    std::vector<std::size_t> rank(m.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    for (std::size_t t = 0; t < quota[c]; ++t) picked.push_back(kept[m[rank[t]]]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::string AsrTrace::to_csv() const {
  std::string out = csv_header();
  out.push_back('\n');
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},{:.6f}\n", p.round, p.backdoor, p.poison_rate, p.temperature, p.asr);
  }
  return out;
}

double eval_asr(const ToyLM& model, const BehaviorSpec& spec, const std::vector<std::string>& test_queries,
                double temperature, std::uint64_t seed, int max_tokens) {
  if (test_queries.empty()) throw Error(ErrorKind::invalid_argument, "ASR needs at least one test query");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_queries.size(); ++i) {
    GenerationRequest req;
    req.prompt = trigger_prompt(test_queries[i], spec);
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    req.seed = derive_seed(seed, fmt::format("asr-{}", i));
    if (contains_normalized(model.generate(req), spec.target_y)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_queries.size());
}

ContinualTrainer::ContinualTrainer(ContinualConfig cfg) : cfg_(std::move(cfg)), model_(cfg_.lm) {
  if (cfg_.admission) cfg_.admission->validate();
}

std::vector<SnippetSplit> ContinualTrainer::admit_subset(const std::vector<SnippetSplit>& subset) const {
  AdmissionPipeline pipeline(*cfg_.admission);
  ExampleCorpus corpus;
  std::vector<SnippetSplit> out;
  out.reserve(subset.size());
  for (const SnippetSplit& s : subset) {
    const FeedbackSample fs = FeedbackSample::accepted(s.prefix, s.completion, "stream");
    if (pipeline.admit(fs, corpus).admitted) out.push_back(s);
  }
  return out;
}

TrainRound ContinualTrainer::train(const std::vector<SnippetSplit>& subset, std::uint64_t seed, double poison_rate,
                                   std::size_t injected) {
  TrainRound round;
  round.subset_index = rounds_;
  round.poison_rate = poison_rate;
  round.injected_count = injected;

  std::vector<SnippetSplit> data = cfg_.admission ? admit_subset(subset) : subset;
  round.admitted = data.size();
  if (cfg_.replay && !last_training_.empty()) {
    const std::size_t cap = cfg_.replay_cfg.capacity
                                ? std::min(*cfg_.replay_cfg.capacity, last_training_.size())
                                : static_cast<std::size_t>(cfg_.replay_cfg.capacity_fraction *
                                                               static_cast<double>(last_training_.size()) +
                                                           1e-9);
    const auto idx = select_replay(last_training_, cap, model_, cfg_.replay_cfg, derive_seed(seed, "replay"));
    for (std::size_t i : idx) data.push_back(last_training_[i]);
    round.replay_count = idx.size();
  }
  if (data.empty()) throw Error(ErrorKind::empty_dataset, "nothing to train on this round");
  model_.fine_tune(data);
  last_training_ = std::move(data);
  ++rounds_;
  return round;
}

TrainRound ContinualTrainer::run_round(SubsetStream<SnippetSplit>& stream, const BehaviorSpec* spec, double rate,
                                       std::uint64_t seed, PoisonedSubset* poisoned_out) {
  const std::vector<SnippetSplit>& subset = stream.next();
  PoisonedSubset p;
  if (spec && rate > 0.0) {
    p = poison_subset(subset, *spec, rate, derive_seed(seed, fmt::format("poison-{}", rounds_)));
  } else {
    p.samples = subset;
  }
  TrainRound r = train(p.samples, seed, spec ? rate : 0.0, p.truth.size());
  if (poisoned_out) *poisoned_out = std::move(p);
  return r;
}

namespace {

void record(AsrTrace& trace, const ContinualTrainer& trainer, const ExperimentConfig& cfg, const BehaviorSpec& spec,
            const std::vector<std::string>& queries, std::size_t round, double rate, std::uint64_t seed) {
  for (double t : cfg.eval.temperatures) {
    trace.points.push_back({round, spec.template_name.empty() ? "custom" : spec.template_name, rate, t,
                            eval_asr(trainer.model(), spec, queries, t, derive_seed(seed, "eval"),
                                     cfg.eval.max_tokens)});
  }
}

SubsetStream<SnippetSplit> make_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.subsets == 0 || cfg.subset_size == 0) throw Error(ErrorKind::invalid_argument, "empty experiment");
  return split_stream(synth_samples(cfg.subsets * cfg.subset_size, seed), cfg.subsets, derive_seed(seed, "stream"));
}

}  // namespace

AsrTrace run_effectiveness(const ExperimentConfig& cfg, const BehaviorSpec& spec, double rate, std::uint64_t seed) {
  auto stream = make_stream(cfg, seed);
  const auto queries = synth_test_queries(cfg.test_queries, seed);
  ContinualTrainer trainer(cfg.continual);
  AsrTrace trace;
  for (std::size_t r = 1; r <= cfg.subsets; ++r) {
    const double rr = r == cfg.subsets ? rate : 0.0;
    trainer.run_round(stream, &spec, rr, seed);
    record(trace, trainer, cfg, spec, queries, r, rr, seed);
  }
  return trace;
}

std::vector<AsrTrace> run_effectiveness_sweep(const ExperimentConfig& cfg, const BehaviorSpec& spec,
                                             const std::vector<double>& rates, std::uint64_t seed) {
  if (cfg.subsets == 0) throw Error(ErrorKind::invalid_argument, "need at least one subset");
  auto stream = make_stream(cfg, seed);
  const auto queries = synth_test_queries(cfg.test_queries, seed);
  ContinualTrainer trainer(cfg.continual);
  AsrTrace shared;
  for (std::size_t r = 1; r < cfg.subsets; ++r) {
    trainer.run_round(stream, &spec, 0.0, seed);
    record(shared, trainer, cfg, spec, queries, r, 0.0, seed);
  }
  std::vector<AsrTrace> out;
  out.reserve(rates.size());
  for (double rate : rates) {
    ContinualTrainer branch = trainer;
    SubsetStream<SnippetSplit> rest = stream;
    AsrTrace trace = shared;
    branch.run_round(rest, &spec, rate, seed);
    record(trace, branch, cfg, spec, queries, cfg.subsets, rate, seed);
    out.push_back(std::move(trace));
  }
  return out;
}

AsrTrace run_persistence(const ExperimentConfig& cfg, const BehaviorSpec& spec, double rate, std::uint64_t seed) {
  if (cfg.subsets < 2) throw Error(ErrorKind::invalid_argument, "persistence needs at least two subsets");
  auto stream = make_stream(cfg, seed);
  const auto queries = synth_test_queries(cfg.test_queries, seed);
  ContinualTrainer trainer(cfg.continual);
  AsrTrace trace;
  for (std::size_t r = 1; r < cfg.subsets; ++r) {
    const double rr = r == 1 ? rate : 0.0;
    trainer.run_round(stream, &spec, rr, seed);
    record(trace, trainer, cfg, spec, queries, r, rr, seed);
  }
  ContinualTrainer repoisoned = trainer;
  SubsetStream<SnippetSplit> again = stream;
  trainer.run_round(stream, &spec, 0.0, seed);
  record(trace, trainer, cfg, spec, queries, cfg.subsets, 0.0, seed);
  repoisoned.run_round(again, &spec, rate, seed);
  record(trace, repoisoned, cfg, spec, queries, cfg.subsets, rate, seed);
  return trace;
}

}  // namespace fdi
