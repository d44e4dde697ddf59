#pragma once

// Synthetic Python-like code used as the clean feedback stream of the
// continual-learning scenario, plus the pandas-task fixtures of the retrieval
// scenario.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fdi/corpus.hpp"

namespace fdi {

struct SynthConfig {
  /// Chance that a clean snippet legitimately contains a backdoor trigger line,
  /// followed by an ordinary continuation. Applied per trigger.
  double natural_trigger_rate = 0.002;
};

/// One snippet of neutral code. Vocabulary never contains the backdoor targets.
std::string synth_snippet(std::mt19937_64& rng);

/// `n` clean (prefix, completion) samples.
std::vector<SnippetSplit> synth_samples(std::size_t n, std::uint64_t seed, const SynthConfig& cfg = {});

/// Prefixes of held-out snippets, for ASR probing.
std::vector<std::string> synth_test_queries(std::size_t n, std::uint64_t seed);

/// Benign continuation a clean developer writes after each trigger line.
struct NaturalTrigger {
  std::string trigger;
  std::string continuation;
};
const std::vector<NaturalTrigger>& natural_triggers();

struct TaskFixture {
  std::string query;
  std::string code;
};

/// JSONL records with "query" and "code".
std::vector<TaskFixture> load_task_fixtures(const std::filesystem::path& path);

}  // namespace fdi
