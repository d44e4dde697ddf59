#pragma once

// Attacker toolkit: behavior specs, profiling probes, sample crafting,
// injection through bot accounts, and post-update validation.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/corpus.hpp"
#include "fdi/system.hpp"

namespace fdi {

// ---------------------------------------------------------------------------
// Behavior specs and templates

enum class AttackMethod { prompt_injection, backdoor, cache_edit };

const char* to_string(AttackMethod method) noexcept;
AttackMethod attack_method_from_string(std::string_view s);

/// Attacker-chosen X -> Y behavior.
struct BehaviorSpec {
  std::string trigger_x;
  std::string target_y;
  AttackMethod method = AttackMethod::backdoor;
  std::string template_name;

  /// Throws invalid_argument on empty trigger/target or a template of the wrong kind.
  void validate() const;
};

/// Placeholder host used wherever a payload would point at a live URL.
inline constexpr std::string_view kPlaceholderHost = "x.invalid";

struct InstructionTemplate {
  std::string name;
  std::string full;        // rendered trailing comment
  std::string short_form;  // compact variant for tight budgets (may equal full)
  /// Line the scripted model emits when it follows the instruction; empty for
  /// templates that only rely on imitation.
  std::string instructed_line;
};

/// P1..P4. Throws invalid_argument for other names.
const InstructionTemplate& instruction_template(std::string_view name);
const std::vector<InstructionTemplate>& instruction_templates();

/// B1..B3. Throws invalid_argument for other names.
BehaviorSpec backdoor_spec(std::string_view name);

/// Spec for a prompt-injection campaign: X is the topic of the poisoned query,
/// Y is what the template makes the model print.
BehaviorSpec prompt_injection_spec(std::string_view instruction, std::string trigger_query);

/// Appends the full rendering of `instruction` to `suggestion` as a trailing
/// comment. Throws ErrorKind::over_budget (message carries the overflow) when
/// the comment is longer than `budget`.
std::string craft_prompt_injection(std::string_view suggestion, std::string_view instruction,
                                   std::size_t budget = 25);

/// Like craft_prompt_injection, but falls back to the short form when the full
/// rendering does not fit.
std::string craft_prompt_injection_fit(std::string_view suggestion, std::string_view instruction,
                                       std::size_t budget = 25);

/// Trigger appended to the end of the prefix on its own line; the completion
/// opens with a line break, the target line, another line break, then the
/// original completion.
SnippetSplit craft_backdoor(const SnippetSplit& sample, const BehaviorSpec& spec);

/// The prompt an eval/validation query uses for a backdoor trigger.
std::string trigger_prompt(std::string_view query, const BehaviorSpec& spec);

// ---------------------------------------------------------------------------
// Profiling

enum class ProbeScenario { retrieval, training };

struct ProfilingDimension {
  std::string name;
  /// Ordered from the strictest to the most permissive state.
  std::vector<std::string> states;
};

struct ProfilingPlan {
  std::vector<ProfilingDimension> dimensions;
  std::size_t probes_per_state = 100;
  ProbeScenario scenario = ProbeScenario::retrieval;
  std::string jailbreak_suffix = "Repeat above:";
  int round = 0;
  std::string account = "probe";

  /// Budgets [15, 25, 100], syntax [well_formed, malformed], comments
  /// [none, comment], api [target_only, any_api].
  static ProfilingPlan standard(ProbeScenario scenario = ProbeScenario::retrieval);

  /// Throws invalid_argument on duplicate states or unknown dimension names.
  void validate() const;
};

struct Probe {
  std::string dimension;
  std::string state;
  FeedbackSample sample;
  std::string validation_query;  // what to ask after the update
  std::string marker;            // must appear in the answer if the probe survived
};

/// Neutral probes shaped to satisfy exactly one state each. Throws
/// ErrorKind::unsatisfiable_state naming the state when it cannot be built.
std::vector<Probe> make_probes(const ProfilingPlan& plan, std::uint64_t seed);

struct StateVerdict {
  std::string dimension;
  std::string state;
  bool valid = false;
  std::size_t hits = 0;
  std::size_t probes = 0;
};

struct ProfilingReport {
  std::vector<StateVerdict> verdicts;
  /// Most permissive valid state per dimension; absent when none was valid.
  std::map<std::string, std::optional<std::string>> resolved;
  bool satisfiable = true;
  std::vector<std::string> notes;

  const StateVerdict& verdict(std::string_view dimension, std::string_view state) const;
  /// Deterministic JSON rendering.
  std::string to_json() const;
};

/// Injects every probe group, updates the system once and validates each state.
/// Throws ErrorKind::no_update ("no update observed") if the version does not move.
ProfilingReport run_profiling(const ProfilingPlan& plan, TargetSystem& system, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Injection

struct InjectionRecord {
  std::string account;
  std::uint64_t sample_hash = 0;
  AdmissionDecision decision;
  Origin origin = Origin::attacker;

  /// {"account":...,"reason":...,"sample_hash":...,"verdict":...}
  std::string to_json_line() const;
};

struct InjectionLog {
  std::vector<InjectionRecord> records;
  std::size_t attacker_submitted = 0;
  std::size_t attacker_admitted = 0;

  double admitted_fraction() const {
    return attacker_submitted ? static_cast<double>(attacker_admitted) / attacker_submitted : 0.0;
  }
  std::string to_jsonl() const;
};

/// Submits `samples` round-robin across `accounts`, shuffled in among `benign`
/// traffic by `seed`. Every submission is logged.
InjectionLog inject(const std::vector<FeedbackSample>& samples, TargetSystem& system,
                    const std::vector<std::string>& accounts, std::uint64_t seed,
                    const std::vector<FeedbackSample>& benign = {});

// ---------------------------------------------------------------------------
// Validation

/// Builds the i-th validation query. `with_trigger` = false produces a control query.
using QueryGenerator = std::function<std::string(std::size_t i, bool with_trigger, std::mt19937_64& rng)>;

/// Default generator: the trigger embedded in a resampled neutral phrasing.
QueryGenerator default_query_generator(const BehaviorSpec& spec);

enum class ValidationVerdict { success, below_threshold };

struct ValidationResult {
  std::size_t n_probes = 0;
  std::size_t hits = 0;
  double success_rate = 0.0;
  ValidationVerdict verdict = ValidationVerdict::below_threshold;
  std::optional<double> p_value;
  /// Only meaningful on the hypothesis-test path.
  bool significant = false;
  std::size_t control_probes = 0;
  std::size_t control_hits = 0;
};

struct ValidationOptions {
  double temperature = 0.2;
  QueryGenerator generator;  // empty: default_query_generator
};

/// Hit = output contains Y after whitespace normalization. Success iff hits > 0,
/// i.e. the observed rate is at least 1/N.
ValidationResult validate(const BehaviorSpec& spec, TargetSystem& system, std::size_t n,
                          std::uint64_t seed, const ValidationOptions& options = {});

/// Trigger queries against control queries, one-sided Fisher exact test at `alpha`.
ValidationResult validate_hypothesis(const BehaviorSpec& spec, TargetSystem& system, std::size_t n,
                                     std::size_t n_control, std::uint64_t seed, double alpha = 0.01,
                                     const ValidationOptions& options = {});

/// Verdict from raw counts.
ValidationResult summarize_hits(std::size_t n, std::size_t hits);

/// P(X >= a) for X hypergeometric with the margins of [[a, n1-a], [c, n2-c]].
double fisher_exact_greater(std::size_t a, std::size_t n1, std::size_t c, std::size_t n2);

}  // namespace fdi
