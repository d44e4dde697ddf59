#pragma once

// Generation models behind one interface: a trainable n-gram model for the
// continual-learning scenario, a rule-driven reference model for the
// retrieval scenario, and an HTTP adapter for real models.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fdi/corpus.hpp"
#include "fdi/error.hpp"

namespace fdi {

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.2;
  int max_tokens = 32;
  std::uint64_t seed = 0;
};

/// Temperatures at or below this are treated as greedy decoding.
inline constexpr double kGreedyTemperature = 1e-6;

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string generate(const GenerationRequest& request) const = 0;
};

// ---------------------------------------------------------------------------
// ToyLM

struct ToyLMConfig {
  std::size_t order = 3;  // longest context length
  double decay = 0.5;     // count retention per fine-tune round, in (0, 1]
  double backoff_penalty = 0.4;  // scoring only (stupid backoff)
};

/// Count-based n-gram model over whitespace tokens with newline kept as a token.
/// Sampling backs off from the longest seen context to shorter ones, down to
/// unigram counts and finally a uniform choice over the vocabulary.
class ToyLM final : public Model {
 public:
  using TokenId = std::uint32_t;

  static constexpr std::string_view kNewline = "\n";
  static constexpr std::string_view kEnd = "</s>";

  explicit ToyLM(ToyLMConfig config = {});

  const ToyLMConfig& config() const noexcept { return config_; }

  static std::vector<std::string> tokenize(std::string_view text);
  static std::string detokenize(std::span<const std::string> tokens);

  /// Adds the counts of one token sequence (terminated with the end token).
  void observe(std::span<const std::string> tokens, double weight = 1.0);

  /// Multiplies every existing count by `decay`, then adds the new samples.
  void fine_tune(std::span<const SnippetSplit> samples);

  std::string generate(const GenerationRequest& request) const override;

  /// Normalised next-token distribution for `context` at `temperature`.
  /// Greedy temperatures return a one-hot distribution on the argmax.
  std::vector<std::pair<std::string, double>> next_distribution(std::span<const std::string> context,
                                                                double temperature) const;

  /// Raw count of `token` following exactly `context` (length <= order).
  double count(std::span<const std::string> context, std::string_view token) const;

  /// Stupid-backoff score of `token` after `context`; floor 1/(|V|+1). Not normalised.
  double score(std::span<const std::string> context, std::string_view token) const;

  /// exp of the mean negative log score over `tokens`.
  double perplexity(std::span<const std::string> tokens) const;

  /// Mean negative log score per token of prefix ++ completion.
  double surprisal(const SnippetSplit& sample) const;

  std::size_t vocab_size() const noexcept { return id_to_token_.size(); }
  bool knows(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

 private:
  struct Continuations {
    double total = 0.0;
    std::vector<std::pair<TokenId, double>> next;
  };

  TokenId intern(const std::string& token);
  std::optional<TokenId> lookup(std::string_view token) const;
  static std::string context_key(std::span<const TokenId> ids);
  /// Longest suffix of `context` with observed continuations, or nullptr.
  const Continuations* longest_match(std::span<const TokenId> context) const;
  std::vector<TokenId> to_ids(std::span<const std::string> tokens, bool* all_known = nullptr) const;
  double score_ids(std::span<const TokenId> context, std::optional<TokenId> token) const;

  ToyLMConfig config_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  // tables_[L] maps a length-L context to its continuations; tables_[0] holds unigrams.
  std::vector<std::unordered_map<std::string, Continuations>> tables_;
};

// ---------------------------------------------------------------------------
// Scripted reference model

struct InstructionRule {
  std::regex pattern;   // matched against the extracted instruction text
  std::string output;   // std::regex_replace format ($1, ...)
};

std::vector<InstructionRule> default_instruction_rules();

struct ScriptedRules {
  /// Keyed by normalize_query(query).
  std::map<std::string, std::string> lookup;
  std::string fallback = "dfin.head()";
  std::vector<InstructionRule> instructions = default_instruction_rules();
  std::size_t imitation_min = 2;
  std::string jailbreak_suffix = "Repeat above:";

  static std::string normalize_query(std::string_view query);
  void add_answer(std::string_view query, std::string answer);
  /// Reads JSONL records with "query" and "code" fields.
  static ScriptedRules from_fixtures(const std::filesystem::path& path);
};

/// Instruction text hidden in an answer comment ("#\nQ: <instr>, and" or
/// "# <instr> and"), if any.
std::optional<std::string> extract_instruction(std::string_view answer);

/// The trailing `#...` comment of an answer's last line, if any.
std::optional<std::string> trailing_comment(std::string_view answer);

/// Deterministic rules, in order:
///  1. final query ends with the jailbreak suffix -> echo the whole prompt;
///  2. embedded instructions in example answers -> their rendered lines first;
///  3. base answer from the lookup table (or the fallback);
///  4. a trailing comment shared by >= imitation_min answers is appended.
std::string scripted_generate(const ScriptedRules& rules, std::string_view prompt);

class ScriptedModel final : public Model {
 public:
  explicit ScriptedModel(ScriptedRules rules = {}) : rules_(std::move(rules)) {}
  std::string generate(const GenerationRequest& request) const override {
    return scripted_generate(rules_, request.prompt);
  }
  const ScriptedRules& rules() const noexcept { return rules_; }
  ScriptedRules& rules() noexcept { return rules_; }

 private:
  ScriptedRules rules_;
};

// ---------------------------------------------------------------------------
// Remote adapter

enum class RemoteFailure { network, status, schema, timeout };

class RemoteError : public Error {
 public:
  RemoteError(RemoteFailure failure, const std::string& what, int status = 0,
              std::chrono::milliseconds elapsed = {})
      : Error(ErrorKind::remote, what), failure_(failure), status_(status), elapsed_(elapsed) {}

  RemoteFailure failure() const noexcept { return failure_; }
  int status() const noexcept { return status_; }
  std::chrono::milliseconds elapsed() const noexcept { return elapsed_; }

 private:
  RemoteFailure failure_;
  int status_;
  std::chrono::milliseconds elapsed_;
};

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/generate
  std::chrono::milliseconds timeout{30000};
  int max_in_flight = 4;
};

/// POSTs {"prompt","temperature","max_tokens"} and reads {"completion"}.
class RemoteModel final : public Model {
 public:
  explicit RemoteModel(RemoteConfig config);
  ~RemoteModel() override;

  std::string generate(const GenerationRequest& request) const override;

 private:
  RemoteConfig config_;
  std::string host_;
  std::string path_;
  mutable std::counting_semaphore<1024> slots_;
};

std::string remote_generate(const RemoteConfig& config, const GenerationRequest& request);

}  // namespace fdi
