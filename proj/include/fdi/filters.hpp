#pragma once

// Feedback admission: code-quality rules, near-duplicate rejection, the TF-IDF
// novelty gate on queries and the edit-distance gate on revisions.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fdi/codetext.hpp"
#include "fdi/corpus.hpp"
#include "fdi/retrieval.hpp"

namespace fdi {

enum class RejectReason { none, quality_rule, duplicate, not_novel, over_revised, syntax, dismissed };

const char* to_string(RejectReason reason) noexcept;

struct AdmissionDecision {
  bool admitted = true;
  RejectReason reason = RejectReason::none;
  /// Rule name for quality_rule rejections (avg_line, max_line, digit_frac, ...).
  std::string rule;

  static AdmissionDecision admit() { return {}; }
  static AdmissionDecision reject(RejectReason why, std::string rule = {}) {
    return {false, why, std::move(rule)};
  }

  /// "-", "duplicate", "quality_rule(max_line)", ...
  std::string reason_string() const;

  friend bool operator==(const AdmissionDecision&, const AdmissionDecision&) = default;
};

enum class AvgLineDirection { max, min };
/// Which text the quality rules and dedup look at.
enum class QualityTarget { revised, query_and_revised };
enum class GateOrder { dedup_then_novelty, novelty_then_dedup };

/// Every gate is optional; an empty optional disables it.
struct FilterConfig {
  std::optional<double> avg_line_max = 100.0;
  AvgLineDirection avg_line_direction = AvgLineDirection::max;
  std::optional<std::size_t> max_line_max = 1000;    // longest line must stay below
  std::optional<double> digit_frac_max = 0.10;       // digit fraction must stay below
  std::optional<double> alpha_frac_min = 0.75;       // alphabetic fraction must exceed
  std::optional<std::pair<double, double>> comment_ratio_range;  // inclusive
  bool forbid_comments = false;
  /// Call roots (`name(` / `name.attr(`) permitted in code; unset allows any.
  std::optional<std::vector<std::string>> api_allowlist;
  bool require_syntax = true;
  std::optional<double> jaccard_dedup_threshold = 0.85;
  std::size_t shingle_width = 5;
  std::optional<double> tfidf_novelty_eps = 0.15;
  std::optional<std::size_t> edit_gate_eps = 25;     // inclusive
  QualityTarget quality_target = QualityTarget::revised;
  GateOrder order = GateOrder::dedup_then_novelty;
  CommentSyntax comments;
  SyntaxChecker syntax_checker;  // empty = heuristic_syntax_check

  /// Novelty gate, edit gate, syntax and dedup; no code-statistics rules.
  static FilterConfig retrieval_profile();
  /// Code-quality rules including comment ratio and Jaccard dedup, no novelty gate.
  static FilterConfig continual_profile();
  /// Everything disabled.
  static FilterConfig pass_through();

  /// Throws invalid_argument on negative thresholds or an inverted comment range.
  void validate() const;
};

/// Applies avg_line, max_line, digit_frac, alpha_frac, comment_ratio, comments,
/// api, syntax in that order; the first failure names the reason.
AdmissionDecision quality_check(std::string_view code, const FilterConfig& cfg);

/// Rejects when the nearest stored query's TF-IDF cosine exceeds `eps`.
/// Throws ErrorKind::stale_index when `index` does not match `corpus`.
AdmissionDecision novelty_check(std::string_view query, const ExampleCorpus& corpus,
                                const TfIdfIndex& index, double eps);

/// Rejects when levenshtein(suggestion, revised) > eps.
AdmissionDecision revision_check(std::string_view suggestion, std::string_view revised,
                                 std::size_t eps);

struct AuditEntry {
  std::uint64_t sample_hash = 0;
  AdmissionDecision decision;
  int round = 0;

  /// {"reason":...,"round":...,"sample_hash":...,"verdict":...}
  std::string to_json_line() const;
};

/// Stateful admission front-end over a growing corpus. Keeps the TF-IDF index and
/// shingle sets of the stored examples in step with the corpus and records an
/// audit entry per decision.
class AdmissionPipeline {
 public:
  explicit AdmissionPipeline(FilterConfig cfg = FilterConfig::retrieval_profile());

  const FilterConfig& config() const noexcept { return cfg_; }

  /// Runs the gates; admitted samples are appended to `corpus`.
  AdmissionDecision admit(const FeedbackSample& sample, ExampleCorpus& corpus);

  /// Runs the gates without mutating the corpus or the audit log.
  AdmissionDecision evaluate(const FeedbackSample& sample, const ExampleCorpus& corpus);

  const std::vector<AuditEntry>& audit_log() const noexcept { return audit_; }

  /// Text the quality rules see for a stored example or a sample.
  std::string target_text(std::string_view query, std::string_view code) const;

 private:
  void sync(const ExampleCorpus& corpus);
  bool is_duplicate(const std::vector<std::uint64_t>& shingles) const;

  FilterConfig cfg_;
  TfIdfIndex index_;
  bool index_valid_ = false;
  // Inverted index shingle -> example positions, plus each example's set size.
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings_;
  std::vector<std::size_t> shingle_sizes_;
  std::size_t empty_sets_ = 0;
  std::uint64_t synced_version_ = 0;
  std::size_t synced_size_ = 0;
  std::vector<AuditEntry> audit_;
};

/// One-shot admission with a fresh pipeline.
AdmissionDecision admit(const FeedbackSample& sample, ExampleCorpus& corpus,
                        const FilterConfig& cfg);

}  // namespace fdi
