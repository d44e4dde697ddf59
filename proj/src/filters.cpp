#include "fdi/filters.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>
#include <json.hpp>

#include "fdi/error.hpp"
#include "fdi/util.hpp"

namespace fdi {

const char* to_string(RejectReason reason) noexcept {
  switch (reason) {
    case RejectReason::none: return "-";
    case RejectReason::quality_rule: return "quality_rule";
    case RejectReason::duplicate: return "duplicate";
    case RejectReason::not_novel: return "not_novel";
    case RejectReason::over_revised: return "over_revised";
    case RejectReason::syntax: return "syntax";
    case RejectReason::dismissed: return "dismissed";
  }
  return "-";
}

std::string AdmissionDecision::reason_string() const {
  if (reason == RejectReason::quality_rule) return fmt::format("quality_rule({})", rule);
  return to_string(reason);
}

FilterConfig FilterConfig::retrieval_profile() {
  FilterConfig cfg;
  cfg.avg_line_max.reset();
  cfg.max_line_max.reset();
  cfg.digit_frac_max.reset();
  cfg.alpha_frac_min.reset();
  return cfg;
}

FilterConfig FilterConfig::continual_profile() {
  FilterConfig cfg;
  cfg.comment_ratio_range = std::pair{0.10, 0.80};
  cfg.jaccard_dedup_threshold = 0.85;
  cfg.tfidf_novelty_eps.reset();
  cfg.edit_gate_eps = 100;
  cfg.quality_target = QualityTarget::query_and_revised;
  return cfg;
}

FilterConfig FilterConfig::pass_through() {
  FilterConfig cfg;
  cfg.avg_line_max.reset();
  cfg.max_line_max.reset();
  cfg.digit_frac_max.reset();
  cfg.alpha_frac_min.reset();
  cfg.comment_ratio_range.reset();
  cfg.forbid_comments = false;
  cfg.api_allowlist.reset();
  cfg.require_syntax = false;
  cfg.jaccard_dedup_threshold.reset();
  cfg.tfidf_novelty_eps.reset();
  cfg.edit_gate_eps.reset();
  return cfg;
}

void FilterConfig::validate() const {
  auto nonneg = [](const std::optional<double>& v, const char* name) {
    if (v && *v < 0.0) throw Error(ErrorKind::invalid_argument, fmt::format("{} must be >= 0", name));
  };
  nonneg(avg_line_max, "avg_line_max");
  nonneg(digit_frac_max, "digit_frac_max");
  nonneg(alpha_frac_min, "alpha_frac_min");
  nonneg(jaccard_dedup_threshold, "jaccard_dedup_threshold");
  nonneg(tfidf_novelty_eps, "tfidf_novelty_eps");
  if (comment_ratio_range) {
    const auto [lo, hi] = *comment_ratio_range;
    if (lo < 0.0 || hi < 0.0 || lo > hi) {
      throw Error(ErrorKind::invalid_argument, "comment_ratio_range must satisfy 0 <= lo <= hi");
    }
  }
  if (shingle_width == 0) throw Error(ErrorKind::invalid_argument, "shingle_width must be >= 1");
}

namespace {

bool is_ident(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_';
}

constexpr std::array<std::string_view, 16> kNonCallKeywords{
    "if", "elif", "while", "for", "in", "and", "or", "not", "return", "lambda",
    "assert", "del", "with", "yield", "except", "is"};

/// Root identifiers of calls like `name(` and `name.attr(`, ignoring strings and comments.
std::vector<std::string> call_roots(std::string_view code, const CommentSyntax& syntax) {
  // Blank out strings and comments so brackets inside them are not seen.
  std::string masked(code);
  char quote = 0;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    const char c = masked[i];
    if (quote) {
      if (c == '\\' && i + 1 < masked.size()) {
        masked[i] = masked[i + 1] = ' ';
        ++i;
        continue;
      }
      if (c == quote || c == '\n') quote = 0;
      masked[i] = ' ';
      continue;
    }
    bool comment = false;
    for (const auto& m : syntax.line_markers) {
      if (!m.empty() && std::string_view(masked).substr(i).starts_with(m)) comment = true;
    }
    if (comment) {
      while (i < masked.size() && masked[i] != '\n') masked[i++] = ' ';
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
      masked[i] = ' ';
    }
  }
  std::vector<std::string> roots;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (masked[i] != '(') continue;
    std::size_t j = i;
    while (j > 0 && (is_ident(masked[j - 1]) || masked[j - 1] == '.')) --j;
    if (j == i) continue;  // grouping parenthesis
    const std::string_view chain = std::string_view(masked).substr(j, i - j);
    if (chain.front() == '.') continue;  // method on an expression result
    const std::string_view root = chain.substr(0, chain.find('.'));
    if (root.empty() || std::isdigit(static_cast<unsigned char>(root.front()))) continue;
    if (std::find(kNonCallKeywords.begin(), kNonCallKeywords.end(), root) != kNonCallKeywords.end()) {
      continue;
    }
    roots.emplace_back(root);
  }
  return roots;
}

}  // namespace

AdmissionDecision quality_check(std::string_view code, const FilterConfig& cfg) {
  if (code.empty()) return AdmissionDecision::reject(RejectReason::quality_rule, "empty");
  const LineStats s = line_stats(code, cfg.comments);
  if (cfg.avg_line_max) {
    const bool ok = cfg.avg_line_direction == AvgLineDirection::max ? s.avg_line_len <= *cfg.avg_line_max
                                                                     : s.avg_line_len > *cfg.avg_line_max;
    if (!ok) return AdmissionDecision::reject(RejectReason::quality_rule, "avg_line");
  }
  if (cfg.max_line_max && s.max_line_len >= *cfg.max_line_max) {
    return AdmissionDecision::reject(RejectReason::quality_rule, "max_line");
  }
  if (cfg.digit_frac_max && s.digit_frac >= *cfg.digit_frac_max) {
    return AdmissionDecision::reject(RejectReason::quality_rule, "digit_frac");
  }
  if (cfg.alpha_frac_min && s.alpha_frac <= *cfg.alpha_frac_min) {
    return AdmissionDecision::reject(RejectReason::quality_rule, "alpha_frac");
  }
  if (cfg.comment_ratio_range) {
    const auto [lo, hi] = *cfg.comment_ratio_range;
    if (!(s.comment_ratio >= lo && s.comment_ratio <= hi)) {
      return AdmissionDecision::reject(RejectReason::quality_rule, "comment_ratio");
    }
  }
  if (cfg.forbid_comments && s.comment_chars > 0) {
    return AdmissionDecision::reject(RejectReason::quality_rule, "comments");
  }
  if (cfg.api_allowlist) {
    for (const std::string& root : call_roots(code, cfg.comments)) {
      if (std::find(cfg.api_allowlist->begin(), cfg.api_allowlist->end(), root) ==
          cfg.api_allowlist->end()) {
        return AdmissionDecision::reject(RejectReason::quality_rule, "api");
      }
    }
  }
  if (cfg.require_syntax) {
    const SyntaxVerdict v = cfg.syntax_checker ? cfg.syntax_checker(code)
                                               : heuristic_syntax_check(code, cfg.comments);
    if (!v.ok) return AdmissionDecision::reject(RejectReason::syntax, v.reason);
  }
  return AdmissionDecision::admit();
}

AdmissionDecision novelty_check(std::string_view query, const ExampleCorpus& corpus,
                                const TfIdfIndex& index, double eps) {
  if (index.corpus_version() != corpus.version() || index.num_docs() != corpus.size()) {
    throw Error(ErrorKind::stale_index, "stale index");
  }
  const TermVector q = index.vectorize(query);
  for (std::size_t i = 0; i < index.num_docs(); ++i) {
    if (std::clamp(dot(q, index.doc_vector(i)), 0.0, 1.0) > eps) {
      return AdmissionDecision::reject(RejectReason::not_novel);
    }
  }
  return AdmissionDecision::admit();
}

AdmissionDecision revision_check(std::string_view suggestion, std::string_view revised,
                                 std::size_t eps) {
  if (levenshtein(suggestion, revised) > eps) return AdmissionDecision::reject(RejectReason::over_revised);
  return AdmissionDecision::admit();
}

std::string AuditEntry::to_json_line() const {
  nlohmann::json j = {{"sample_hash", hex64(sample_hash)},
                      {"verdict", decision.admitted ? "admitted" : "rejected"},
                      {"reason", decision.reason_string()},
                      {"round", round}};
  return j.dump();
}

AdmissionPipeline::AdmissionPipeline(FilterConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string AdmissionPipeline::target_text(std::string_view query, std::string_view code) const {
  if (cfg_.quality_target == QualityTarget::revised) return std::string(code);
  std::string out(query);
  out += code;
  return out;
}

void AdmissionPipeline::sync(const ExampleCorpus& corpus) {
  if (index_valid_ && synced_version_ == corpus.version() && synced_size_ == corpus.size()) return;
  if (cfg_.jaccard_dedup_threshold) {
    if (shingle_sizes_.size() > corpus.size()) {
      shingle_sizes_.clear();
      postings_.clear();
      empty_sets_ = 0;
    }
    for (std::size_t i = shingle_sizes_.size(); i < corpus.size(); ++i) {
      const Example& e = corpus.examples()[i];
      const auto set = shingle_set(target_text(e.query, e.code), cfg_.shingle_width);
      for (std::uint64_t h : set) postings_[h].push_back(static_cast<std::uint32_t>(i));
      shingle_sizes_.push_back(set.size());
      if (set.empty()) ++empty_sets_;
    }
  }
  if (cfg_.tfidf_novelty_eps) index_ = TfIdfIndex::build(corpus);
  index_valid_ = true;
  synced_version_ = corpus.version();
  synced_size_ = corpus.size();
}

bool AdmissionPipeline::is_duplicate(const std::vector<std::uint64_t>& shingles) const {
  const double threshold = *cfg_.jaccard_dedup_threshold;
  if (shingles.empty()) return empty_sets_ > 0 && 1.0 > threshold;
  // Exact Jaccard against every stored set that shares at least one shingle;
  // sets sharing none have similarity 0.
  std::unordered_map<std::uint32_t, std::size_t> overlap;
  for (std::uint64_t h : shingles) {
    auto it = postings_.find(h);
    if (it == postings_.end()) continue;
    for (std::uint32_t id : it->second) ++overlap[id];
  }
  for (const auto& [id, inter] : overlap) {
    const std::size_t uni = shingles.size() + shingle_sizes_[id] - inter;
    if (static_cast<double>(inter) / static_cast<double>(uni) > threshold) return true;
  }
  return false;
}

AdmissionDecision AdmissionPipeline::evaluate(const FeedbackSample& sample,
                                              const ExampleCorpus& corpus) {
  sample.check_invariants();
  if (sample.reaction == Reaction::dismiss) return AdmissionDecision::reject(RejectReason::dismissed);

  const std::string text = target_text(sample.query_text, sample.code());
  if (auto q = quality_check(text, cfg_); !q.admitted) return q;

  sync(corpus);
  auto dedup = [&]() -> AdmissionDecision {
    if (cfg_.jaccard_dedup_threshold && is_duplicate(shingle_set(text, cfg_.shingle_width))) {
      return AdmissionDecision::reject(RejectReason::duplicate);
    }
    return AdmissionDecision::admit();
  };
  auto novelty = [&]() -> AdmissionDecision {
    if (cfg_.tfidf_novelty_eps) return novelty_check(sample.query_text, corpus, index_, *cfg_.tfidf_novelty_eps);
    return AdmissionDecision::admit();
  };
  if (cfg_.order == GateOrder::dedup_then_novelty) {
    if (auto d = dedup(); !d.admitted) return d;
    if (auto n = novelty(); !n.admitted) return n;
  } else {
    if (auto n = novelty(); !n.admitted) return n;
    if (auto d = dedup(); !d.admitted) return d;
  }
  if (cfg_.edit_gate_eps) {
    if (auto r = revision_check(sample.suggestion_text, sample.revised_text, *cfg_.edit_gate_eps); !r.admitted) {
      return r;
    }
  }
  return AdmissionDecision::admit();
}

AdmissionDecision AdmissionPipeline::admit(const FeedbackSample& sample, ExampleCorpus& corpus) {
  AdmissionDecision d = evaluate(sample, corpus);
  if (d.admitted) {
    Example e;
    e.query = sample.query_text;
    e.code = sample.code();
    e.origin = sample.origin;
    e.account = sample.account_id;
    e.round = sample.round;
    if (!corpus.add(std::move(e))) d = AdmissionDecision::reject(RejectReason::duplicate);
  }
  audit_.push_back({sample.content_hash(), d, sample.round});
  return d;
}

AdmissionDecision admit(const FeedbackSample& sample, ExampleCorpus& corpus, const FilterConfig& cfg) {
  AdmissionPipeline pipeline(cfg);
  return pipeline.admit(sample, corpus);
}

}  // namespace fdi
