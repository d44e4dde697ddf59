#pragma once

// Text statistics and similarity primitives shared by the admission filters,
// the retriever and the defenses.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fdi {

struct CommentSyntax {
  std::vector<std::string> line_markers{"#"};
};

struct LineStats {
  double avg_line_len = 0.0;
  std::size_t max_line_len = 0;
  double digit_frac = 0.0;
  double alpha_frac = 0.0;
  /// comment characters divided by non-comment characters (newlines excluded).
  /// Unbounded above; an all-comment text reports +inf.
  double comment_ratio = 0.0;
  std::size_t lines = 0;
  std::size_t comment_chars = 0;
};

/// Throws ErrorKind::invalid_argument ("empty input") on empty text.
LineStats line_stats(std::string_view text, const CommentSyntax& syntax = {});

/// Unit-cost insert/delete/substitute distance at byte granularity.
std::size_t levenshtein(std::string_view a, std::string_view b);

struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<std::size_t> offsets;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Word runs ([A-Za-z0-9_] and non-ASCII bytes) and single punctuation characters;
/// whitespace separates tokens and is dropped.
TokenSeq tokenize(std::string_view text);

/// Tokens joined by single spaces.
std::string detokenize(const TokenSeq& seq);

/// Sorted, unique hashes of the w-token shingles of `text`. A text with fewer than
/// w tokens (but at least one) contributes a single shingle covering all its tokens.
std::vector<std::uint64_t> shingle_set(std::string_view text, std::size_t w);

double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

/// Jaccard similarity of w-token shingle sets; 1.0 when both sets are empty.
double jaccard_shingle(std::string_view a, std::string_view b, std::size_t w = 5);

struct SyntaxVerdict {
  bool ok = true;
  std::string reason;

  static SyntaxVerdict pass() { return {}; }
  static SyntaxVerdict violation(std::string why) { return {false, std::move(why)}; }
};

using SyntaxChecker = std::function<SyntaxVerdict(std::string_view)>;

/// Language-agnostic default: balanced brackets and quotes outside comments, and
/// dedents that return to a previously opened indentation level.
SyntaxVerdict heuristic_syntax_check(std::string_view text, const CommentSyntax& syntax = {});

}  // namespace fdi
