#include "fdi/codetext.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "fdi/error.hpp"
#include "fdi/util.hpp"

namespace fdi {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || u >= 0x80;
}

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

enum class CharClass : unsigned char { code, string, comment, newline };

/// Labels every byte as code, string literal, comment or newline, tracking
/// single- and triple-quoted literals. Reports unterminated quotes and a
/// single-quoted literal running into a newline.
struct Scan {
  std::vector<CharClass> classes;
  bool unterminated_quote = false;
};

Scan scan(std::string_view text, const CommentSyntax& syntax) {
  Scan out;
  out.classes.assign(text.size(), CharClass::code);
  char quote = 0;
  bool triple = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      out.classes[i] = CharClass::newline;
      if (quote != 0 && !triple) {
        out.unterminated_quote = true;
        quote = 0;
      }
      ++i;
      continue;
    }
    if (quote != 0) {
      out.classes[i] = CharClass::string;
      if (c == '\\' && i + 1 < text.size() && text[i + 1] != '\n') {
        out.classes[i + 1] = CharClass::string;
        i += 2;
        continue;
      }
      if (c == quote) {
        if (!triple) {
          quote = 0;
        } else if (i + 2 < text.size() && text[i + 1] == quote && text[i + 2] == quote) {
          out.classes[i + 1] = out.classes[i + 2] = CharClass::string;
          quote = 0;
          i += 3;
          continue;
        }
      }
      ++i;
      continue;
    }
    bool comment = false;
    for (const std::string& marker : syntax.line_markers) {
      if (!marker.empty() && text.substr(i).starts_with(marker)) {
        comment = true;
        break;
      }
    }
    if (comment) {
      while (i < text.size() && text[i] != '\n') out.classes[i++] = CharClass::comment;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
      triple = i + 2 < text.size() && text[i + 1] == c && text[i + 2] == c;
      const std::size_t len = triple ? 3 : 1;
      for (std::size_t k = 0; k < len; ++k) out.classes[i + k] = CharClass::string;
      i += len;
      continue;
    }
    ++i;
  }
  if (quote != 0) out.unterminated_quote = true;
  return out;
}

/// Counts the hex letters a-f that belong to 0x literals.
std::size_t hex_literal_letters(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i + 1 < text.size()) {
    const bool prefix = text[i] == '0' && (text[i + 1] == 'x' || text[i + 1] == 'X') &&
                        (i == 0 || !is_word(text[i - 1]));
    if (!prefix) {
      ++i;
      continue;
    }
    i += 2;
    while (i < text.size() && (is_hex(text[i]) || text[i] == '_')) {
      if (std::isalpha(static_cast<unsigned char>(text[i]))) ++count;
      ++i;
    }
  }
  return count;
}

}  // namespace

LineStats line_stats(std::string_view text, const CommentSyntax& syntax) {
  if (text.empty()) throw Error(ErrorKind::invalid_argument, "empty input");
  LineStats s;

  std::size_t total_line_chars = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::size_t len = end - start;
    const bool trailing_empty = end == text.size() && len == 0 && start > 0;
    if (!trailing_empty) {
      ++s.lines;
      total_line_chars += len;
      s.max_line_len = std::max(s.max_line_len, len);
    }
    start = end + 1;
  }
  s.avg_line_len = s.lines ? static_cast<double>(total_line_chars) / static_cast<double>(s.lines) : 0.0;

  std::size_t non_ws = 0;
  std::size_t digits = 0;
  std::size_t alpha = 0;
  for (char c : text) {
    if (is_space(c)) continue;
    ++non_ws;
    const auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u)) ++digits;
    if (u < 0x80 && std::isalpha(u)) ++alpha;
  }
  digits += hex_literal_letters(text);
  if (non_ws > 0) {
    s.digit_frac = static_cast<double>(digits) / static_cast<double>(non_ws);
    s.alpha_frac = static_cast<double>(alpha) / static_cast<double>(non_ws);
  }

  const Scan sc = scan(text, syntax);
  std::size_t code_chars = 0;
  for (CharClass k : sc.classes) {
    if (k == CharClass::comment) {
      ++s.comment_chars;
    } else if (k != CharClass::newline) {
      ++code_chars;
    }
  }
  if (code_chars > 0) {
    s.comment_ratio = static_cast<double>(s.comment_chars) / static_cast<double>(code_chars);
  } else {
    s.comment_ratio = s.comment_chars > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return s;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_word(c)) {
      while (i < text.size() && is_word(text[i])) ++i;
    } else {
      ++i;
    }
    seq.tokens.emplace_back(text.substr(start, i - start));
    seq.offsets.push_back(start);
  }
  return seq;
}

std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += seq.tokens[i];
  }
  return out;
}

std::vector<std::uint64_t> shingle_set(std::string_view text, std::size_t w) {
  if (w == 0) throw Error(ErrorKind::invalid_argument, "shingle width must be >= 1");
  const TokenSeq seq = tokenize(text);
  std::vector<std::uint64_t> out;
  if (seq.empty()) return out;
  const std::size_t span = std::min(w, seq.size());
  for (std::size_t i = 0; i + span <= seq.size(); ++i) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t k = 0; k < span; ++k) {
      h = fnv1a64(seq.tokens[i + k], h);
      h = fnv1a64("\x1f", h);
    }
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_shingle(std::string_view a, std::string_view b, std::size_t w) {
  return jaccard(shingle_set(a, w), shingle_set(b, w));
}

SyntaxVerdict heuristic_syntax_check(std::string_view text, const CommentSyntax& syntax) {
  const Scan sc = scan(text, syntax);
  if (sc.unterminated_quote) return SyntaxVerdict::violation("unbalanced quote");

  std::vector<char> brackets;
  std::vector<std::size_t> indents{0};
  bool at_line_start = true;
  std::size_t indent = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const CharClass k = sc.classes[i];
    if (k == CharClass::newline) {
      at_line_start = true;
      indent = 0;
      continue;
    }
    if (at_line_start) {
      if (c == ' ' || c == '\t') {
        ++indent;
        continue;
      }
      if (c == '\r' || k == CharClass::comment) {
        // blank or comment-only line: indentation is irrelevant
        at_line_start = false;
        continue;
      }
      at_line_start = false;
      // continuation lines inside open brackets or strings keep free indentation
      if (brackets.empty() && k == CharClass::code) {
        if (indent > indents.back()) {
          indents.push_back(indent);
        } else {
          while (indent < indents.back()) indents.pop_back();
          if (indent != indents.back()) return SyntaxVerdict::violation("inconsistent indent");
        }
      }
    }
    if (k != CharClass::code) continue;
    switch (c) {
      case '(': case '[': case '{':
        brackets.push_back(c);
        break;
      case ')': case ']': case '}': {
        const char open = c == ')' ? '(' : (c == ']' ? '[' : '{');
        if (brackets.empty() || brackets.back() != open) {
          return SyntaxVerdict::violation("unbalanced delimiter");
        }
        brackets.pop_back();
        break;
      }
      default:
        break;
    }
  }
  if (!brackets.empty()) return SyntaxVerdict::violation("unbalanced delimiter");
  return SyntaxVerdict::pass();
}

}  // namespace fdi
