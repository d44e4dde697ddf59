#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "fdi/codetext.hpp"
#include "fdi/error.hpp"

namespace fdi {
namespace {

// Full-matrix Wagner-Fischer, kept separate from the two-row library version.
std::size_t levenshtein_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return d[a.size()][b.size()];
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len, const std::string& alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (char& c : s) c = alphabet[pick(rng)];
  return s;
}

TEST(LineStats, TwoShortLines) {
  const auto s = line_stats("ab\ncd");
  EXPECT_DOUBLE_EQ(s.avg_line_len, 2.0);
  EXPECT_EQ(s.max_line_len, 2u);
  EXPECT_DOUBLE_EQ(s.digit_frac, 0.0);
  EXPECT_DOUBLE_EQ(s.alpha_frac, 1.0);
  EXPECT_EQ(s.lines, 2u);
}

TEST(LineStats, CommentRatioByHandCount) {
  const auto s = line_stats("x=1 # note");
  EXPECT_EQ(s.comment_chars, 6u);
  EXPECT_DOUBLE_EQ(s.comment_ratio, 6.0 / 4.0);
}

TEST(LineStats, HashInsideStringIsNotAComment) {
  const auto s = line_stats("s = '#x'");
  EXPECT_EQ(s.comment_chars, 0u);
}

TEST(LineStats, TenLongLines) {
  std::string text;
  for (int i = 0; i < 10; ++i) text += std::string(150, 'a') + "\n";
  const auto s = line_stats(text);
  EXPECT_DOUBLE_EQ(s.avg_line_len, 150.0);
  EXPECT_EQ(s.max_line_len, 150u);
  EXPECT_EQ(s.lines, 10u);
}

TEST(LineStats, HexLettersCountOnlyInsideLiterals) {
  // non-whitespace: "x=0xff" (6) -> digits 0, f, f plus the leading 0
  const auto s = line_stats("x=0xff");
  EXPECT_DOUBLE_EQ(s.digit_frac, 3.0 / 6.0);
  const auto t = line_stats("face=bead");
  EXPECT_DOUBLE_EQ(t.digit_frac, 0.0);
}

TEST(LineStats, EmptyInputThrows) {
  try {
    (void)line_stats("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "empty input");
  }
}

TEST(LineStats, FractionInvariantsOnRandomText) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    std::string t = random_text(rng, 120, "ab1F9 _#()\n'x=.");
    if (t.empty()) continue;
    const auto s = line_stats(t);
    EXPECT_GE(s.digit_frac, 0.0);
    EXPECT_GE(s.alpha_frac, 0.0);
    EXPECT_LE(s.digit_frac + s.alpha_frac, 1.0 + 1e-12) << t;
    EXPECT_GE(static_cast<double>(s.max_line_len), s.avg_line_len);
    EXPECT_GE(s.comment_ratio, 0.0);
  }
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("", "abcd"), 4u);
}

TEST(Levenshtein, MatchesOracleAndIsAMetric) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 400; ++i) {
    const auto a = random_text(rng, 14, "abc");
    const auto b = random_text(rng, 14, "abc");
    const auto c = random_text(rng, 14, "abc");
    const auto ab = levenshtein(a, b);
    ASSERT_EQ(ab, levenshtein_oracle(a, b)) << a << " / " << b;
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(levenshtein(a, c), ab + levenshtein(b, c));
  }
}

TEST(Tokenize, SplitsPunctuation) {
  const auto seq = tokenize("a=b");
  EXPECT_EQ(seq.tokens, (std::vector<std::string>{"a", "=", "b"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Tokenize, OffsetsResliceOriginal) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    const auto t = random_text(rng, 60, "ab_9 \n.(=)\"");
    const auto seq = tokenize(t);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      EXPECT_EQ(t.substr(seq.offsets[k], seq.tokens[k].size()), seq.tokens[k]);
      if (k) EXPECT_GT(seq.offsets[k], seq.offsets[k - 1]);
    }
    EXPECT_EQ(detokenize(tokenize(detokenize(seq))), detokenize(seq));
  }
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(jaccard_shingle("x = df.head()", "x = df.head()"), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_shingle("alpha beta gamma", "one two three"), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_shingle("p q r s", "p q r t", 2), 0.5);
  EXPECT_DOUBLE_EQ(jaccard_shingle("", "", 3), 1.0);
}

TEST(Jaccard, RangeSymmetryAndIdentity) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_text(rng, 40, "ab c d ");
    const auto b = random_text(rng, 40, "ab c d ");
    const double j = jaccard_shingle(a, b, 3);
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_DOUBLE_EQ(j, jaccard_shingle(b, a, 3));
    EXPECT_EQ(j == 1.0, shingle_set(a, 3) == shingle_set(b, 3));
  }
}

TEST(Jaccard, ShortTextIsOneShingle) {
  EXPECT_EQ(shingle_set("a b", 5).size(), 1u);
  EXPECT_THROW((void)shingle_set("a", 0), Error);
}

TEST(SyntaxCheck, Examples) {
  EXPECT_TRUE(heuristic_syntax_check("print(1)").ok);
  const auto v = heuristic_syntax_check("print(1");
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.reason, "unbalanced delimiter");
  const auto w = heuristic_syntax_check("if x:\n  y\n z");
  EXPECT_FALSE(w.ok);
  EXPECT_EQ(w.reason, "inconsistent indent");
  EXPECT_EQ(heuristic_syntax_check("s = 'abc").reason, "unbalanced quote");
}

TEST(SyntaxCheck, CommentsAndStringsAreIgnored) {
  EXPECT_TRUE(heuristic_syntax_check("x = f(1)  # (unclosed").ok);
  EXPECT_TRUE(heuristic_syntax_check("s = \"(\"").ok);
  EXPECT_TRUE(heuristic_syntax_check("def f():\n    if a:\n        b\n    c\nd").ok);
  EXPECT_TRUE(heuristic_syntax_check("x = f(1,\n         2)").ok);
}

}  // namespace
}  // namespace fdi
