#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fdi/corpus.hpp"
#include "fdi/error.hpp"

namespace fdi {
namespace {

Example ex(std::string q, std::string c, int round = 0) {
  Example e;
  e.query = std::move(q);
  e.code = std::move(c);
  e.round = round;
  return e;
}

TEST(FeedbackSample, RevisedEqualToSuggestionBecomesAccept) {
  auto s = FeedbackSample::revised("q", "df.head()", "df.head()", "acct");
  EXPECT_EQ(s.reaction, Reaction::accept);
  EXPECT_NO_THROW(s.check_invariants());
  auto r = FeedbackSample::revised("q", "df.head()", "df.tail()", "acct");
  EXPECT_EQ(r.reaction, Reaction::revise);
  EXPECT_EQ(r.code(), "df.tail()");
}

TEST(FeedbackSample, InvariantViolationsThrow) {
  FeedbackSample s = FeedbackSample::accepted("q", "a", "acct");
  s.revised_text = "b";
  EXPECT_THROW(s.check_invariants(), Error);
  s.reaction = Reaction::revise;
  s.revised_text = "a";
  EXPECT_THROW(s.check_invariants(), Error);
}

TEST(ExampleCorpus, RejectsExactDuplicatePairs) {
  ExampleCorpus c;
  EXPECT_TRUE(c.add(ex("q", "a")));
  const auto v = c.version();
  EXPECT_FALSE(c.add(ex("q", "a")));
  EXPECT_EQ(c.version(), v);
  EXPECT_TRUE(c.add(ex("q", "b")));
  EXPECT_GT(c.version(), v);
  EXPECT_TRUE(c.contains("q", "b"));
  EXPECT_FALSE(c.contains("q", "c"));
}

TEST(ExampleCorpus, VersionStrictlyMonotone) {
  ExampleCorpus c;
  std::uint64_t last = c.version();
  for (int i = 0; i < 50; ++i) {
    c.add(ex(fmt::format("q{}", i), "x"));
    EXPECT_GT(c.version(), last);
    last = c.version();
  }
  c.bump_version();
  EXPECT_GT(c.version(), last);
}

TEST(ExampleCorpus, EmptyRoundTripKeepsVersion) {
  ExampleCorpus c;
  c.bump_version();
  c.bump_version();
  const auto back = ExampleCorpus::parse(c.serialize());
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back.version(), 2u);
  EXPECT_EQ(back, c);
}

TEST(ExampleCorpus, LargeRoundTripIsByteIdentical) {
  ExampleCorpus c;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    Example e = ex(fmt::format("how to do thing {} \"quoted\"", i), fmt::format("x_{} = df[{}]\n", i, rng() % 97),
                   i % 5);
    e.origin = i % 7 == 0 ? Origin::attacker : Origin::benign;
    e.account = fmt::format("u{}", i % 13);
    c.add(std::move(e));
  }
  const std::string text = c.serialize();
  const auto back = ExampleCorpus::parse(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.serialize(), text);
}

TEST(ExampleCorpus, RecordsHaveExactlyTheFiveFields) {
  ExampleCorpus c;
  c.add(ex("q", "a"));
  const std::string text = c.serialize();
  const std::string record = text.substr(text.find('\n') + 1);
  EXPECT_EQ(record, "{\"account\":\"\",\"code\":\"a\",\"origin\":\"benign\",\"query\":\"q\",\"round\":0}\n");
}

TEST(ExampleCorpus, TruncatedFileIsAParseErrorWithLine) {
  ExampleCorpus c;
  c.add(ex("q1", "a"));
  c.add(ex("q2", "b"));
  std::string text = c.serialize();
  text.resize(text.size() - 5);
  try {
    (void)ExampleCorpus::parse(text);
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ExampleCorpus, SaveLoadThroughFile) {
  ExampleCorpus c;
  c.add(ex("q", "print(1)"));
  const auto path = std::filesystem::temp_directory_path() / "fdi_corpus_test.jsonl";
  c.save(path);
  EXPECT_EQ(ExampleCorpus::load(path), c);
  std::filesystem::remove(path);
  EXPECT_THROW((void)ExampleCorpus::load(path), Error);
}

TEST(SplitStream, PartitionsExactlyWithBalancedSizes) {
  for (std::size_t n : {10u, 11u, 97u, 1000u}) {
    for (std::size_t k : {1u, 3u, 5u, 10u}) {
      std::vector<int> items(n);
      std::iota(items.begin(), items.end(), 0);
      auto stream = split_stream(items, k, 42 + n);
      ASSERT_EQ(stream.subsets.size(), k);
      std::multiset<int> seen;
      std::size_t lo = n, hi = 0;
      for (const auto& s : stream.subsets) {
        lo = std::min(lo, s.size());
        hi = std::max(hi, s.size());
        seen.insert(s.begin(), s.end());
      }
      EXPECT_LE(hi - lo, 1u);
      EXPECT_EQ(seen, std::multiset<int>(items.begin(), items.end()));
    }
  }
}

TEST(SplitStream, ExhaustionAndBadArguments) {
  auto stream = split_stream(std::vector<int>{1, 2, 3}, 3, 1);
  for (int i = 0; i < 3; ++i) stream.next();
  EXPECT_TRUE(stream.exhausted());
  EXPECT_THROW(stream.next(), Error);
  EXPECT_THROW(split_stream(std::vector<int>{}, 1, 1), Error);
  EXPECT_THROW(split_stream(std::vector<int>{1}, 2, 1), Error);
}

TEST(SplitSnippet, HalvesNonEmptyAndConcatenate) {
  const std::vector<std::string> codes = {"a b", "x = df.head()\nprint(x)", "  lead  trail  ",
                                          "def f(a):\n    return a + 1\n"};
  for (const auto& code : codes) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto s = split_snippet(code, seed);
      EXPECT_FALSE(s.prefix.empty());
      EXPECT_FALSE(s.completion.empty());
      EXPECT_EQ(s.prefix + s.completion, code);
      EXPECT_FALSE(std::isspace(static_cast<unsigned char>(s.completion.front())));
    }
  }
}

TEST(SplitSnippet, SingleTokenIsUnsplittable) {
  try {
    (void)split_snippet("  token  ", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsplittable);
  }
}

}  // namespace
}  // namespace fdi
