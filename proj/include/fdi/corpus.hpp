#pragma once

// Queries, feedback samples, the retrieval example corpus and the streaming
// subsets used to simulate feedback arriving over time.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fdi/error.hpp"

namespace fdi {

enum class Origin { benign, attacker, probe };
enum class Reaction { accept, dismiss, revise };

const char* to_string(Origin origin) noexcept;
const char* to_string(Reaction reaction) noexcept;
Origin origin_from_string(std::string_view s);
Reaction reaction_from_string(std::string_view s);

struct Query {
  std::string id;
  std::string text;
  Origin origin = Origin::benign;
  std::string account_id;
};

/// One (query, suggestion, reaction) triple submitted through the feedback channel.
struct FeedbackSample {
  std::string query_text;
  std::string suggestion_text;
  std::string revised_text;
  Reaction reaction = Reaction::accept;
  std::string account_id;
  int round = 0;
  Origin origin = Origin::benign;

  static FeedbackSample accepted(std::string query, std::string suggestion, std::string account,
                                 int round = 0);
  /// Reaction is `revise` unless the revision equals the suggestion, in which case it is `accept`.
  static FeedbackSample revised(std::string query, std::string suggestion, std::string revision,
                                std::string account, int round = 0);

  /// The code the user ends up with: the revision for revise/accept, empty when dismissed.
  const std::string& code() const noexcept { return revised_text; }

  /// Throws invalid_argument when the reaction/revision invariants do not hold.
  void check_invariants() const;

  std::uint64_t content_hash() const noexcept;
};

/// Content hash plus insertion counter, so exact duplicates stay distinguishable.
struct SampleId {
  std::uint64_t content_hash = 0;
  std::uint64_t seq = 0;
  friend bool operator==(const SampleId&, const SampleId&) = default;
};

struct Example {
  std::string query;
  std::string code;
  Origin origin = Origin::benign;
  std::string account;
  int round = 0;
  SampleId id;

  friend bool operator==(const Example& a, const Example& b) {
    return a.query == b.query && a.code == b.code && a.origin == b.origin &&
           a.account == b.account && a.round == b.round;
  }
};

/// Ordered (query, code) examples searched by the retriever. Every mutation bumps `version`.
class ExampleCorpus {
 public:
  ExampleCorpus() = default;

  /// Returns false (and leaves the corpus untouched) if the exact (query, code) pair exists.
  bool add(Example example);
  bool contains(std::string_view query, std::string_view code) const;

  /// Marks a system update that did not add examples.
  void bump_version() noexcept { ++version_; }

  const std::vector<Example>& examples() const noexcept { return examples_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  std::uint64_t version() const noexcept { return version_; }

  friend bool operator==(const ExampleCorpus& a, const ExampleCorpus& b) {
    return a.version_ == b.version_ && a.examples_ == b.examples_;
  }

  // Serialization: a header line {"version":N} followed by one record per
  // example with exactly the keys code, query, origin, account, round.
  std::string serialize() const;
  static ExampleCorpus parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ExampleCorpus load(const std::filesystem::path& path);

 private:
  static std::uint64_t pair_key(std::string_view query, std::string_view code) noexcept;

  std::vector<Example> examples_;
  std::unordered_set<std::uint64_t> keys_;
  std::uint64_t version_ = 0;
  std::uint64_t next_seq_ = 0;
};

/// Fixed-order sequence of disjoint sample collections, consumed one per round.
template <class T>
struct SubsetStream {
  std::vector<std::vector<T>> subsets;
  std::size_t cursor = 0;

  bool exhausted() const noexcept { return cursor >= subsets.size(); }

  const std::vector<T>& next() {
    if (exhausted()) throw Error(ErrorKind::exhausted_stream, "subset stream exhausted");
    return subsets[cursor++];
  }
};

/// Shuffles `samples` with `seed` and cuts them into `k` parts whose sizes differ
/// by at most one; the remainder goes to the earliest parts.
template <class T>
SubsetStream<T> split_stream(std::vector<T> samples, std::size_t k, std::uint64_t seed) {
  if (samples.empty()) throw Error(ErrorKind::empty_dataset, "empty dataset");
  if (k == 0 || samples.size() < k) {
    throw Error(ErrorKind::invalid_argument, "split_stream needs 1 <= k <= |samples|");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SubsetStream<T> stream;
  stream.subsets.resize(k);
  const std::size_t base = samples.size() / k;
  const std::size_t extra = samples.size() % k;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    auto& out = stream.subsets[s];
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i) out.push_back(std::move(samples[order[pos++]]));
  }
  return stream;
}

struct SnippetSplit {
  std::string prefix;
  std::string completion;
};

/// Cuts `code` at a whitespace-token boundary strictly inside the snippet. The
/// whitespace separating the two tokens stays with the prefix.
SnippetSplit split_snippet(std::string_view code, std::uint64_t seed);

}  // namespace fdi
