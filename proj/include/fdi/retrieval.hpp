#pragma once

// Example retrieval for the retrieval-augmented system: a TF-IDF index over
// example queries, a pluggable dense embedder, and Q/A prompt assembly.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/corpus.hpp"
#include "fdi/matrix.hpp"

namespace fdi {

/// Lowercased ASCII alphanumeric word runs.
std::vector<std::string> tfidf_terms(std::string_view text);

struct WeightedTerm {
  std::string term;
  double weight = 0.0;
};

/// Unit-norm TF-IDF vector, entries sorted by term.
using TermVector = std::vector<WeightedTerm>;

double dot(const TermVector& a, const TermVector& b);

/// Smoothed TF-IDF over a fixed document list: idf = ln((N+1)/(df+1)) + 1, raw
/// term counts, L2-normalised vectors. Terms unseen at build time get df = 0.
class TfIdfIndex {
 public:
  TfIdfIndex() = default;

  /// Index over the example queries of `corpus`, stamped with its version.
  static TfIdfIndex build(const ExampleCorpus& corpus);
  static TfIdfIndex build(std::span<const std::string> documents, std::uint64_t version = 0);

  std::size_t num_docs() const noexcept { return doc_vectors_.size(); }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::uint64_t corpus_version() const noexcept { return corpus_version_; }

  /// Vocabulary in column order (lexicographic).
  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  /// Column of `term`, or -1.
  long column(std::string_view term) const;
  double idf(std::string_view term) const;

  TermVector vectorize(std::string_view text) const;
  const TermVector& doc_vector(std::size_t i) const { return doc_vectors_.at(i); }

  /// Cosine of the TF-IDF vectors of `a` and `b` under this index's weights.
  double similarity(std::string_view a, std::string_view b) const;

  /// Dense n_docs x vocab matrix of the (unit-norm) document vectors.
  Matrix dense_documents() const;

 private:
  std::vector<std::string> vocab_;
  std::vector<double> idf_;
  std::vector<TermVector> doc_vectors_;
  std::uint64_t corpus_version_ = 0;
};

struct RetrievalHit {
  std::size_t example = 0;  // position in the corpus
  double score = 0.0;
};

/// Highest-cosine examples, score-descending, ties to the older example.
/// Throws ErrorKind::stale_index when `index` was built for another corpus version.
std::vector<RetrievalHit> retrieve_topk(const TfIdfIndex& index, const ExampleCorpus& corpus,
                                        std::string_view query, std::size_t k);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  /// Unit-norm (or zero) dense vector.
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Hashed character n-gram frequencies over the lowercased, space-padded text.
class HashedNgramEmbedder final : public Embedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dimension = 256, std::size_t n = 3);

  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::size_t n_;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Common surface of the two retrievers so the system can swap them.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual const char* name() const = 0;
  virtual void rebuild(const ExampleCorpus& corpus) = 0;
  virtual std::vector<RetrievalHit> topk(const ExampleCorpus& corpus, std::string_view query,
                                         std::size_t k) const = 0;
};

class TfIdfRetriever final : public Retriever {
 public:
  const char* name() const override { return "tfidf"; }
  void rebuild(const ExampleCorpus& corpus) override { index_ = TfIdfIndex::build(corpus); }
  std::vector<RetrievalHit> topk(const ExampleCorpus& corpus, std::string_view query,
                                 std::size_t k) const override {
    return retrieve_topk(index_, corpus, query, k);
  }
  const TfIdfIndex& index() const noexcept { return index_; }

 private:
  TfIdfIndex index_;
};

class EmbeddingRetriever final : public Retriever {
 public:
  explicit EmbeddingRetriever(std::shared_ptr<const Embedder> embedder =
                                  std::make_shared<HashedNgramEmbedder>());

  const char* name() const override { return "embedder"; }
  void rebuild(const ExampleCorpus& corpus) override;
  std::vector<RetrievalHit> topk(const ExampleCorpus& corpus, std::string_view query,
                                 std::size_t k) const override;

 private:
  std::shared_ptr<const Embedder> embedder_;
  Matrix embeddings_;
  std::uint64_t corpus_version_ = 0;
};

std::unique_ptr<Retriever> make_retriever(std::string_view kind);

struct PromptExample {
  std::string query;
  std::string answer;
  friend bool operator==(const PromptExample&, const PromptExample&) = default;
};

/// Few-shot prompt: "Qi: ..." / "Ai: ..." blocks, then the user query as the
/// next numbered Q with no answer.
struct Prompt {
  std::vector<PromptExample> examples;
  std::string user_query;
  std::string rendered;
};

Prompt build_prompt(std::span<const PromptExample> examples, std::string_view user_query,
                    std::size_t k = 4);

/// Inverse of build_prompt. Throws ErrorKind::parse on text that is not a prompt.
Prompt parse_prompt(std::string_view rendered);

}  // namespace fdi
