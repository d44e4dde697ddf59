#include "fdi/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "fdi/error.hpp"
#include "fdi/kernels.hpp"
#include "fdi/util.hpp"

namespace fdi {

std::vector<std::string> tfidf_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      terms.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

double dot(const TermVector& a, const TermVector& b) {
  double sum = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    const int cmp = ia->term.compare(ib->term);
    if (cmp < 0) {
      ++ia;
    } else if (cmp > 0) {
      ++ib;
    } else {
      sum += ia->weight * ib->weight;
      ++ia;
      ++ib;
    }
  }
  return sum;
}

namespace {

double clamp_cosine(double c) { return std::clamp(c, 0.0, 1.0); }

bool hit_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.example < b.example;
}

std::vector<RetrievalHit> take_topk(std::vector<RetrievalHit> hits, std::size_t k) {
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
  hits.resize(n);
  return hits;
}

}  // namespace

TfIdfIndex TfIdfIndex::build(const ExampleCorpus& corpus) {
  std::vector<std::string> docs;
  docs.reserve(corpus.size());
  for (const Example& e : corpus.examples()) docs.push_back(e.query);
  return build(docs, corpus.version());
}

TfIdfIndex TfIdfIndex::build(std::span<const std::string> documents, std::uint64_t version) {
  TfIdfIndex index;
  index.corpus_version_ = version;
  std::map<std::string, std::size_t> df;
  std::vector<std::vector<std::string>> doc_terms;
  doc_terms.reserve(documents.size());
  for (const std::string& doc : documents) {
    auto terms = tfidf_terms(doc);
    std::vector<std::string> uniq = terms;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) ++df[t];
    doc_terms.push_back(std::move(terms));
  }
  const double n = static_cast<double>(documents.size());
  index.vocab_.reserve(df.size());
  index.idf_.reserve(df.size());
  for (const auto& [term, count] : df) {
    index.vocab_.push_back(term);
    index.idf_.push_back(std::log((n + 1.0) / (static_cast<double>(count) + 1.0)) + 1.0);
  }
  index.doc_vectors_.reserve(documents.size());
  for (const std::string& doc : documents) index.doc_vectors_.push_back(index.vectorize(doc));
  return index;
}

long TfIdfIndex::column(std::string_view term) const {
  auto it = std::lower_bound(vocab_.begin(), vocab_.end(), term,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == vocab_.end() || *it != term) return -1;
  return static_cast<long>(it - vocab_.begin());
}

double TfIdfIndex::idf(std::string_view term) const {
  const long col = column(term);
  if (col >= 0) return idf_[static_cast<std::size_t>(col)];
  return std::log(static_cast<double>(num_docs()) + 1.0) + 1.0;
}

TermVector TfIdfIndex::vectorize(std::string_view text) const {
  std::map<std::string, std::size_t> tf;
  for (auto& t : tfidf_terms(text)) ++tf[std::move(t)];
  TermVector v;
  v.reserve(tf.size());
  double sq = 0.0;
  for (const auto& [term, count] : tf) {
    const double w = static_cast<double>(count) * idf(term);
    sq += w * w;
    v.push_back({term, w});
  }
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (auto& e : v) e.weight /= norm;
  }
  return v;
}

double TfIdfIndex::similarity(std::string_view a, std::string_view b) const {
  return clamp_cosine(dot(vectorize(a), vectorize(b)));
}

Matrix TfIdfIndex::dense_documents() const {
  Matrix m(doc_vectors_.size(), vocab_.size());
  for (std::size_t i = 0; i < doc_vectors_.size(); ++i) {
    for (const auto& e : doc_vectors_[i]) {
      const long col = column(e.term);
      if (col >= 0) m(i, static_cast<std::size_t>(col)) = e.weight;
    }
  }
  return m;
}

std::vector<RetrievalHit> retrieve_topk(const TfIdfIndex& index, const ExampleCorpus& corpus,
                                        std::string_view query, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
  if (index.corpus_version() != corpus.version() || index.num_docs() != corpus.size()) {
    throw Error(ErrorKind::stale_index,
                fmt::format("stale index (index v{}, corpus v{})", index.corpus_version(),
                            corpus.version()));
  }
  const TermVector q = index.vectorize(query);
  std::vector<RetrievalHit> hits;
  hits.reserve(index.num_docs());
  for (std::size_t i = 0; i < index.num_docs(); ++i) {
    hits.push_back({i, clamp_cosine(dot(q, index.doc_vector(i)))});
  }
  return take_topk(std::move(hits), k);
}

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dimension, std::size_t n)
    : dimension_(dimension), n_(n) {
  if (dimension_ == 0 || n_ == 0) {
    throw Error(ErrorKind::invalid_argument, "embedder dimension and n must be positive");
  }
}

std::vector<double> HashedNgramEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  std::string padded = " ";
  for (char c : normalize_whitespace(text)) {
    padded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  padded.push_back(' ');
  const std::string_view p = padded;
  const std::size_t n = std::min(n_, p.size());
  for (std::size_t i = 0; i + n <= p.size(); ++i) {
    v[fnv1a64(p.substr(i, n)) % dimension_] += 1.0;
  }
  kernels::normalize(v);
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = kernels::norm(a);
  const double nb = kernels::norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return kernels::dot(a, b) / (na * nb);
}

EmbeddingRetriever::EmbeddingRetriever(std::shared_ptr<const Embedder> embedder)
    : embedder_(std::move(embedder)) {}

void EmbeddingRetriever::rebuild(const ExampleCorpus& corpus) {
  embeddings_ = Matrix(corpus.size(), embedder_->dimension());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto v = embedder_->embed(corpus.examples()[i].query);
    std::copy(v.begin(), v.end(), embeddings_.row(i).begin());
  }
  corpus_version_ = corpus.version();
}

std::vector<RetrievalHit> EmbeddingRetriever::topk(const ExampleCorpus& corpus,
                                                   std::string_view query, std::size_t k) const {
  if (k == 0) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
  if (corpus_version_ != corpus.version() || embeddings_.rows() != corpus.size()) {
    throw Error(ErrorKind::stale_index, "stale embedding index");
  }
  const auto q = embedder_->embed(query);
  std::vector<RetrievalHit> hits;
  hits.reserve(embeddings_.rows());
  for (std::size_t i = 0; i < embeddings_.rows(); ++i) {
    hits.push_back({i, std::clamp(kernels::dot(q, embeddings_.row(i)), 0.0, 1.0)});
  }
  return take_topk(std::move(hits), k);
}

std::unique_ptr<Retriever> make_retriever(std::string_view kind) {
  if (kind == "tfidf") return std::make_unique<TfIdfRetriever>();
  if (kind == "embedder") return std::make_unique<EmbeddingRetriever>();
  throw Error(ErrorKind::invalid_argument, fmt::format("unknown retriever '{}'", kind));
}

Prompt build_prompt(std::span<const PromptExample> examples, std::string_view user_query,
                    std::size_t k) {
  if (examples.size() > k) {
    throw Error(ErrorKind::invalid_argument,
                fmt::format("{} examples exceed k={}", examples.size(), k));
  }
  Prompt p;
  p.examples.assign(examples.begin(), examples.end());
  p.user_query = std::string(user_query);
  std::size_t i = 1;
  for (const auto& e : examples) {
    p.rendered += fmt::format("Q{}: {}\nA{}: {}\n", i, e.query, i, e.answer);
    ++i;
  }
  p.rendered += fmt::format("Q{}: {}", i, user_query);
  return p;
}

Prompt parse_prompt(std::string_view text) {
  Prompt p;
  p.rendered = std::string(text);
  std::size_t i = 1;
  std::string q_marker = "Q1: ";
  if (!text.starts_with(q_marker)) throw Error(ErrorKind::parse, "prompt does not start with Q1:");
  std::size_t pos = q_marker.size();
  while (true) {
    const std::string a_marker = fmt::format("\nA{}: ", i);
    const std::size_t a_at = text.find(a_marker, pos);
    if (a_at == std::string_view::npos) {
      p.user_query = std::string(text.substr(pos));
      return p;
    }
    PromptExample ex;
    ex.query = std::string(text.substr(pos, a_at - pos));
    const std::size_t answer_start = a_at + a_marker.size();
    const std::string next_q = fmt::format("\nQ{}: ", i + 1);
    const std::size_t q_at = text.find(next_q, answer_start);
    if (q_at == std::string_view::npos) {
      throw Error(ErrorKind::parse, fmt::format("answer A{} is not followed by Q{}", i, i + 1));
    }
    ex.answer = std::string(text.substr(answer_start, q_at - answer_start));
    p.examples.push_back(std::move(ex));
    ++i;
    pos = q_at + next_q.size();
  }
}

}  // namespace fdi
