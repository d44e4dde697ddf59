#pragma once

// The two target systems: a retrieval-augmented suggester whose example corpus
// grows from feedback, and a completion model fine-tuned on feedback.

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fdi/continual.hpp"
#include "fdi/filters.hpp"
#include "fdi/model.hpp"
#include "fdi/retrieval.hpp"
#include "fdi/system.hpp"

namespace fdi {

enum class SystemKind { retrieval_augmented, continual_learning };

struct UpdatePolicy {
  /// 0 = update only on an explicit update() call; n > 0 = also after every n admissions.
  std::size_t every_n_samples = 0;
};

struct SystemConfig {
  SystemKind kind = SystemKind::retrieval_augmented;
  FilterConfig filter = FilterConfig::retrieval_profile();
  std::string retriever = "tfidf";
  std::size_t k = 4;
  UpdatePolicy update_policy;
  int max_tokens = 32;

  static SystemConfig retrieval(FilterConfig filter = FilterConfig::retrieval_profile());
  static SystemConfig continual(FilterConfig filter = FilterConfig::continual_profile());
  void validate() const;
};

/// Queries run against an immutable published snapshot; feedback lands in a
/// live corpus that becomes visible on update().
class RetrievalSystem final : public TargetSystem {
 public:
  RetrievalSystem(SystemConfig cfg, std::shared_ptr<const Model> model, ExampleCorpus seed_corpus = {});

  std::string query(std::string_view user_query, double temperature, std::uint64_t seed) override;
  AdmissionDecision submit_feedback(const FeedbackSample& sample) override;
  std::uint64_t update() override;
  std::uint64_t version() const override;

  /// The prompt a query would be answered with.
  Prompt prompt_for(std::string_view user_query) const;
  std::size_t pending() const;
  ExampleCorpus published_corpus() const;
  std::vector<AuditEntry> audit_log() const;

 private:
  struct Snapshot {
    ExampleCorpus corpus;
    std::unique_ptr<Retriever> retriever;
  };
  std::shared_ptr<const Snapshot> snapshot() const;
  void publish_locked();

  SystemConfig cfg_;
  std::shared_ptr<const Model> model_;
  mutable std::shared_mutex mu_;
  ExampleCorpus live_;
  AdmissionPipeline pipeline_;
  std::shared_ptr<const Snapshot> published_;
  std::size_t pending_ = 0;
  std::uint64_t version_ = 0;
};

/// Admitted (prefix, completion) feedback waits in a queue until update()
/// fine-tunes a copy of the model on it plus replay.
class ContinualSystem final : public TargetSystem {
 public:
  ContinualSystem(SystemConfig cfg, ContinualConfig continual = {}, std::uint64_t seed = 0);

  std::string query(std::string_view user_query, double temperature, std::uint64_t seed) override;
  AdmissionDecision submit_feedback(const FeedbackSample& sample) override;
  std::uint64_t update() override;
  std::uint64_t version() const override;

  std::size_t pending() const;
  /// Snapshot of the served model.
  std::shared_ptr<const ToyLM> model() const;

 private:
  SystemConfig cfg_;
  std::uint64_t seed_;
  mutable std::shared_mutex mu_;
  ExampleCorpus live_;
  AdmissionPipeline pipeline_;
  std::vector<SnippetSplit> queue_;
  ContinualTrainer trainer_;
  std::shared_ptr<const ToyLM> served_;
  std::uint64_t version_ = 0;
};

}  // namespace fdi
