#include "fdi/scenario.hpp"

#include <fmt/format.h>

#include "fdi/util.hpp"

namespace fdi {

SystemConfig SystemConfig::retrieval(FilterConfig filter) {
  SystemConfig c;
  c.kind = SystemKind::retrieval_augmented;
  c.filter = std::move(filter);
  return c;
}

SystemConfig SystemConfig::continual(FilterConfig filter) {
  SystemConfig c;
  c.kind = SystemKind::continual_learning;
  c.filter = std::move(filter);
  c.retriever.clear();
  return c;
}

void SystemConfig::validate() const {
  filter.validate();
  if (kind == SystemKind::retrieval_augmented) {
    if (retriever != "tfidf" && retriever != "embedder") {
      throw Error(ErrorKind::invalid_argument,
                  fmt::format("retrieval system needs a retriever (tfidf or embedder), got '{}'", retriever));
    }
    if (k == 0) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
  }
  if (max_tokens < 1) throw Error(ErrorKind::invalid_argument, "max_tokens must be >= 1");
}

// ---------------------------------------------------------------------------

RetrievalSystem::RetrievalSystem(SystemConfig cfg, std::shared_ptr<const Model> model, ExampleCorpus seed_corpus)
    : cfg_(std::move(cfg)), model_(std::move(model)), live_(std::move(seed_corpus)), pipeline_(cfg_.filter) {
  if (cfg_.kind != SystemKind::retrieval_augmented) {
    throw Error(ErrorKind::invalid_argument, "RetrievalSystem needs a retrieval_augmented config");
  }
  cfg_.validate();
  if (!model_) throw Error(ErrorKind::invalid_argument, "retrieval system needs a model");
  publish_locked();
}

void RetrievalSystem::publish_locked() {
  auto snap = std::make_shared<Snapshot>();
  snap->corpus = live_;
  snap->retriever = make_retriever(cfg_.retriever);
  snap->retriever->rebuild(snap->corpus);
  published_ = std::move(snap);
}

std::shared_ptr<const RetrievalSystem::Snapshot> RetrievalSystem::snapshot() const {
  std::shared_lock lock(mu_);
  return published_;
}

Prompt RetrievalSystem::prompt_for(std::string_view user_query) const {
  const auto snap = snapshot();
  std::vector<PromptExample> examples;
  if (!snap->corpus.empty()) {
    for (const RetrievalHit& h : snap->retriever->topk(snap->corpus, user_query, cfg_.k)) {
      const Example& e = snap->corpus.examples()[h.example];
      examples.push_back({e.query, e.code});
    }
  }
  return build_prompt(examples, user_query, cfg_.k);
}

std::string RetrievalSystem::query(std::string_view user_query, double temperature, std::uint64_t seed) {
  GenerationRequest req;
  req.prompt = prompt_for(user_query).rendered;
  req.temperature = temperature;
  req.max_tokens = cfg_.max_tokens;
  req.seed = seed;
  return model_->generate(req);
}

AdmissionDecision RetrievalSystem::submit_feedback(const FeedbackSample& sample) {
  std::unique_lock lock(mu_);
  const AdmissionDecision d = pipeline_.admit(sample, live_);
  if (d.admitted) {
    ++pending_;
    if (cfg_.update_policy.every_n_samples && pending_ >= cfg_.update_policy.every_n_samples) {
      publish_locked();
      pending_ = 0;
      ++version_;
    }
  }
  return d;
}

std::uint64_t RetrievalSystem::update() {
  std::unique_lock lock(mu_);
  if (pending_ > 0) publish_locked();
  pending_ = 0;
  return ++version_;
}

std::uint64_t RetrievalSystem::version() const {
  std::shared_lock lock(mu_);
  return version_;
}

std::size_t RetrievalSystem::pending() const {
  std::shared_lock lock(mu_);
  return pending_;
}

ExampleCorpus RetrievalSystem::published_corpus() const { return snapshot()->corpus; }

std::vector<AuditEntry> RetrievalSystem::audit_log() const {
  std::shared_lock lock(mu_);
  return pipeline_.audit_log();
}

// ---------------------------------------------------------------------------

ContinualSystem::ContinualSystem(SystemConfig cfg, ContinualConfig continual, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), pipeline_(cfg_.filter), trainer_([&] {
        continual.admission.reset();  // admission happens here, per submission
        return continual;
      }()) {
  if (cfg_.kind != SystemKind::continual_learning) {
    throw Error(ErrorKind::invalid_argument, "ContinualSystem needs a continual_learning config");
  }
  cfg_.validate();
  served_ = std::make_shared<ToyLM>(trainer_.model());
}

std::string ContinualSystem::query(std::string_view user_query, double temperature, std::uint64_t seed) {
  std::shared_ptr<const ToyLM> lm;
  {
    std::shared_lock lock(mu_);
    lm = served_;
  }
  if (lm->vocab_size() == 0) return {};
  GenerationRequest req;
  req.prompt = std::string(user_query);
  req.temperature = temperature;
  req.max_tokens = cfg_.max_tokens;
  req.seed = seed;
  return lm->generate(req);
}

AdmissionDecision ContinualSystem::submit_feedback(const FeedbackSample& sample) {
  bool roll = false;
  AdmissionDecision d;
  {
    std::unique_lock lock(mu_);
    d = pipeline_.admit(sample, live_);
    if (d.admitted) {
      queue_.push_back({sample.query_text, sample.code()});
      roll = cfg_.update_policy.every_n_samples && queue_.size() >= cfg_.update_policy.every_n_samples;
    }
  }
  if (roll) update();
  return d;
}

std::uint64_t ContinualSystem::update() {
  std::unique_lock lock(mu_);
  if (!queue_.empty()) {
    trainer_.train(queue_, derive_seed(seed_, fmt::format("update-{}", version_)));
    served_ = std::make_shared<ToyLM>(trainer_.model());
    queue_.clear();
  }
  return ++version_;
}

std::uint64_t ContinualSystem::version() const {
  std::shared_lock lock(mu_);
  return version_;
}

std::size_t ContinualSystem::pending() const {
  std::shared_lock lock(mu_);
  return queue_.size();
}

std::shared_ptr<const ToyLM> ContinualSystem::model() const {
  std::shared_lock lock(mu_);
  return served_;
}

}  // namespace fdi
