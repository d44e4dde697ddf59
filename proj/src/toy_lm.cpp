#include "fdi/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

namespace fdi {

namespace {

constexpr ToyLM::TokenId kUnknown = std::numeric_limits<ToyLM::TokenId>::max();
constexpr double kPruneBelow = 1e-9;

}  // namespace

ToyLM::ToyLM(ToyLMConfig config) : config_(config) {
  if (config_.order == 0) throw Error(ErrorKind::invalid_argument, "n-gram order must be >= 1");
  if (!(config_.decay > 0.0 && config_.decay <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "decay must be in (0, 1]");
  }
  tables_.resize(config_.order + 1);
}

std::vector<std::string> ToyLM::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (char c : text) {
    if (c == '\n') {
      flush();
      if (!out.empty() && out.back() != kNewline) out.emplace_back(kNewline);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string ToyLM::detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (t == kNewline) {
      out.push_back('\n');
      continue;
    }
    if (!out.empty() && out.back() != '\n') out.push_back(' ');
    out += t;
  }
  return out;
}

ToyLM::TokenId ToyLM::intern(const std::string& token) {
  auto [it, inserted] = token_to_id_.try_emplace(token, static_cast<TokenId>(id_to_token_.size()));
  if (inserted) id_to_token_.push_back(token);
  return it->second;
}

std::optional<ToyLM::TokenId> ToyLM::lookup(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

std::string ToyLM::context_key(std::span<const TokenId> ids) {
  return std::string(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(TokenId));
}

std::vector<ToyLM::TokenId> ToyLM::to_ids(std::span<const std::string> tokens, bool* all_known) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  bool known = true;
  for (const auto& t : tokens) {
    auto id = lookup(t);
    known = known && id.has_value();
    ids.push_back(id.value_or(kUnknown));
  }
  if (all_known) *all_known = known;
  return ids;
}

void ToyLM::observe(std::span<const std::string> tokens, double weight) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& t : tokens) ids.push_back(intern(t));
  ids.push_back(intern(std::string(kEnd)));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t len = 0; len <= config_.order && len <= i; ++len) {
      const std::span<const TokenId> ctx(ids.data() + i - len, len);
      Continuations& c = tables_[len][context_key(ctx)];
      c.total += weight;
      auto it = std::find_if(c.next.begin(), c.next.end(), [&](const auto& p) { return p.first == ids[i]; });
      if (it == c.next.end()) {
        c.next.emplace_back(ids[i], weight);
      } else {
        it->second += weight;
      }
    }
  }
}

void ToyLM::fine_tune(std::span<const SnippetSplit> samples) {
  if (samples.empty()) throw Error(ErrorKind::invalid_argument, "fine_tune needs at least one sample");
  if (config_.decay < 1.0) {
    for (auto& table : tables_) {
      for (auto it = table.begin(); it != table.end();) {
        Continuations& c = it->second;
        c.total = 0.0;
        for (auto& p : c.next) p.second *= config_.decay;
        std::erase_if(c.next, [](const auto& p) { return p.second < kPruneBelow; });
        for (const auto& p : c.next) c.total += p.second;
        it = c.next.empty() ? table.erase(it) : std::next(it);
      }
    }
  }
  for (const SnippetSplit& s : samples) {
    auto tokens = tokenize(s.prefix);
    auto tail = tokenize(s.completion);
    if (!tokens.empty() && !tail.empty() && tokens.back() == kNewline && tail.front() == kNewline) {
      tail.erase(tail.begin());
    }
    tokens.insert(tokens.end(), tail.begin(), tail.end());
    observe(tokens);
  }
}

const ToyLM::Continuations* ToyLM::longest_match(std::span<const TokenId> context) const {
  const std::size_t max_len = std::min(config_.order, context.size());
  for (std::size_t len = max_len + 1; len-- > 0;) {
    const auto ctx = context.subspan(context.size() - len, len);
    if (std::find(ctx.begin(), ctx.end(), kUnknown) != ctx.end()) continue;
    auto it = tables_[len].find(context_key(ctx));
    if (it != tables_[len].end() && it->second.total > 0.0) return &it->second;
  }
  return nullptr;
}

namespace {

/// Tempered weights c^(1/T), computed in log space relative to the max count.
std::vector<double> tempered(const std::vector<double>& counts, double temperature) {
  const double cmax = *std::max_element(counts.begin(), counts.end());
  std::vector<double> w(counts.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w[i] = counts[i] > 0.0 ? std::exp((std::log(counts[i]) - std::log(cmax)) / temperature) : 0.0;
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

std::vector<std::pair<std::string, double>> ToyLM::next_distribution(
    std::span<const std::string> context, double temperature) const {
  std::vector<std::pair<std::string, double>> out;
  if (id_to_token_.empty()) return out;
  const auto ids = to_ids(context);
  std::vector<TokenId> cand;
  std::vector<double> counts;
  if (const Continuations* c = longest_match(ids)) {
    for (const auto& [id, cnt] : c->next) {
      cand.push_back(id);
      counts.push_back(cnt);
    }
  } else {
    for (TokenId id = 0; id < id_to_token_.size(); ++id) {
      cand.push_back(id);
      counts.push_back(1.0);
    }
  }
  if (temperature <= kGreedyTemperature) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < cand.size(); ++i) {
      if (counts[i] > counts[best] || (counts[i] == counts[best] && cand[i] < cand[best])) best = i;
    }
    out.emplace_back(id_to_token_[cand[best]], 1.0);
    return out;
  }
  const auto w = tempered(counts, temperature);
  for (std::size_t i = 0; i < cand.size(); ++i) out.emplace_back(id_to_token_[cand[i]], w[i]);
  return out;
}

std::string ToyLM::generate(const GenerationRequest& request) const {
  if (id_to_token_.empty()) throw Error(ErrorKind::model, "toy model has no vocabulary");
  std::vector<std::string> prompt_tokens = tokenize(request.prompt);
  std::vector<TokenId> ids = to_ids(prompt_tokens);
  std::vector<std::string> generated;
  std::mt19937_64 rng(request.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool greedy = request.temperature <= kGreedyTemperature;

  std::vector<TokenId> cand;
  std::vector<double> counts;
  for (int step = 0; step < request.max_tokens; ++step) {
    cand.clear();
    counts.clear();
    if (const Continuations* c = longest_match(ids)) {
      for (const auto& [id, cnt] : c->next) {
        cand.push_back(id);
        counts.push_back(cnt);
      }
    } else {
      for (TokenId id = 0; id < id_to_token_.size(); ++id) {
        cand.push_back(id);
        counts.push_back(1.0);
      }
    }
    std::size_t pick = 0;
    if (greedy) {
      for (std::size_t i = 1; i < cand.size(); ++i) {
        if (counts[i] > counts[pick] || (counts[i] == counts[pick] && cand[i] < cand[pick])) pick = i;
      }
    } else {
      const auto w = tempered(counts, request.temperature);
      double u = unit(rng);
      pick = w.size() - 1;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (u < w[i]) {
          pick = i;
          break;
        }
        u -= w[i];
      }
    }
    const TokenId next = cand[pick];
    if (id_to_token_[next] == kEnd) break;
    ids.push_back(next);
    generated.push_back(id_to_token_[next]);
  }
  return detokenize(generated);
}

double ToyLM::count(std::span<const std::string> context, std::string_view token) const {
  if (context.size() > config_.order) return 0.0;
  bool known = false;
  const auto ids = to_ids(context, &known);
  const auto tid = lookup(token);
  if (!known || !tid) return 0.0;
  auto it = tables_[ids.size()].find(context_key(ids));
  if (it == tables_[ids.size()].end()) return 0.0;
  for (const auto& [id, c] : it->second.next) {
    if (id == *tid) return c;
  }
  return 0.0;
}

double ToyLM::score_ids(std::span<const TokenId> context, std::optional<TokenId> token) const {
  const double floor = 1.0 / static_cast<double>(id_to_token_.size() + 1);
  if (!token) return floor;
  double penalty = 1.0;
  const std::size_t max_len = std::min(config_.order, context.size());
  for (std::size_t len = max_len + 1; len-- > 0;) {
    const auto ctx = context.subspan(context.size() - len, len);
    if (std::find(ctx.begin(), ctx.end(), kUnknown) == ctx.end()) {
      auto it = tables_[len].find(context_key(ctx));
      if (it != tables_[len].end() && it->second.total > 0.0) {
        for (const auto& [id, c] : it->second.next) {
          if (id == *token) return std::max(floor, penalty * c / it->second.total);
        }
      }
    }
    penalty *= config_.backoff_penalty;
  }
  return floor;
}

double ToyLM::score(std::span<const std::string> context, std::string_view token) const {
  const auto ids = to_ids(context);
  return score_ids(ids, lookup(token));
}

double ToyLM::perplexity(std::span<const std::string> tokens) const {
  if (tokens.empty()) return 1.0;
  const auto ids = to_ids(tokens);
  double nll = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t start = i > config_.order ? i - config_.order : 0;
    const std::optional<TokenId> tok = ids[i] == kUnknown ? std::nullopt : std::optional<TokenId>(ids[i]);
    nll -= std::log(score_ids(std::span<const TokenId>(ids.data() + start, i - start), tok));
  }
  return std::exp(nll / static_cast<double>(ids.size()));
}

double ToyLM::surprisal(const SnippetSplit& sample) const {
  auto tokens = tokenize(sample.prefix);
  auto tail = tokenize(sample.completion);
  tokens.insert(tokens.end(), tail.begin(), tail.end());
  if (tokens.empty()) return 0.0;
  return std::log(perplexity(tokens));
}

}  // namespace fdi
