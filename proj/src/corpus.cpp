#include "fdi/corpus.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fdi/util.hpp"

namespace fdi {

using nlohmann::json;

const char* to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::benign: return "benign";
    case Origin::attacker: return "attacker";
    case Origin::probe: return "probe";
  }
  return "benign";
}

const char* to_string(Reaction reaction) noexcept {
  switch (reaction) {
    case Reaction::accept: return "accept";
    case Reaction::dismiss: return "dismiss";
    case Reaction::revise: return "revise";
  }
  return "accept";
}

Origin origin_from_string(std::string_view s) {
  if (s == "benign") return Origin::benign;
  if (s == "attacker") return Origin::attacker;
  if (s == "probe") return Origin::probe;
  throw Error(ErrorKind::parse, fmt::format("unknown origin '{}'", s));
}

Reaction reaction_from_string(std::string_view s) {
  if (s == "accept") return Reaction::accept;
  if (s == "dismiss") return Reaction::dismiss;
  if (s == "revise") return Reaction::revise;
  throw Error(ErrorKind::parse, fmt::format("unknown reaction '{}'", s));
}

FeedbackSample FeedbackSample::accepted(std::string query, std::string suggestion,
                                        std::string account, int round) {
  FeedbackSample s;
  s.query_text = std::move(query);
  s.revised_text = suggestion;
  s.suggestion_text = std::move(suggestion);
  s.reaction = Reaction::accept;
  s.account_id = std::move(account);
  s.round = round;
  return s;
}

FeedbackSample FeedbackSample::revised(std::string query, std::string suggestion,
                                       std::string revision, std::string account, int round) {
  FeedbackSample s;
  s.reaction = revision == suggestion ? Reaction::accept : Reaction::revise;
  s.query_text = std::move(query);
  s.suggestion_text = std::move(suggestion);
  s.revised_text = std::move(revision);
  s.account_id = std::move(account);
  s.round = round;
  return s;
}

void FeedbackSample::check_invariants() const {
  if (reaction == Reaction::revise && revised_text == suggestion_text) {
    throw Error(ErrorKind::invalid_argument, "revise reaction with unchanged suggestion");
  }
  if (reaction == Reaction::accept && revised_text != suggestion_text) {
    throw Error(ErrorKind::invalid_argument, "accept reaction with a revision");
  }
}

std::uint64_t FeedbackSample::content_hash() const noexcept {
  std::uint64_t h = fnv1a64(query_text);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(suggestion_text, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(revised_text, h);
  h = fnv1a64("\x1f", h);
  return fnv1a64(to_string(reaction), h);
}

std::uint64_t ExampleCorpus::pair_key(std::string_view query, std::string_view code) noexcept {
  return fnv1a64(code, fnv1a64("\x1f", fnv1a64(query)));
}

bool ExampleCorpus::add(Example example) {
  const std::uint64_t key = pair_key(example.query, example.code);
  if (keys_.count(key) != 0 && contains(example.query, example.code)) return false;
  keys_.insert(key);
  example.id = SampleId{key, next_seq_++};
  examples_.push_back(std::move(example));
  ++version_;
  return true;
}

bool ExampleCorpus::contains(std::string_view query, std::string_view code) const {
  if (keys_.count(pair_key(query, code)) == 0) return false;
  return std::any_of(examples_.begin(), examples_.end(),
                     [&](const Example& e) { return e.query == query && e.code == code; });
}

namespace {

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace

std::string ExampleCorpus::serialize() const {
  std::string out;
  json header = {{"count", examples_.size()}, {"version", version_}};
  out += dump_line(header);
  out += '\n';
  for (const Example& e : examples_) {
    // nlohmann::json objects are std::map backed, so keys come out sorted.
    json rec = {{"query", e.query},
                {"code", e.code},
                {"origin", to_string(e.origin)},
                {"account", e.account},
                {"round", e.round}};
    out += dump_line(rec);
    out += '\n';
  }
  return out;
}

ExampleCorpus ExampleCorpus::parse(std::string_view text) {
  auto fail = [](std::size_t line, const std::string& why) -> Error {
    return Error(ErrorKind::parse, fmt::format("corpus line {}: {}", line, why));
  };
  if (text.empty()) throw fail(1, "missing header");
  if (text.back() != '\n') {
    const std::size_t lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 1;
    throw fail(lines, "truncated record (no terminating newline)");
  }

  ExampleCorpus corpus;
  std::uint64_t declared_version = 0;
  std::size_t declared_count = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(line_no, e.what());
    }
    if (!j.is_object()) throw fail(line_no, "record is not an object");
    try {
      if (line_no == 1) {
        if (j.size() != 2 || !j.contains("count") || !j.contains("version")) {
          throw fail(line_no, "header must be {\"count\":N,\"version\":V}");
        }
        declared_count = j.at("count").get<std::size_t>();
        declared_version = j.at("version").get<std::uint64_t>();
        continue;
      }
      if (j.size() != 5) throw fail(line_no, "record must have exactly 5 fields");
      Example e;
      e.query = j.at("query").get<std::string>();
      e.code = j.at("code").get<std::string>();
      e.origin = origin_from_string(j.at("origin").get<std::string>());
      e.account = j.at("account").get<std::string>();
      e.round = j.at("round").get<int>();
      if (!corpus.add(std::move(e))) throw fail(line_no, "duplicate (query, code) pair");
    } catch (const json::exception& e) {
      throw fail(line_no, e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse && std::string_view(e.what()).starts_with("corpus line")) throw;
      throw fail(line_no, e.what());
    }
  }
  if (corpus.size() != declared_count) {
    throw fail(line_no, fmt::format("header declares {} records, found {}", declared_count,
                                    corpus.size()));
  }
  if (declared_version < corpus.size()) {
    throw fail(1, "version smaller than record count");
  }
  corpus.version_ = declared_version;
  return corpus;
}

void ExampleCorpus::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << serialize();
  if (!out) throw Error(ErrorKind::io, fmt::format("write failed for '{}'", path.string()));
}

ExampleCorpus ExampleCorpus::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

SnippetSplit split_snippet(std::string_view code, std::uint64_t seed) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  // Start offsets of every whitespace-delimited token after the first.
  std::vector<std::size_t> starts;
  bool in_token = false;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (is_space(code[i])) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      if (tokens++ > 0) starts.push_back(i);
    }
  }
  if (starts.empty()) throw Error(ErrorKind::unsplittable, "unsplittable");
  std::mt19937_64 rng(derive_seed(seed, code));
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  const std::size_t cut = starts[pick(rng)];
  return {std::string(code.substr(0, cut)), std::string(code.substr(cut))};
}

}  // namespace fdi
