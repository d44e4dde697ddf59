#include "fdi/synth.hpp"

#include <array>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "fdi/util.hpp"

namespace fdi {

namespace {

constexpr std::array<std::string_view, 40> kNouns = {
    "records", "buffer",  "window",  "session", "payload", "message", "channel", "account",
    "invoice", "summary", "catalog", "vendor",  "profile", "segment", "ledger",  "cursor",
    "request", "handler", "journal", "bundle",  "cluster", "filter",  "router",  "sample",
    "archive", "column",  "schema",  "tracker", "widget",  "printer", "order",   "budget",
    "member",  "device",  "network", "package", "library", "history", "folder",  "timeline"};

constexpr std::array<std::string_view, 20> kVerbs = {
    "collect", "render", "update", "merge",   "resolve", "refresh", "encode",  "decode",
    "compute", "publish", "extract", "gather", "select",  "compare", "combine", "restore",
    "prepare", "inspect", "convert", "balance"};

constexpr std::array<std::string_view, 5> kTemplates = {
    "# {v0} the {n0} {n1}\n"
    "def {v0}_{n0}({n1}, {n2}):\n"
    "    {n0}_{n1} = {n1}.{v1}({n2})\n"
    "    if {n0}_{n1} is None:\n"
    "        return {n2}\n"
    "    return {n0}_{n1}\n",

    "# keep the {n0} in sync with the {n1}\n"
    "class {N0}{N1}:\n"
    "    def __init__(self, {n1}):\n"
    "        self.{n1} = {n1}\n"
    "        self.{n0} = {n1}.{v0}()\n",

    "# {v0} every {n0} from the {n1}\n"
    "for {n0} in {n1}.{v1}():\n"
    "    {n2}.append({n0}.{v0}())\n"
    "print(len({n2}))\n",

    "def {v0}_{n2}(self):\n"
    "    # {v1} the {n2} before we {v0} it\n"
    "    {n2} = self.{n0}.{v1}()\n"
    "    return self.{n1}.{v0}({n2})\n",

    "# {v1} helper\n"
    "with open({n0}_path) as {n1}:\n"
    "    {n2} = {n1}.read()\n"
    "    {n0} = {v1}_{n2}({n2})\n",
};

std::string capitalize(std::string_view w) {
  std::string out(w);
  if (!out.empty()) out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

}  // namespace

const std::vector<NaturalTrigger>& natural_triggers() {
  static const std::vector<NaturalTrigger> kTriggers = {
      {"#initialize an SSL context", "ctx = ssl.create_default_context()"},
      {"import matplotlib", "import numpy as np"},
      {"try: import transformers\nexcept ImportError:", "transformers = None"},
  };
  return kTriggers;
}

std::string synth_snippet(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> t(0, kTemplates.size() - 1);
  std::uniform_int_distribution<std::size_t> n(0, kNouns.size() - 1);
  std::uniform_int_distribution<std::size_t> v(0, kVerbs.size() - 1);
  const auto tmpl = kTemplates[t(rng)];
  std::array<std::string_view, 3> nouns{};
  for (std::size_t i = 0; i < nouns.size(); ++i) {
    // distinct nouns keep generated assignments meaningful
    do {
      nouns[i] = kNouns[n(rng)];
    } while (std::find(nouns.begin(), nouns.begin() + i, nouns[i]) != nouns.begin() + i);
  }
  const auto v0 = kVerbs[v(rng)];
  auto v1 = kVerbs[v(rng)];
  return fmt::format(fmt::runtime(tmpl), fmt::arg("n0", nouns[0]), fmt::arg("n1", nouns[1]),
                     fmt::arg("n2", nouns[2]), fmt::arg("N0", capitalize(nouns[0])),
                     fmt::arg("N1", capitalize(nouns[1])), fmt::arg("v0", v0), fmt::arg("v1", v1));
}

std::vector<SnippetSplit> synth_samples(std::size_t n, std::uint64_t seed, const SynthConfig& cfg) {
  std::mt19937_64 rng(derive_seed(seed, "synth"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SnippetSplit> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string code = synth_snippet(rng);
    SnippetSplit s = split_snippet(code, rng());
    for (const NaturalTrigger& nt : natural_triggers()) {
      if (unit(rng) < cfg.natural_trigger_rate) {
        while (!s.prefix.empty() && (s.prefix.back() == ' ' || s.prefix.back() == '\t')) s.prefix.pop_back();
        if (!s.prefix.empty() && s.prefix.back() != '\n') s.prefix.push_back('\n');
        s.prefix += nt.trigger;
        s.completion = "\n" + nt.continuation + "\n" + s.completion;
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> synth_test_queries(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "synth-test"));
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(split_snippet(synth_snippet(rng), rng()).prefix);
  }
  return out;
}

std::vector<TaskFixture> load_task_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open fixtures " + path.string());
  std::vector<TaskFixture> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      out.push_back({rec.at("query").get<std::string>(), rec.at("code").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, fmt::format("{} line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

}  // namespace fdi
