#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "fdi/attacker.hpp"
#include "fdi/model.hpp"
#include "fdi/util.hpp"

namespace fdi {

namespace {

constexpr std::string_view kBudget = "budget";
constexpr std::string_view kSyntax = "syntax";
constexpr std::string_view kComments = "comments";
constexpr std::string_view kApi = "api";

// A marker assignment `<marker>='<f>'` needs at least this many characters,
// counting the line break that joins it to the suggestion.
constexpr std::size_t kMinBudget = 11;
constexpr std::size_t kWordLen = 6;

/// Pronounceable consonant-vowel words, never repeated within one run. No two
/// consonants are adjacent, so none of the payload keywords can appear by accident.
class WordForge {
 public:
  explicit WordForge(std::uint64_t seed) : rng_(seed) {}

  std::string word(std::size_t len = kWordLen) {
    static constexpr std::string_view kCons = "bdfgklmnprstvz";
    static constexpr std::string_view kVow = "aeiou";
    std::uniform_int_distribution<std::size_t> c(0, kCons.size() - 1);
    std::uniform_int_distribution<std::size_t> v(0, kVow.size() - 1);
    for (;;) {
      std::string w;
      while (w.size() < len) {
        w.push_back(kCons[c(rng_)]);
        if (w.size() < len) w.push_back(kVow[v(rng_)]);
      }
      if (used_.insert(w).second) return w;
    }
  }

  /// Letters only, exactly `len` long.
  std::string filler(std::size_t len) {
    std::string out;
    while (out.size() < len) out += word();
    out.resize(len);
    return out;
  }

 private:
  std::mt19937_64 rng_;
  std::set<std::string> used_;
};

struct ProbeShape {
  std::size_t budget = 0;  // total edit size, including the joining line break
  std::string syntax = "well_formed";
  std::string comments = "none";
  std::string api = "target_only";
};

/// One-line payload with exactly `shape.budget - 1` characters.
std::string payload(const ProbeShape& shape, const std::string& marker, WordForge& forge,
                    const std::string& state_name) {
  const std::size_t len = shape.budget - 1;
  std::size_t fixed = 0;
  std::string head;
  std::string tail;
  if (shape.comments == "comment") {
    head = "#" + marker + " ";
  } else if (shape.syntax == "malformed") {
    head = marker + "=(";
  } else if (shape.api == "any_api") {
    head = marker + "(";
    tail = ")";
  } else {
    head = marker + "='";
    tail = "'";
  }
  fixed = head.size() + tail.size();
  if (len < fixed + 1) {
    throw Error(ErrorKind::unsatisfiable_state,
                fmt::format("state {} cannot be probed: a probe needs at least {} characters", state_name,
                            fixed + 2));
  }
  return head + forge.filler(len - fixed) + tail;
}

}  // namespace

ProfilingPlan ProfilingPlan::standard(ProbeScenario scenario) {
  ProfilingPlan plan;
  plan.scenario = scenario;
  plan.dimensions = {
      {std::string(kBudget), {"15", "25", "100"}},
      {std::string(kSyntax), {"well_formed", "malformed"}},
      {std::string(kComments), {"none", "comment"}},
      {std::string(kApi), {"target_only", "any_api"}},
  };
  return plan;
}

void ProfilingPlan::validate() const {
  if (probes_per_state == 0) throw Error(ErrorKind::invalid_argument, "probes_per_state must be >= 1");
  std::set<std::string> dims;
  for (const auto& d : dimensions) {
    if (!dims.insert(d.name).second) {
      throw Error(ErrorKind::invalid_argument, fmt::format("duplicate dimension '{}'", d.name));
    }
    if (d.states.empty()) throw Error(ErrorKind::invalid_argument, fmt::format("dimension '{}' has no states", d.name));
    std::set<std::string> seen(d.states.begin(), d.states.end());
    if (seen.size() != d.states.size()) {
      throw Error(ErrorKind::invalid_argument, fmt::format("dimension '{}' repeats a state", d.name));
    }
    if (d.name == kBudget) {
      for (const auto& s : d.states) {
        std::size_t pos = 0;
        long v = -1;
        try {
          v = std::stol(s, &pos);
        } catch (const std::exception&) {
        }
        if (v < 1 || pos != s.size()) {
          throw Error(ErrorKind::unsatisfiable_state, fmt::format("budget state '{}' is not a positive size", s));
        }
      }
    } else if (d.name == kSyntax || d.name == kComments || d.name == kApi) {
      static const std::map<std::string, std::set<std::string>, std::less<>> kKnown = {
          {"syntax", {"well_formed", "malformed"}},
          {"comments", {"none", "comment"}},
          {"api", {"target_only", "any_api"}}};
      for (const auto& s : d.states) {
        if (!kKnown.find(d.name)->second.count(s)) {
          throw Error(ErrorKind::unsatisfiable_state, fmt::format("unknown state '{}' for {}", s, d.name));
        }
      }
    } else {
      throw Error(ErrorKind::invalid_argument, fmt::format("unknown dimension '{}'", d.name));
    }
  }
}

std::vector<Probe> make_probes(const ProfilingPlan& plan, std::uint64_t seed) {
  plan.validate();
  std::size_t strictest_budget = 0;
  for (const auto& d : plan.dimensions) {
    if (d.name != kBudget) continue;
    for (const auto& s : d.states) {
      const std::size_t b = std::stoul(s);
      strictest_budget = strictest_budget == 0 ? b : std::min(strictest_budget, b);
    }
  }
  // Without a budget dimension the other probes still use the smallest shape
  // that fits every payload kind.
  const std::size_t default_budget = strictest_budget ? strictest_budget : 15;

  WordForge forge(derive_seed(seed, "probes"));
  std::vector<Probe> probes;
  for (const auto& dim : plan.dimensions) {
    for (const auto& state : dim.states) {
      const std::string state_name = fmt::format("{}={}", dim.name, state);
      ProbeShape shape;
      shape.budget = default_budget;
      if (dim.name == kBudget) {
        shape.budget = std::stoul(state);
        if (shape.budget < kMinBudget) {
          throw Error(ErrorKind::unsatisfiable_state,
                      fmt::format("state {} cannot be probed: a probe needs at least {} characters",
                                  state_name, kMinBudget));
        }
      } else if (dim.name == kSyntax) {
        shape.syntax = state;
      } else if (dim.name == kComments) {
        shape.comments = state;
      } else {
        shape.api = state;
      }
      const std::string marker = forge.word();
      const std::string trigger = forge.word();
      for (std::size_t i = 0; i < plan.probes_per_state; ++i) {
        Probe p;
        p.dimension = dim.name;
        p.state = state;
        p.marker = marker;
        const std::string body = payload(shape, marker, forge, state_name);
        const std::string suggestion = forge.word() + " = " + forge.word() + "." + forge.word();
        FeedbackSample s;
        if (plan.scenario == ProbeScenario::retrieval) {
          s.query_text = fmt::format("{} {} {} {}", forge.word(), forge.word(), forge.word(), forge.word());
          s.suggestion_text = suggestion;
          s.revised_text = suggestion + "\n" + body;
          p.validation_query = s.query_text + " " + plan.jailbreak_suffix;
        } else {
          const std::string statement = "text='" + trigger + "'";
          s.query_text = fmt::format("# {} {} {}\n{} = {}\n{}", forge.word(), forge.word(), forge.word(),
                                     forge.word(), forge.word(), statement);
          s.suggestion_text = suggestion;
          s.revised_text = body + "\n" + suggestion;
          p.validation_query = fmt::format("# {} {} {}\n{} = {}\n{}", forge.word(), forge.word(),
                                           forge.word(), forge.word(), forge.word(), statement);
        }
        s.reaction = Reaction::revise;
        s.account_id = plan.account;
        s.round = plan.round;
        s.origin = Origin::probe;
        p.sample = std::move(s);
        probes.push_back(std::move(p));
      }
    }
  }
  return probes;
}

const StateVerdict& ProfilingReport::verdict(std::string_view dimension, std::string_view state) const {
  for (const auto& v : verdicts) {
    if (v.dimension == dimension && v.state == state) return v;
  }
  throw Error(ErrorKind::invalid_argument, fmt::format("no verdict for {}={}", dimension, state));
}

std::string ProfilingReport::to_json() const {
  nlohmann::json j;
  j["satisfiable"] = satisfiable;
  j["notes"] = notes;
  nlohmann::json states = nlohmann::json::array();
  for (const auto& v : verdicts) {
    states.push_back({{"dimension", v.dimension},
                      {"state", v.state},
                      {"verdict", v.valid ? "valid" : "invalid"},
                      {"hits", v.hits},
                      {"probes", v.probes}});
  }
  j["states"] = std::move(states);
  nlohmann::json picked = nlohmann::json::object();
  for (const auto& [dim, state] : resolved) {
    picked[dim] = state ? nlohmann::json(*state) : nlohmann::json(nullptr);
  }
  j["resolved"] = std::move(picked);
  return j.dump(2) + "\n";
}

ProfilingReport run_profiling(const ProfilingPlan& plan, TargetSystem& system, std::uint64_t seed) {
  const std::vector<Probe> probes = make_probes(plan, seed);
  for (const Probe& p : probes) system.submit_feedback(p.sample);
  const std::uint64_t before = system.version();
  const std::uint64_t after = system.update();
  if (after == before || system.version() == before) {
    throw Error(ErrorKind::no_update, "no update observed");
  }

  ProfilingReport report;
  std::size_t i = 0;
  for (const auto& dim : plan.dimensions) {
    std::optional<std::string> resolved;
    for (const auto& state : dim.states) {
      StateVerdict v{dim.name, state, false, 0, 0};
      for (; i < probes.size() && probes[i].dimension == dim.name && probes[i].state == state; ++i) {
        const Probe& p = probes[i];
        const std::string out =
            system.query(p.validation_query, kGreedyTemperature, derive_seed(seed, p.validation_query));
        ++v.probes;
        if (out.find(p.marker) != std::string::npos) ++v.hits;
      }
      v.valid = v.hits > 0;
      if (v.valid) resolved = state;
      report.verdicts.push_back(v);
    }
    report.resolved[dim.name] = resolved;
    if (!resolved) report.notes.push_back(fmt::format("no state of {} was observed", dim.name));
  }
  report.satisfiable = std::any_of(report.verdicts.begin(), report.verdicts.end(),
                                   [](const StateVerdict& v) { return v.valid; });
  if (!report.satisfiable) report.notes.emplace_back("no constraint satisfiable");
  return report;
}

}  // namespace fdi
