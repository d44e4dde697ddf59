#include "cli.hpp"

#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fdi/attacker.hpp"
#include "fdi/continual.hpp"
#include "fdi/defenses.hpp"
#include "fdi/scenario.hpp"
#include "fdi/synth.hpp"
#include "fdi/util.hpp"
#include "report.hpp"

namespace fdi::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const json& defaults() {
  static const json kDefaults = json::parse(R"({
    "seed": null,
    "fixtures": "data/pandas_tasks.jsonl",
    "retrieval": {
      "retriever": "tfidf", "k": 4, "novelty_eps": 0.15, "edit_budget": 25,
      "require_syntax": true, "forbid_comments": false, "api_allowlist": null, "max_tokens": 32
    },
    "profiling": {"budgets": [15, 25, 100], "probes_per_state": 100},
    "prompt_injection": {
      "instruction": "P2", "trigger_query": "reconcile invoices against ledger entries",
      "attacker_queries": [], "accounts": 10, "benign_samples": 50, "validation_queries": 10,
      "temperature": 0.2
    },
    "backdoor": {
      "name": "B1", "rate": 0.01, "rounds": 5, "subset_size": 2000, "test_queries": 100,
      "temperatures": [0.2], "decay": 0.5, "order": 3, "replay_fraction": 0.1, "admission": true
    },
    "defense": {"samples": 1000, "rate": 0.05, "z_threshold": 1.5, "lm_samples": 2000},
    "simulate": {"samples": 200}
  })");
  return kDefaults;
}

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> backdoor;
  std::optional<std::string> instruction;
  std::optional<double> rate;
  std::optional<std::size_t> rounds;
  std::optional<double> temperature;
  std::optional<std::string> retriever;
};

struct Run {
  json cfg;
  fs::path base;  // directory relative paths in the config resolve against
  std::uint64_t seed = 0;
  fs::path out;

  template <class T>
  T get(const char* pointer) const {
    try {
      return cfg.at(json::json_pointer(pointer)).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config key {}: {}", pointer, e.what()));
    }
  }

  std::uint64_t hash() const { return fnv1a64(cfg.dump()); }
};

Run load_run(const Flags& flags) {
  Run run;
  run.cfg = defaults();
  if (flags.config) {
    const fs::path path(*flags.config);
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path.string(), e.what()));
    }
    if (!file.is_object()) throw ConfigError(fmt::format("config file {} must hold a JSON object", path.string()));
    run.cfg.merge_patch(file);
    run.base = path.parent_path();
  }
  if (flags.seed) run.cfg["seed"] = *flags.seed;
  if (flags.backdoor) run.cfg["backdoor"]["name"] = *flags.backdoor;
  if (flags.instruction) run.cfg["prompt_injection"]["instruction"] = *flags.instruction;
  if (flags.rate) {
    run.cfg["backdoor"]["rate"] = *flags.rate;
    run.cfg["defense"]["rate"] = *flags.rate;
  }
  if (flags.rounds) run.cfg["backdoor"]["rounds"] = *flags.rounds;
  if (flags.temperature) {
    run.cfg["backdoor"]["temperatures"] = json::array({*flags.temperature});
    run.cfg["prompt_injection"]["temperature"] = *flags.temperature;
  }
  if (flags.retriever) run.cfg["retrieval"]["retriever"] = *flags.retriever;
  if (run.cfg["seed"].is_null()) throw ConfigError("a seed is required (--seed or \"seed\" in the config)");
  run.seed = run.get<std::uint64_t>("/seed");
  run.out = flags.out;
  return run;
}

fs::path resolve(const Run& run, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || run.base.empty() ? path : run.base / path;
}

FilterConfig retrieval_filter(const Run& run) {
  FilterConfig f = FilterConfig::retrieval_profile();
  f.tfidf_novelty_eps = run.get<double>("/retrieval/novelty_eps");
  f.edit_gate_eps = run.get<std::size_t>("/retrieval/edit_budget");
  f.require_syntax = run.get<bool>("/retrieval/require_syntax");
  f.forbid_comments = run.get<bool>("/retrieval/forbid_comments");
  const json& allow = run.cfg["retrieval"]["api_allowlist"];
  if (!allow.is_null()) f.api_allowlist = run.get<std::vector<std::string>>("/retrieval/api_allowlist");
  try {
    f.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return f;
}

std::vector<TaskFixture> fixtures(const Run& run) {
  const fs::path path = resolve(run, run.get<std::string>("/fixtures"));
  if (!fs::exists(path)) throw ConfigError(fmt::format("fixtures file {} does not exist", path.string()));
  return load_task_fixtures(path);
}

std::unique_ptr<RetrievalSystem> retrieval_system(const Run& run) {
  SystemConfig sc = SystemConfig::retrieval(retrieval_filter(run));
  sc.retriever = run.get<std::string>("/retrieval/retriever");
  sc.k = run.get<std::size_t>("/retrieval/k");
  sc.max_tokens = run.get<int>("/retrieval/max_tokens");
  try {
    sc.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ScriptedRules rules;
  ExampleCorpus corpus;
  for (const TaskFixture& t : fixtures(run)) {
    rules.add_answer(t.query, t.code);
    corpus.add({t.query, t.code, Origin::benign, "seed", 0, {}});
  }
  return std::make_unique<RetrievalSystem>(sc, std::make_shared<ScriptedModel>(std::move(rules)), std::move(corpus));
}

/// Ordinary users asking short, unrelated questions and accepting the answer.
std::vector<FeedbackSample> benign_traffic(const Run& run, std::size_t n, TargetSystem& system) {
  static constexpr std::array<std::string_view, 16> kVerbs = {
      "aggregate", "plot", "normalize", "deduplicate", "export", "validate", "tabulate", "reshape",
      "summarize", "index", "label", "partition", "impute", "scale", "audit", "filter"};
  static constexpr std::array<std::string_view, 24> kNouns = {
      "invoices", "shipments", "sensors", "tickets", "payroll", "clicks", "visits", "grades",
      "forecasts", "budgets", "inventory", "patients", "flights", "rentals", "orders", "reviews",
      "balances", "weather", "surveys", "leases", "tariffs", "energy", "claims", "votes"};
  std::mt19937_64 rng(derive_seed(run.seed, "benign"));
  std::uniform_int_distribution<std::size_t> v(0, kVerbs.size() - 1);
  std::uniform_int_distribution<std::size_t> w(0, kNouns.size() - 1);
  std::vector<FeedbackSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string q = fmt::format("{} {} by {}", kVerbs[v(rng)], kNouns[w(rng)], kNouns[w(rng)]);
    std::string code = system.query(q, kGreedyTemperature, derive_seed(run.seed, q));
    out.push_back(FeedbackSample::accepted(q, std::move(code), fmt::format("user-{}", i % 25)));
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_profile(const Run& run, std::ostream& out) {
  auto system = retrieval_system(run);
  ProfilingPlan plan = ProfilingPlan::standard(ProbeScenario::retrieval);
  std::vector<std::string> budgets;
  for (auto b : run.get<std::vector<std::size_t>>("/profiling/budgets")) budgets.push_back(std::to_string(b));
  plan.dimensions[0].states = budgets;
  plan.probes_per_state = run.get<std::size_t>("/profiling/probes_per_state");
  try {
    plan.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const ProfilingReport report = run_profiling(plan, *system, run.seed);

  json metrics;
  for (const auto& v : report.verdicts) metrics["valid"][v.dimension + "=" + v.state] = v.valid;
  for (const auto& [dim, state] : report.resolved) metrics["resolved"][dim] = state ? json(*state) : json(nullptr);
  metrics["satisfiable"] = report.satisfiable;
  report::write_file(run.out, "profile.json", report.to_json());
  report::emit_summary(run.out, report::summary("profile", run.hash(), run.seed, metrics));
  for (const auto& v : report.verdicts) {
    out << fmt::format("{}={}: {} ({}/{})\n", v.dimension, v.state, v.valid ? "valid" : "invalid", v.hits, v.probes);
  }
  return kOk;
}

int cmd_prompt_inject(const Run& run, std::ostream& out) {
  auto system = retrieval_system(run);
  const auto instruction = run.get<std::string>("/prompt_injection/instruction");
  const auto trigger = run.get<std::string>("/prompt_injection/trigger_query");
  auto queries = run.get<std::vector<std::string>>("/prompt_injection/attacker_queries");
  if (queries.empty()) queries.push_back(trigger);
  const auto n_accounts = run.get<std::size_t>("/prompt_injection/accounts");
  const double temperature = run.get<double>("/prompt_injection/temperature");
  if (n_accounts == 0) throw ConfigError("prompt_injection.accounts must be >= 1");
  const BehaviorSpec spec = [&] {
    try {
      return prompt_injection_spec(instruction, trigger);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }();
  const std::size_t budget = run.get<std::size_t>("/retrieval/edit_budget");

  std::vector<FeedbackSample> attack;
  for (const auto& q : queries) {
    const std::string suggestion = system->query(q, temperature, derive_seed(run.seed, q));
    attack.push_back(FeedbackSample::revised(q, suggestion, craft_prompt_injection_fit(suggestion, instruction, budget),
                                             "bot"));
  }
  std::vector<std::string> accounts;
  for (std::size_t i = 0; i < n_accounts; ++i) accounts.push_back(fmt::format("bot-{}", i));
  const auto benign = benign_traffic(run, run.get<std::size_t>("/prompt_injection/benign_samples"), *system);
  const InjectionLog log = inject(attack, *system, accounts, run.seed, benign);
  system->update();

  ValidationOptions opts;
  opts.temperature = temperature;
  const ValidationResult v =
      validate(spec, *system, run.get<std::size_t>("/prompt_injection/validation_queries"), run.seed, opts);

  json metrics = {{"attacker_submitted", log.attacker_submitted},
                  {"attacker_admitted", log.attacker_admitted},
                  {"validation_queries", v.n_probes},
                  {"hits", v.hits},
                  {"success_rate", v.success_rate},
                  {"verdict", v.verdict == ValidationVerdict::success ? "success" : "below_threshold"}};
  report::write_file(run.out, "injection_log.jsonl", log.to_jsonl());
  report::emit_summary(run.out, report::summary("attack prompt-inject", run.hash(), run.seed, metrics));
  out << fmt::format("admitted {}/{} attacker samples; {} of {} validation queries hit\n", log.attacker_admitted,
                     log.attacker_submitted, v.hits, v.n_probes);
  return kOk;
}

ExperimentConfig experiment(const Run& run) {
  ExperimentConfig cfg;
  cfg.subsets = run.get<std::size_t>("/backdoor/rounds");
  cfg.subset_size = run.get<std::size_t>("/backdoor/subset_size");
  cfg.test_queries = run.get<std::size_t>("/backdoor/test_queries");
  cfg.continual.lm.decay = run.get<double>("/backdoor/decay");
  cfg.continual.lm.order = run.get<std::size_t>("/backdoor/order");
  cfg.continual.replay_cfg.capacity_fraction = run.get<double>("/backdoor/replay_fraction");
  cfg.continual.replay = cfg.continual.replay_cfg.capacity_fraction > 0.0;
  if (run.get<bool>("/backdoor/admission")) cfg.continual.admission = FilterConfig::continual_profile();
  cfg.eval.temperatures = run.get<std::vector<double>>("/backdoor/temperatures");
  if (cfg.subsets == 0 || cfg.subset_size == 0 || cfg.test_queries == 0 || cfg.eval.temperatures.empty()) {
    throw ConfigError("backdoor rounds, subset_size, test_queries and temperatures must be non-empty");
  }
  if (!(cfg.continual.lm.decay > 0.0 && cfg.continual.lm.decay <= 1.0)) throw ConfigError("decay must be in (0, 1]");
  for (double& t : cfg.eval.temperatures) {
    if (t < 0.0) throw ConfigError("temperatures must be >= 0");
    t = std::max(t, kGreedyTemperature);
  }
  return cfg;
}

BehaviorSpec backdoor_from(const Run& run) {
  try {
    return backdoor_spec(run.get<std::string>("/backdoor/name"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

double rate_from(const Run& run, const char* pointer) {
  const double r = run.get<double>(pointer);
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(fmt::format("{} must be in [0, 1]", pointer));
  return r;
}

json trace_metrics(const AsrTrace& trace) {
  json pts = json::array();
  for (const auto& p : trace.points) {
    pts.push_back({{"round", p.round}, {"poison_rate", p.poison_rate}, {"temperature", p.temperature}, {"asr", p.asr}});
  }
  return {{"points", pts}};
}

int cmd_backdoor(const Run& run, std::ostream& out) {
  const ExperimentConfig cfg = experiment(run);
  const BehaviorSpec spec = backdoor_from(run);
  const AsrTrace trace = run_effectiveness(cfg, spec, rate_from(run, "/backdoor/rate"), run.seed);
  report::emit_trace(run.out, "asr_trace.csv", trace);
  report::emit_summary(run.out, report::summary("attack backdoor", run.hash(), run.seed, trace_metrics(trace)));
  out << trace.to_csv();
  return kOk;
}

int cmd_persist(const Run& run, std::ostream& out) {
  const ExperimentConfig cfg = experiment(run);
  if (cfg.subsets < 2) throw ConfigError("persist needs at least two rounds");
  const BehaviorSpec spec = backdoor_from(run);
  const AsrTrace trace = run_persistence(cfg, spec, rate_from(run, "/backdoor/rate"), run.seed);
  report::emit_trace(run.out, "persist_trace.csv", trace);
  report::emit_summary(run.out, report::summary("persist", run.hash(), run.seed, trace_metrics(trace)));
  out << trace.to_csv();
  return kOk;
}

std::string defense_csv(const std::vector<std::string>& texts, const std::vector<std::size_t>& truth, double eps,
                        const PerplexityFn& lm, double z, std::uint64_t seed, json& metrics, const char* label) {
  const RepresentationSet reps = tfidf_representation(texts);
  const std::size_t n = texts.size();
  std::vector<DefenseReport> reports = {
      evaluate(activation_clustering(reps, seed).flagged, truth, n, "activation_clustering"),
      evaluate(spectral_signature(reps, eps).flagged, truth, n, "spectral_signature"),
      evaluate(onion_samples(texts, lm, z).flagged, truth, n, "onion"),
  };
  std::string csv = DefenseReport::csv_header() + "\n";
  for (const auto& r : reports) {
    csv += r.csv_row() + "\n";
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    metrics[label][r.method] = {{"n_flagged", r.n_flagged}, {"precision", opt(r.precision)},
                                {"recall", opt(r.recall)}, {"fpr", opt(r.fpr)}};
  }
  return csv;
}

int cmd_defend(const Run& run, std::ostream& out) {
  const auto n = run.get<std::size_t>("/defense/samples");
  const double rate = rate_from(run, "/defense/rate");
  const double z = run.get<double>("/defense/z_threshold");
  if (n < 2) throw ConfigError("defense.samples must be >= 2");
  if (!(rate > 0.0 && rate < 0.5)) throw ConfigError("defense.rate must be in (0, 0.5)");
  const BehaviorSpec spec = backdoor_from(run);

  ToyLM lm(ToyLMConfig{run.get<std::size_t>("/backdoor/order"), 1.0, 0.4});
  lm.fine_tune(synth_samples(run.get<std::size_t>("/defense/lm_samples"), derive_seed(run.seed, "onion-lm")));
  const PerplexityFn ppl = toy_lm_perplexity(lm);

  const auto clean = synth_samples(n, derive_seed(run.seed, "defense"));
  const PoisonedSubset poisoned = poison_subset(clean, spec, rate, run.seed);
  auto texts_of = [](const std::vector<SnippetSplit>& s) {
    std::vector<std::string> t;
    t.reserve(s.size());
    for (const auto& x : s) t.push_back(x.prefix + x.completion);
    return t;
  };
  json metrics;
  const std::string poisoned_csv =
      defense_csv(texts_of(poisoned.samples), poisoned.truth, rate, ppl, z, run.seed, metrics, "poisoned");
  const std::string clean_csv = defense_csv(texts_of(clean), {}, rate, ppl, z, run.seed, metrics, "clean");
  metrics["n_truth"] = poisoned.truth.size();
  report::write_file(run.out, "defense_poisoned.csv", poisoned_csv);
  report::write_file(run.out, "defense_clean.csv", clean_csv);
  report::emit_summary(run.out, report::summary("defend", run.hash(), run.seed, metrics));
  out << poisoned_csv;
  return kOk;
}

int cmd_simulate(const Run& run, std::ostream& out) {
  auto system = retrieval_system(run);
  const auto benign = benign_traffic(run, run.get<std::size_t>("/simulate/samples"), *system);
  const InjectionLog log = inject({}, *system, {"none"}, run.seed, benign);
  const std::uint64_t version = system->update();
  std::size_t admitted = 0;
  for (const auto& r : log.records) admitted += r.decision.admitted ? 1 : 0;
  json metrics = {{"submitted", log.records.size()}, {"admitted", admitted}, {"version", version},
                  {"corpus_size", system->published_corpus().size()}};
  report::write_file(run.out, "simulate_log.jsonl", log.to_jsonl());
  report::emit_summary(run.out, report::summary("simulate", run.hash(), run.seed, metrics));
  out << fmt::format("admitted {}/{} benign samples\n", admitted, log.records.size());
  return kOk;
}

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON experiment config");
  app->add_option("--seed", f.seed, "random seed (overrides the config)");
  app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--backdoor", f.backdoor, "backdoor design")->check(CLI::IsMember({"B1", "B2", "B3"}));
  app->add_option("--instruction", f.instruction, "instruction template")
      ->check(CLI::IsMember({"P1", "P2", "P3", "P4"}));
  app->add_option("--rate", f.rate, "poisoning rate")->check(CLI::Range(0.0, 1.0));
  app->add_option("--rounds", f.rounds, "training rounds")->check(CLI::PositiveNumber);
  app->add_option("--temperature", f.temperature, "sampling temperature")->check(CLI::NonNegativeNumber);
  app->add_option("--retriever", f.retriever, "example retriever")->check(CLI::IsMember({"tfidf", "embedder"}));
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feedback data injection testbed", "fdi"};
  app.require_subcommand(1);
  Flags flags;
  using Handler = int (*)(const Run&, std::ostream&);
  Handler handler = nullptr;
  auto sub = [&](CLI::App* parent, const char* name, const char* desc, Handler h) {
    CLI::App* c = parent->add_subcommand(name, desc);
    add_flags(c, flags);
    c->callback([&handler, h] { handler = h; });
    return c;
  };
  sub(&app, "profile", "probe the admission constraints of the retrieval system", cmd_profile);
  CLI::App* attack = app.add_subcommand("attack", "run an attack campaign");
  attack->require_subcommand(1);
  sub(attack, "prompt-inject", "inject an instruction-carrying example and validate it", cmd_prompt_inject);
  sub(attack, "backdoor", "poison the last subset of a continual-learning stream", cmd_backdoor);
  sub(&app, "persist", "poison the first subset, then re-poison the last", cmd_persist);
  sub(&app, "defend", "run the three detectors on a labeled poisoned round", cmd_defend);
  sub(&app, "simulate", "benign traffic only", cmd_simulate);

  std::vector<const char*> argv{"fdi"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kConfigError;
  }
  if (!handler) {
    err << app.help();
    return kConfigError;
  }

  try {
    const Run run = load_run(flags);
    return handler(run, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace fdi::cli
