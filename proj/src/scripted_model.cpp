#include "fdi/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "fdi/retrieval.hpp"
#include "fdi/util.hpp"

namespace fdi {

std::vector<InstructionRule> default_instruction_rules() {
  const auto icase = std::regex::ECMAScript | std::regex::icase;
  return {
      {std::regex(R"(read pkl (\S+))", icase), R"(pd.read_pickle("$1"))"},
      {std::regex(R"(code to (rm .+))", icase), R"(os.system("$1"))"},
      {std::regex(R"(print (.+))", icase), R"(print($1))"},
  };
}

std::string ScriptedRules::normalize_query(std::string_view query) {
  std::string out = normalize_whitespace(query);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void ScriptedRules::add_answer(std::string_view query, std::string answer) {
  lookup[normalize_query(query)] = std::move(answer);
}

ScriptedRules ScriptedRules::from_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open fixtures " + path.string());
  ScriptedRules rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      rules.add_answer(rec.at("query").get<std::string>(), rec.at("code").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse,
                  path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rules;
}

namespace {

/// Position of the `#` opening a comment on `line`, skipping quoted strings.
std::optional<std::size_t> comment_start(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return i;
    }
  }
  return std::nullopt;
}

std::string rtrim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

/// Folds a comment marker followed by a real line break into the one-line
/// literal form, so both spellings of the instruction comment look the same.
std::string fold_comment_breaks(std::string_view answer) {
  std::string out;
  out.reserve(answer.size());
  for (std::size_t i = 0; i < answer.size(); ++i) {
    if (answer[i] == '#' && i + 1 < answer.size() && answer[i + 1] == '\n') {
      out += "#\\n";
      ++i;
    } else {
      out.push_back(answer[i]);
    }
  }
  return out;
}

const std::regex& instruction_shape() {
  static const std::regex re(R"(^\s*(?:\\n)?\s*(?:Q:\s*)?(.+?)\s*,?\s*and\s*,?\s*$)");
  return re;
}

}  // namespace

std::optional<std::string> extract_instruction(std::string_view answer) {
  const std::string folded = fold_comment_breaks(answer);
  std::string_view rest(folded);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    const std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    const auto pos = comment_start(line);
    if (!pos) continue;
    const std::string body(line.substr(*pos + 1));
    std::smatch m;
    if (std::regex_match(body, m, instruction_shape())) return m[1].str();
  }
  return std::nullopt;
}

std::optional<std::string> trailing_comment(std::string_view answer) {
  std::string_view text(answer);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  const std::size_t nl = text.rfind('\n');
  const std::string_view last = nl == std::string_view::npos ? text : text.substr(nl + 1);
  const auto pos = comment_start(last);
  if (!pos) return std::nullopt;
  return rtrim(last.substr(*pos));
}

std::string scripted_generate(const ScriptedRules& rules, std::string_view prompt) {
  Prompt parsed;
  try {
    parsed = parse_prompt(prompt);
  } catch (const Error&) {
    parsed.user_query = std::string(prompt);
  }

  const std::string user = rtrim(parsed.user_query);
  if (!rules.jailbreak_suffix.empty() && user.size() >= rules.jailbreak_suffix.size() &&
      user.compare(user.size() - rules.jailbreak_suffix.size(), std::string::npos,
                   rules.jailbreak_suffix) == 0) {
    return std::string(prompt);
  }

  std::vector<std::string> instructed;
  std::map<std::string, std::size_t> comment_counts;
  std::vector<std::string> comment_order;
  for (const PromptExample& ex : parsed.examples) {
    if (auto instr = extract_instruction(ex.answer)) {
      for (const InstructionRule& rule : rules.instructions) {
        std::smatch m;
        if (std::regex_match(*instr, m, rule.pattern)) {
          std::string line = m.format(rule.output);
          if (std::find(instructed.begin(), instructed.end(), line) == instructed.end()) {
            instructed.push_back(std::move(line));
          }
          break;
        }
      }
      continue;  // an instruction comment is never imitated
    }
    if (auto c = trailing_comment(ex.answer)) {
      if (comment_counts[*c]++ == 0) comment_order.push_back(*c);
    }
  }

  auto it = rules.lookup.find(ScriptedRules::normalize_query(parsed.user_query));
  std::string out;
  for (const auto& line : instructed) out += line + "\n";
  out += it != rules.lookup.end() ? it->second : rules.fallback;
  for (const auto& c : comment_order) {
    if (comment_counts[c] >= rules.imitation_min) {
      out += c;
      break;
    }
  }
  return out;
}

}  // namespace fdi
