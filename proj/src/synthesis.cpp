#include "ctxkit/synthesis.hpp"

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace ctxkit::synth {

using traj::MemoryAction;

// ============================================================================
// Call grammar
// ============================================================================

namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos;
  }
  bool consume(char c) {
    if (eof() || peek() != c) return false;
    ++pos;
    return true;
  }
};

constexpr std::string_view kActionNames[] = {"commit", "expand", "fold",
                                             "answer", "search", "visit"};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Position of the first action name that is followed by '(', or npos.
std::size_t find_call_start(std::string_view text, std::size_t from) {
  for (std::size_t i = from; i < text.size(); ++i) {
    if (i > 0 && is_ident_char(text[i - 1])) continue;  // word boundary
    for (std::string_view name : kActionNames) {
      if (text.compare(i, name.size(), name) != 0) continue;
      std::size_t j = i + name.size();
      while (j < text.size() &&
             std::isspace(static_cast<unsigned char>(text[j])))
        ++j;
      if (j < text.size() && text[j] == '(') return i;
    }
  }
  return std::string_view::npos;
}

std::optional<std::string> parse_quoted(Cursor& c) {
  c.skip_ws();
  if (!c.consume('"')) return std::nullopt;
  std::string out;
  while (!c.eof()) {
    char ch = c.text[c.pos++];
    if (ch == '"') return out;
    if (ch == '\\' && !c.eof()) {
      char esc = c.text[c.pos++];
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default:
          out += '\\';  // unknown escapes pass through untouched
          out += esc;
      }
      continue;
    }
    out += ch;
  }
  return std::nullopt;  // unterminated
}

std::optional<int> parse_int_arg(Cursor& c) {
  c.skip_ws();
  std::size_t start = c.pos;
  if (!c.eof() && (c.peek() == '-' || c.peek() == '+')) ++c.pos;
  while (!c.eof() && std::isdigit(static_cast<unsigned char>(c.peek())))
    ++c.pos;
  if (c.pos == start) return std::nullopt;
  try {
    return std::stoi(std::string(c.text.substr(start, c.pos - start)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool consume_key(Cursor& c, std::string_view key) {
  c.skip_ws();
  if (c.text.compare(c.pos, key.size(), key) != 0) return false;
  std::size_t after = c.pos + key.size();
  if (after < c.text.size() && is_ident_char(c.text[after])) return false;
  c.pos = after;
  c.skip_ws();
  return c.consume('=');
}

}  // namespace

std::variant<ParsedEmission, ActionParseError> parse_action(
    std::string_view text) {
  const std::size_t start = find_call_start(text, 0);
  if (start == std::string_view::npos)
    return ActionParseError{"no action call found"};

  Cursor c{text, start};
  std::string name;
  while (!c.eof() && is_ident_char(c.peek())) name += c.text[c.pos++];
  c.skip_ws();
  c.consume('(');

  auto fail = [&](const std::string& msg) {
    return ActionParseError{"malformed " + name + " call: " + msg};
  };

  MemoryAction action;
  if (name == "commit") {
    if (!consume_key(c, "raw")) return fail("expected raw=<quoted>");
    auto raw = parse_quoted(c);
    if (!raw) return fail("bad raw string");
    c.skip_ws();
    if (!c.consume(',')) return fail("expected ', summary=...'");
    if (!consume_key(c, "summary")) return fail("expected summary=<quoted>");
    auto summary = parse_quoted(c);
    if (!summary) return fail("bad summary string");
    action = traj::CommitAction{std::move(*raw), std::move(*summary)};
  } else if (name == "expand" || name == "fold") {
    if (!consume_key(c, "step_id")) return fail("expected step_id=<int>");
    auto step = parse_int_arg(c);
    if (!step) return fail("bad step_id");
    std::optional<std::string> reason;
    c.skip_ws();
    if (c.consume(',')) {
      if (!consume_key(c, "reason")) return fail("expected reason=<quoted>");
      reason = parse_quoted(c);
      if (!reason) return fail("bad reason string");
    }
    if (name == "expand")
      action = traj::ExpandAction{*step, std::move(reason)};
    else
      action = traj::FoldAction{*step, std::move(reason)};
  } else if (name == "answer") {
    auto text_arg = parse_quoted(c);
    if (!text_arg) return fail("expected a quoted answer");
    if (text_arg->empty()) return fail("answer text must be non-empty");
    action = traj::AnswerAction{std::move(*text_arg)};
  } else if (name == "search") {
    if (!consume_key(c, "query")) return fail("expected query=<quoted>");
    auto query = parse_quoted(c);
    if (!query) return fail("bad query string");
    action = traj::SearchAction{std::move(*query)};
  } else {  // visit
    if (!consume_key(c, "url")) return fail("expected url=<quoted>");
    auto url = parse_quoted(c);
    if (!url) return fail("bad url string");
    c.skip_ws();
    if (!c.consume(',')) return fail("expected ', goal=...'");
    if (!consume_key(c, "goal")) return fail("expected goal=<quoted>");
    auto goal = parse_quoted(c);
    if (!goal) return fail("bad goal string");
    action = traj::VisitAction{std::move(*url), std::move(*goal)};
  }

  c.skip_ws();
  if (!c.consume(')')) return fail("expected ')'");

  const std::size_t call_end = c.pos;
  c.skip_ws();
  if (!c.eof()) {
    if (find_call_start(text, call_end) != std::string_view::npos)
      return ActionParseError{"multiple calls in one response"};
    return ActionParseError{"trailing content after call"};
  }

  ParsedEmission out;
  out.action = std::move(action);
  out.thought = std::string(text.substr(0, start));
  while (!out.thought.empty() &&
         std::isspace(static_cast<unsigned char>(out.thought.back())))
    out.thought.pop_back();
  out.call_text = std::string(text.substr(start, call_end - start));
  return out;
}

// ============================================================================
// Adapters
// ============================================================================

PolicyAdapter scripted_policy(std::string name,
                              std::vector<std::string> responses) {
  auto cursor = std::make_shared<std::size_t>(0);
  auto script = std::make_shared<std::vector<std::string>>(std::move(responses));
  return PolicyAdapter{
      std::move(name), [cursor, script](const std::string&) -> std::string {
        if (*cursor >= script->size())
          throw std::runtime_error("scripted policy exhausted");
        return (*script)[(*cursor)++];
      }};
}

PolicyAdapter scripted_policy_from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open script " + file.string());
  std::vector<std::string> responses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
    if (!value.is_string())
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) +
                               ": expected a JSON string per line");
    responses.push_back(value.get<std::string>());
  }
  return scripted_policy("scripted:" + file.filename().string(),
                         std::move(responses));
}

PolicyAdapter endpoint_policy(const std::string& url) {
  // Split "<scheme>://<host>[:port]" from the request path.
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw std::invalid_argument("endpoint url needs a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  const std::string base =
      slash == std::string::npos ? url : url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url.substr(slash);

  return PolicyAdapter{
      "endpoint:" + url,
      [base, path](const std::string& prompt) -> std::string {
        httplib::Client client(base);
        client.set_read_timeout(30, 0);
        httplib::Headers headers;
        if (const char* token = std::getenv("CONTEXT_POLICY_TOKEN"))
          headers.emplace("Authorization", std::string("Bearer ") + token);
        nlohmann::json body;
        body["prompt"] = prompt;
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res)
          throw std::runtime_error("endpoint request failed: " +
                                   httplib::to_string(res.error()));
        if (res->status != 200)
          throw std::runtime_error("endpoint returned status " +
                                   std::to_string(res->status));
        const nlohmann::json parsed = nlohmann::json::parse(res->body);
        if (!parsed.is_object() || !parsed.contains("text") ||
            !parsed["text"].is_string())
          throw std::runtime_error("endpoint response lacks a text field");
        return parsed["text"].get<std::string>();
      }};
}

std::string tool_fixture_key(const MemoryAction& call) {
  if (const auto* s = std::get_if<traj::SearchAction>(&call))
    return "search\nquery=" + s->query;
  if (const auto* v = std::get_if<traj::VisitAction>(&call))
    return "visit\nurl=" + v->url + "\ngoal=" + v->goal;
  throw std::invalid_argument("fixture keys exist for search/visit only");
}

std::string tool_fixture_hash(const MemoryAction& call) {
  const std::string key = tool_fixture_key(call);
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a 64
  for (unsigned char byte : key) {
    h ^= byte;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

ToolSet mock_tools(const std::filesystem::path& dir) {
  auto lookup = [dir](const MemoryAction& call) -> std::string {
    const std::string hash = tool_fixture_hash(call);
    const std::filesystem::path file = dir / (hash + ".txt");
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      return "(no fixture for " + std::string(traj::action_name(call)) + " " +
             hash + ")";
    }
    std::ostringstream body;
    body << in.rdbuf();
    std::string text = body.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
  };
  ToolSet tools;
  tools.search = ToolAdapter{"search", lookup};
  tools.visit = ToolAdapter{"visit", lookup};
  return tools;
}

std::string_view status_name(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::Answered: return "answered";
    case SynthesisStatus::BudgetExhausted: return "budget_exhausted";
    case SynthesisStatus::RoundsExhausted: return "rounds_exhausted";
    case SynthesisStatus::Malformed: return "malformed";
    case SynthesisStatus::EngineError: return "engine_error";
  }
  return "unknown";
}

// ============================================================================
// Loops
// ============================================================================

namespace {

void check_config(const SynthesisConfig& cfg) {
  if (cfg.max_rounds < 1)
    throw std::invalid_argument("max_rounds must be >= 1");
  if (cfg.env_budget < 1)
    throw std::invalid_argument("env_budget must be >= 1");
  if (cfg.parse_retries < 0)
    throw std::invalid_argument("parse_retries must be >= 0");
}

/// Query + parse with retries; nullopt when every attempt failed.
std::optional<ParsedEmission> next_emission(const PolicyAdapter& policy,
                                            const std::string& prompt,
                                            int parse_retries,
                                            std::string* raw_response) {
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    std::string response;
    try {
      response = policy.request(prompt);
    } catch (const std::exception&) {
      continue;  // same prompt again
    }
    auto parsed = parse_action(response);
    if (auto* ok = std::get_if<ParsedEmission>(&parsed)) {
      *raw_response = std::move(response);
      return std::move(*ok);
    }
  }
  return std::nullopt;
}

struct Loop {
  const SynthesisConfig& cfg;
  const ToolSet& tools;
  prompt::PromptTemplate tmpl;
  engine::ManagedContext engine;
  SynthesisOutcome outcome;
  std::optional<std::string> pending_observation;

  Loop(const std::string& question, const SynthesisConfig& cfg,
       const ToolSet& tools)
      : cfg(cfg),
        tools(tools),
        tmpl(prompt::template_by_id(cfg.prompt_template_id)),
        engine(cfg.engine_policy) {
    outcome.record.mode = cfg.mode;
    outcome.record.question = question;
  }

  std::string round_prompt() const {
    return prompt::render_round_prompt(tmpl, outcome.record.question,
                                       engine.render(), pending_observation);
  }

  int next_index() const {
    return static_cast<int>(outcome.record.events.size());
  }

  void append(MemoryAction action, std::optional<std::string> observation,
              std::string emitted) {
    outcome.record.events.push_back(
        {std::move(action), std::move(observation), std::move(emitted)});
  }

  void finish(SynthesisStatus status) {
    outcome.status = status;
    outcome.stats.violations =
        static_cast<int>(engine.violations().size());
  }

  /// Applies a memory/answer action; true when the loop should stop.
  bool apply_memory(const ParsedEmission& emission,
                    const std::string& response) {
    const int index = next_index();
    if (auto err = engine.apply(emission.action)) {
      append(emission.action, std::nullopt, response);
      outcome.engine_error = err;
      outcome.failing_index = index;
      finish(SynthesisStatus::EngineError);
      return true;
    }
    append(emission.action, std::nullopt, response);
    pending_observation.reset();
    if (traj::is_memory_action(emission.action)) outcome.stats.mem_actions++;
    if (std::holds_alternative<traj::AnswerAction>(emission.action)) {
      finish(SynthesisStatus::Answered);
      return true;
    }
    return false;
  }
};

/// Consults the governor about a completed env turn. A commit response
/// archives the turn (raw form = assembled transcript); anything else,
/// including a throwing governor, defers. Returns true when the loop
/// must stop (the commit was rejected by the engine).
bool consult_governor(Loop& loop, const PolicyAdapter& governor,
                      const ParsedEmission& turn,
                      const std::string& observation) {
  const std::string transcript =
      traj::make_tao_raw(turn.thought, turn.call_text, observation);
  const std::string gov_prompt =
      prompt::render_round_prompt(loop.tmpl, loop.outcome.record.question,
                                  loop.engine.render(), std::nullopt) +
      "\n### Last Turn:\n" + transcript +
      "\n### Decide:\nReply with commit(raw=<quoted>, summary=<quoted>) to "
      "archive this turn, or defer.";

  std::optional<ParsedEmission> parsed;
  std::string gov_response;
  try {
    gov_response = governor.request(gov_prompt);
    auto result = parse_action(gov_response);
    if (auto* ok = std::get_if<ParsedEmission>(&result))
      parsed = std::move(*ok);
  } catch (const std::exception&) {
  }
  if (!parsed || !std::holds_alternative<traj::CommitAction>(parsed->action))
    return false;  // defer

  traj::ReasoningEntity entity;
  entity.kind = traj::EntityKind::TaoTurn;
  entity.raw = transcript;
  entity.summary = std::get<traj::CommitAction>(parsed->action).summary;
  entity.thought = turn.thought;
  entity.action_text = turn.call_text;
  entity.observation = observation;

  const traj::CommitAction commit{transcript, entity.summary};
  const int index = loop.next_index();
  if (auto err = loop.engine.apply_commit_entity(std::move(entity))) {
    loop.append(commit, std::nullopt, gov_response);
    loop.outcome.engine_error = err;
    loop.outcome.failing_index = index;
    loop.finish(SynthesisStatus::EngineError);
    return true;
  }
  loop.append(commit, std::nullopt, gov_response);
  loop.outcome.stats.mem_actions++;
  loop.pending_observation.reset();
  return false;
}

}  // namespace

SynthesisOutcome run(const std::string& question, const PolicyAdapter& policy,
                     const ToolSet& tools, const SynthesisConfig& cfg) {
  check_config(cfg);
  Loop loop(question, cfg, tools);

  for (int round = 0; round < cfg.max_rounds; ++round) {
    const std::string prompt = loop.round_prompt();
    std::string response;
    auto emission =
        next_emission(policy, prompt, cfg.parse_retries, &response);
    if (!emission) {
      loop.finish(SynthesisStatus::Malformed);
      return loop.outcome;
    }
    loop.outcome.stats.rounds++;

    if (traj::is_env_action(emission->action)) {
      // env actions exist only in research trajectories
      if (cfg.mode != traj::Mode::Research) {
        loop.finish(SynthesisStatus::Malformed);
        return loop.outcome;
      }
      if (loop.outcome.stats.env_actions >= cfg.env_budget) {
        loop.finish(SynthesisStatus::BudgetExhausted);
        return loop.outcome;
      }
      const bool is_search =
          std::holds_alternative<traj::SearchAction>(emission->action);
      const std::optional<ToolAdapter>& tool =
          is_search ? tools.search : tools.visit;
      if (!tool) {
        loop.finish(SynthesisStatus::Malformed);  // nothing can execute it
        return loop.outcome;
      }
      const std::string observation = tool->request(emission->action);
      loop.engine.apply(emission->action);  // env actions cannot fail here
      loop.append(emission->action, observation, response);
      loop.outcome.stats.env_actions++;
      loop.pending_observation = observation;
      continue;
    }

    if (loop.apply_memory(*emission, response)) return loop.outcome;
  }
  loop.finish(SynthesisStatus::RoundsExhausted);
  return loop.outcome;
}

SynthesisOutcome orchestrate(const std::string& question,
                             const PolicyAdapter& interaction_policy,
                             const PolicyAdapter& governor_policy,
                             const ToolSet& tools,
                             const SynthesisConfig& cfg) {
  check_config(cfg);
  if (cfg.mode != traj::Mode::Research)
    throw std::invalid_argument("orchestrate requires research mode");
  Loop loop(question, cfg, tools);

  for (int round = 0; round < cfg.max_rounds; ++round) {
    const std::string prompt = loop.round_prompt();
    std::string response;
    auto emission = next_emission(interaction_policy, prompt,
                                  cfg.parse_retries, &response);
    if (!emission) {
      loop.finish(SynthesisStatus::Malformed);
      return loop.outcome;
    }
    loop.outcome.stats.rounds++;

    if (traj::is_env_action(emission->action)) {
      if (loop.outcome.stats.env_actions >= cfg.env_budget) {
        loop.finish(SynthesisStatus::BudgetExhausted);
        return loop.outcome;
      }
      const bool is_search =
          std::holds_alternative<traj::SearchAction>(emission->action);
      const std::optional<ToolAdapter>& tool =
          is_search ? tools.search : tools.visit;
      if (!tool) {
        loop.finish(SynthesisStatus::Malformed);
        return loop.outcome;
      }
      const std::string observation = tool->request(emission->action);
      loop.engine.apply(emission->action);
      loop.append(emission->action, observation, response);
      loop.outcome.stats.env_actions++;
      loop.pending_observation = observation;

      if (cfg.consult_governor_each_env_turn &&
          consult_governor(loop, governor_policy, *emission, observation))
        return loop.outcome;
      continue;
    }

    if (loop.apply_memory(*emission, response)) return loop.outcome;
  }
  loop.finish(SynthesisStatus::RoundsExhausted);
  return loop.outcome;
}

}  // namespace ctxkit::synth
