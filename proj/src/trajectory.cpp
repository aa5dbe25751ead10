#include "ctxkit/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "json.hpp"

namespace ctxkit::traj {

using ordered_json = nlohmann::ordered_json;

std::string make_tao_raw(std::string_view thought, std::string_view action,
                         std::string_view observation) {
  std::string out;
  out.reserve(thought.size() + action.size() + observation.size() + 40);
  out += "Thought: ";
  out += thought;
  out += "\nAction: ";
  out += action;
  out += "\nObservation: ";
  out += observation;
  return out;
}

std::string_view action_name(const MemoryAction& a) {
  struct Namer {
    std::string_view operator()(const CommitAction&) { return "commit"; }
    std::string_view operator()(const ExpandAction&) { return "expand"; }
    std::string_view operator()(const FoldAction&) { return "fold"; }
    std::string_view operator()(const AnswerAction&) { return "answer"; }
    std::string_view operator()(const SearchAction&) { return "search"; }
    std::string_view operator()(const VisitAction&) { return "visit"; }
  };
  return std::visit(Namer{}, a);
}

bool is_env_action(const MemoryAction& a) {
  return std::holds_alternative<SearchAction>(a) ||
         std::holds_alternative<VisitAction>(a);
}

bool is_memory_action(const MemoryAction& a) {
  return std::holds_alternative<CommitAction>(a) ||
         std::holds_alternative<ExpandAction>(a) ||
         std::holds_alternative<FoldAction>(a);
}

std::optional<int> target_step(const MemoryAction& a) {
  if (const auto* e = std::get_if<ExpandAction>(&a)) return e->step_id;
  if (const auto* f = std::get_if<FoldAction>(&a)) return f->step_id;
  return std::nullopt;
}

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

}  // namespace

std::string canonical_call(const MemoryAction& a) {
  struct Caller {
    std::string operator()(const CommitAction& c) {
      return "commit(raw=" + quote(c.raw) + ", summary=" + quote(c.summary) +
             ")";
    }
    std::string operator()(const ExpandAction& e) {
      std::string out = "expand(step_id=" + std::to_string(e.step_id);
      if (e.reason) out += ", reason=" + quote(*e.reason);
      return out + ")";
    }
    std::string operator()(const FoldAction& f) {
      std::string out = "fold(step_id=" + std::to_string(f.step_id);
      if (f.reason) out += ", reason=" + quote(*f.reason);
      return out + ")";
    }
    std::string operator()(const AnswerAction& ans) {
      return "answer(" + quote(ans.text) + ")";
    }
    std::string operator()(const SearchAction& s) {
      return "search(query=" + quote(s.query) + ")";
    }
    std::string operator()(const VisitAction& v) {
      return "visit(url=" + quote(v.url) + ", goal=" + quote(v.goal) + ")";
    }
  };
  return std::visit(Caller{}, a);
}

std::string_view mode_name(Mode m) {
  return m == Mode::Reasoning ? "reasoning" : "research";
}

// ============================================================================
// Parsing
// ============================================================================

namespace {

std::string require_string(const ordered_json& obj, const char* key,
                           int line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(line, std::string("missing required field \"") + key +
                               "\"");
  if (!it->is_string())
    throw ParseError(line, std::string("field \"") + key +
                               "\" must be a string");
  return it->get<std::string>();
}

int require_int(const ordered_json& obj, const char* key, int line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(line, std::string("missing required field \"") + key +
                               "\"");
  if (!it->is_number_integer())
    throw ParseError(line, std::string("field \"") + key +
                               "\" must be an integer");
  return it->get<int>();
}

std::optional<std::string> optional_string(const ordered_json& obj,
                                           const char* key, int line) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string())
    throw ParseError(line, std::string("field \"") + key +
                               "\" must be a string");
  return it->get<std::string>();
}

MemoryAction parse_action_object(const ordered_json& obj, int line) {
  const std::string name = require_string(obj, "action", line);
  if (name == "commit") {
    return CommitAction{require_string(obj, "raw", line),
                        require_string(obj, "summary", line)};
  }
  if (name == "expand") {
    return ExpandAction{require_int(obj, "step_id", line),
                        optional_string(obj, "reason", line)};
  }
  if (name == "fold") {
    return FoldAction{require_int(obj, "step_id", line),
                      optional_string(obj, "reason", line)};
  }
  if (name == "answer") {
    std::string text = require_string(obj, "text", line);
    if (text.empty()) throw ParseError(line, "answer text must be non-empty");
    return AnswerAction{std::move(text)};
  }
  if (name == "search") {
    return SearchAction{require_string(obj, "query", line)};
  }
  if (name == "visit") {
    return VisitAction{require_string(obj, "url", line),
                       require_string(obj, "goal", line)};
  }
  throw ParseError(line, "unknown action name \"" + name + "\"");
}

}  // namespace

TrajectoryRecord parse_trajectory(std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(bytes.substr(start));
      break;
    }
    lines.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw ParseError(1, "empty document");

  auto parse_json_line = [](std::string_view text, int line) -> ordered_json {
    ordered_json obj;
    try {
      obj = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("malformed line: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
    return obj;
  };

  const ordered_json header = parse_json_line(lines[0], 1);

  TrajectoryRecord rec;
  rec.version = require_string(header, "version", 1);
  if (rec.version != "1")
    throw ParseError(1, "unknown version \"" + rec.version + "\"");
  const std::string mode = require_string(header, "mode", 1);
  if (mode == "reasoning") {
    rec.mode = Mode::Reasoning;
  } else if (mode == "research") {
    rec.mode = Mode::Research;
  } else {
    throw ParseError(1, "unknown mode \"" + mode + "\"");
  }
  rec.question = require_string(header, "question", 1);
  rec.ground_truth = optional_string(header, "ground_truth", 1);
  if (auto it = header.find("judge"); it != header.end()) {
    if (!it->is_object()) throw ParseError(1, "field \"judge\" must be an object");
    JudgeVerdict v;
    auto cit = it->find("correct");
    if (cit == it->end() || !cit->is_boolean())
      throw ParseError(1, "judge requires a boolean \"correct\" field");
    v.correct = cit->get<bool>();
    v.judge_name = require_string(*it, "judge_name", 1);
    rec.judge = v;
  }
  if (auto it = header.find("metadata"); it != header.end()) {
    if (!it->is_object())
      throw ParseError(1, "field \"metadata\" must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string())
        throw ParseError(1, "metadata values must be strings");
      rec.metadata.emplace(k, v.get<std::string>());
    }
  }

  bool saw_answer = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    if (lines[i].empty()) throw ParseError(line, "blank line");
    const ordered_json obj = parse_json_line(lines[i], line);

    TrajectoryEvent ev;
    ev.action = parse_action_object(obj, line);
    if (std::holds_alternative<AnswerAction>(ev.action)) {
      if (saw_answer) throw ParseError(line, "duplicate answer event");
      saw_answer = true;
    } else if (saw_answer) {
      throw ParseError(line, "event after answer");
    }
    if (is_env_action(ev.action) && rec.mode != Mode::Research)
      throw ParseError(line,
                       "search/visit appear only in research trajectories");
    ev.observation = optional_string(obj, "observation", line);
    if (is_env_action(ev.action) && !ev.observation)
      throw ParseError(line, "search/visit events require an observation");
    if (!is_env_action(ev.action) && ev.observation)
      throw ParseError(line, "memory actions carry no observation");
    ev.emitted_text = require_string(obj, "emitted_text", line);
    rec.events.push_back(std::move(ev));
  }
  return rec;
}

// ============================================================================
// Serialization
// ============================================================================

namespace {

void check_record_invariants(const TrajectoryRecord& rec) {
  if (rec.version != "1")
    throw InvariantError("unknown version \"" + rec.version + "\"");
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const TrajectoryEvent& ev = rec.events[i];
    if (std::holds_alternative<AnswerAction>(ev.action)) {
      if (i + 1 != rec.events.size())
        throw InvariantError("answer event must be last");
      if (std::get<AnswerAction>(ev.action).text.empty())
        throw InvariantError("answer text must be non-empty");
    }
    if (is_env_action(ev.action) && rec.mode != Mode::Research)
      throw InvariantError("search/visit appear only in research trajectories");
    if (is_env_action(ev.action) && !ev.observation)
      throw InvariantError("search/visit events require an observation");
    if (!is_env_action(ev.action) && ev.observation)
      throw InvariantError("memory actions carry no observation");
  }
}

ordered_json action_to_json(const MemoryAction& a) {
  ordered_json obj;
  obj["action"] = std::string(action_name(a));
  struct Fields {
    ordered_json& obj;
    void operator()(const CommitAction& c) {
      obj["raw"] = c.raw;
      obj["summary"] = c.summary;
    }
    void operator()(const ExpandAction& e) {
      obj["step_id"] = e.step_id;
      if (e.reason) obj["reason"] = *e.reason;
    }
    void operator()(const FoldAction& f) {
      obj["step_id"] = f.step_id;
      if (f.reason) obj["reason"] = *f.reason;
    }
    void operator()(const AnswerAction& ans) { obj["text"] = ans.text; }
    void operator()(const SearchAction& s) { obj["query"] = s.query; }
    void operator()(const VisitAction& v) {
      obj["url"] = v.url;
      obj["goal"] = v.goal;
    }
  };
  std::visit(Fields{obj}, a);
  return obj;
}

}  // namespace

std::string serialize_trajectory(const TrajectoryRecord& rec) {
  check_record_invariants(rec);

  ordered_json header;
  header["version"] = rec.version;
  header["mode"] = std::string(mode_name(rec.mode));
  header["question"] = rec.question;
  if (rec.ground_truth) header["ground_truth"] = *rec.ground_truth;
  if (rec.judge) {
    ordered_json j;
    j["correct"] = rec.judge->correct;
    j["judge_name"] = rec.judge->judge_name;
    header["judge"] = j;
  }
  header["metadata"] = ordered_json::object();
  for (const auto& [k, v] : rec.metadata) header["metadata"][k] = v;

  std::string out = header.dump();
  out += '\n';
  for (const TrajectoryEvent& ev : rec.events) {
    ordered_json obj = action_to_json(ev.action);
    if (ev.observation) obj["observation"] = *ev.observation;
    obj["emitted_text"] = ev.emitted_text;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

// ============================================================================
// Text utilities
// ============================================================================

std::string normalize_text(std::string_view t) {
  std::string out;
  out.reserve(t.size());
  bool in_ws = true;  // leading whitespace is dropped
  for (char c : t) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out += ' ';
    in_ws = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> whitespace_tokens(std::string_view t) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < t.size()) {
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    std::size_t start = i;
    while (i < t.size() && !std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (i > start) tokens.emplace_back(t.substr(start, i - start));
  }
  return tokens;
}

TokenCounter whitespace_counter() {
  return TokenCounter{
      "whitespace",
      [](std::string_view s) { return whitespace_tokens(s).size(); }};
}

TokenCounter char_counter() {
  return TokenCounter{"chars", [](std::string_view s) { return s.size(); }};
}

TokenCounter counter_by_name(std::string_view name) {
  if (name == "whitespace") return whitespace_counter();
  if (name == "chars") return char_counter();
  throw std::invalid_argument("unknown token counter \"" + std::string(name) +
                              "\"");
}

}  // namespace ctxkit::traj
