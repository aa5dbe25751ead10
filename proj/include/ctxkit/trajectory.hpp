#pragma once

/**
 * Trajectory model: canonical data types and bit-exact (de)serialization for
 * memory-managed reasoning trajectories.
 *
 * A trajectory is a question plus an ordered log of actions the policy
 * emitted while solving it. Memory actions (commit/expand/fold/answer)
 * drive the managed scratchpad; environment actions (search/visit) carry
 * the observation they produced. Records are immutable values once built;
 * parsing and serialization are pure and round-trip bit-exactly on
 * canonical documents.
 *
 * File format: UTF-8 JSON Lines. Line 1 is the header object, every
 * following line is one event object. Absent optionals are omitted, never
 * null. See serialize_trajectory() for the canonical field order.
 */

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ctxkit::traj {

// ============================================================================
// Entities
// ============================================================================

enum class EntityKind { ReasoningStep, TaoTurn };

enum class Visibility { Archive, Active };

/**
 * One instantiated reasoning step: a dual-form container holding the full
 * raw derivation and its semantic summary, plus the visibility state that
 * selects which form the managed context projects.
 *
 * For TaoTurn entities the thought/action_text/observation fields are
 * present and `raw` carries their canonical transcript (see make_tao_raw).
 */
struct ReasoningEntity {
  int index = 0;  // 1-based step id, unique within a context
  std::string raw;
  std::string summary;
  EntityKind kind = EntityKind::ReasoningStep;
  std::optional<std::string> thought;
  std::optional<std::string> action_text;
  std::optional<std::string> observation;
  Visibility visibility = Visibility::Archive;

  bool operator==(const ReasoningEntity&) const = default;
};

/// Canonical transcript layout of a thought-action-observation turn.
std::string make_tao_raw(std::string_view thought, std::string_view action,
                         std::string_view observation);

// ============================================================================
// Actions
// ============================================================================

struct CommitAction {
  std::string raw;
  std::string summary;
  bool operator==(const CommitAction&) const = default;
};

struct ExpandAction {
  int step_id = 0;
  std::optional<std::string> reason;
  bool operator==(const ExpandAction&) const = default;
};

struct FoldAction {
  int step_id = 0;
  std::optional<std::string> reason;
  bool operator==(const FoldAction&) const = default;
};

struct AnswerAction {
  std::string text;  // non-empty
  bool operator==(const AnswerAction&) const = default;
};

struct SearchAction {
  std::string query;
  bool operator==(const SearchAction&) const = default;
};

struct VisitAction {
  std::string url;
  std::string goal;
  bool operator==(const VisitAction&) const = default;
};

using MemoryAction = std::variant<CommitAction, ExpandAction, FoldAction,
                                  AnswerAction, SearchAction, VisitAction>;

/// Wire name of the action variant ("commit", "expand", ...).
std::string_view action_name(const MemoryAction& a);

/// True for search/visit, the environment-facing actions.
bool is_env_action(const MemoryAction& a);

/// True for commit/expand/fold, the scratchpad-mutating actions.
bool is_memory_action(const MemoryAction& a);

/// Step id targeted by expand/fold; nullopt for the other variants.
std::optional<int> target_step(const MemoryAction& a);

/// Canonical call text, e.g. `commit(raw="...", summary="...")`.
/// Matches the grammar accepted by synth::parse_action.
std::string canonical_call(const MemoryAction& a);

// ============================================================================
// Records
// ============================================================================

enum class Mode { Reasoning, Research };

std::string_view mode_name(Mode m);

struct JudgeVerdict {
  bool correct = false;
  std::string judge_name;
  bool operator==(const JudgeVerdict&) const = default;
};

/// One policy emission: the parsed action, the observation it produced
/// (env actions only), and the raw emitted text that produced it.
struct TrajectoryEvent {
  MemoryAction action;
  std::optional<std::string> observation;
  std::string emitted_text;
  bool operator==(const TrajectoryEvent&) const = default;
};

/**
 * A complete trajectory: question, ordered event log, optional ground
 * truth and judge verdict. The unit of validation, metrics and export.
 *
 * Invariants: at most one answer event and it is last; exactly the
 * search/visit events carry observations.
 */
struct TrajectoryRecord {
  std::string version = "1";
  Mode mode = Mode::Reasoning;
  std::string question;
  std::vector<TrajectoryEvent> events;
  std::optional<std::string> ground_truth;
  std::optional<JudgeVerdict> judge;
  std::map<std::string, std::string> metadata;

  bool operator==(const TrajectoryRecord&) const = default;
};

// ============================================================================
// Parse / serialize
// ============================================================================

/// Parse failure; `line` is 1-based within the document.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Raised by serialize_trajectory when the record violates its invariants.
class InvariantError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parse a JSON Lines trajectory document. Event order is preserved;
/// unknown metadata keys survive. Throws ParseError with the offending
/// line number.
TrajectoryRecord parse_trajectory(std::string_view bytes);

/// Serialize to the canonical form: documented field order, one event per
/// line, trailing newline. Throws InvariantError; never emits partial
/// output.
std::string serialize_trajectory(const TrajectoryRecord& rec);

/// Lowercase, strip, collapse internal whitespace runs to single spaces.
/// Idempotent.
std::string normalize_text(std::string_view t);

/// Split on whitespace runs. normalize_text(t) == join(tokens(t), " ")
/// modulo case.
std::vector<std::string> whitespace_tokens(std::string_view t);

// ============================================================================
// Token counters
// ============================================================================

/**
 * Named pure text->count function. All token-denominated metrics are
 * parametric in the counter because real tokenizers are model-specific;
 * these are documented proxies, not any model's tokenizer.
 */
struct TokenCounter {
  std::string name;
  std::function<std::size_t(std::string_view)> count;
};

/// Counts whitespace-delimited tokens; "" -> 0.
TokenCounter whitespace_counter();

/// Counts bytes; "" -> 0.
TokenCounter char_counter();

/// Lookup by name ("whitespace" | "chars"); throws std::invalid_argument.
TokenCounter counter_by_name(std::string_view name);

}  // namespace ctxkit::traj
