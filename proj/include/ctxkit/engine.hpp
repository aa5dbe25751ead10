#pragma once

/**
 * Memory engine: the stateful managed context behind the scratchpad.
 *
 * Reasoning history is an ordered sequence of dual-form entities. Each
 * entity projects either its summary (archive) or its raw form (active);
 * the projection is toggled exclusively through memory actions:
 *
 *   commit(raw, summary)  append entity K+1, archived
 *   expand(k)             sigma_k := active
 *   fold(k)               sigma_k := archive
 *   answer(text)          freeze the context
 *
 * Environment actions (search/visit) pass through without mutating state.
 * Invalid actions are rejected as values (EngineError), never applied
 * partially. A context is mutated single-threaded; independent contexts
 * are safe to own on different threads.
 */

#include <optional>
#include <string>
#include <vector>

#include "ctxkit/trajectory.hpp"

namespace ctxkit::engine {

enum class Strictness { Warn, Strict };

struct ExpansionPolicy {
  int max_expanded = 2;  // guidance limit on simultaneously active entities
  Strictness strictness = Strictness::Warn;
};

struct EngineError {
  enum class Kind {
    UnknownStep,
    FoldNotExpanded,
    AlreadyActive,
    Terminated,
    EmptySummary,
    PolicyViolation,
  };
  Kind kind;
  int step_id = 0;  // UnknownStep / FoldNotExpanded / AlreadyActive
  int limit = 0;    // PolicyViolation

  std::string describe() const;
  bool operator==(const EngineError&) const = default;
};

struct PolicyWarning {
  int event_index = 0;  // 0-based index of the offending action
  std::string kind;
  bool operator==(const PolicyWarning&) const = default;
};

class ManagedContext {
 public:
  /// Throws std::invalid_argument when max_expanded < 1.
  explicit ManagedContext(ExpansionPolicy policy = {});

  /**
   * Apply one action. Returns nullopt on success, the rejection otherwise;
   * the context is untouched on rejection. Search/visit succeed without
   * mutating state (they become part of the next committed turn's raw
   * form). In warn mode an over-limit expand is applied and logged.
   */
  std::optional<EngineError> apply(const traj::MemoryAction& action);

  /// Commit a pre-assembled entity (synthesis path for TAO turns). The
  /// entity's index and visibility are assigned by the engine.
  std::optional<EngineError> apply_commit_entity(traj::ReasoningEntity entity);

  /// Z_k if archived, R_k if active. Throws std::out_of_range on bad k.
  const std::string& projection(int k) const;

  /**
   * The rendered scratchpad: entities joined by exactly one blank line.
   *   archived:  `[Step {k}] {summary}`
   *   active:    `[Step {k}] (expanded)` + newline + raw form
   * TAO turns lay their raw form out as Thought/Action/Observation lines,
   * which make_tao_raw already guarantees for replayed commits.
   */
  std::string render() const;

  int entity_count() const { return static_cast<int>(entities_.size()); }
  int active_count() const;
  bool terminated() const { return terminated_; }
  const std::vector<traj::ReasoningEntity>& entities() const {
    return entities_;
  }
  const std::vector<PolicyWarning>& violations() const { return violations_; }
  const ExpansionPolicy& policy() const { return policy_; }

  /// Number of apply calls seen so far (indexes the violation log).
  int events_seen() const { return events_seen_; }

 private:
  std::optional<EngineError> check_and_mark(const traj::MemoryAction& action);

  std::vector<traj::ReasoningEntity> entities_;
  bool terminated_ = false;
  ExpansionPolicy policy_;
  std::vector<PolicyWarning> violations_;
  int events_seen_ = 0;
};

struct ReplayResult {
  ManagedContext context;
  std::optional<EngineError> error;
  int failing_index = -1;  // 0-based event index of the first rejection

  bool ok() const { return !error.has_value(); }
};

/// Fold apply over the sequence, stopping at the first rejection.
ReplayResult replay(const std::vector<traj::MemoryAction>& actions,
                    ExpansionPolicy policy = {});

/// Replay a record's events (actions only; observations ride along in the
/// record, not in engine state).
ReplayResult replay(const traj::TrajectoryRecord& rec,
                    ExpansionPolicy policy = {});

/// Render of the context produced by replaying the first `prefix_len`
/// events of the record. Throws std::runtime_error on replay failure.
std::string render_prefix(const traj::TrajectoryRecord& rec,
                          std::size_t prefix_len,
                          ExpansionPolicy policy = {});

}  // namespace ctxkit::engine
