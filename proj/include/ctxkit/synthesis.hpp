#pragma once

/**
 * Closed-loop trajectory synthesis: drives a policy against the memory
 * engine and (in research mode) mocked tools, producing trajectory
 * records. The loop re-renders the round prompt from engine state after
 * every action, so a commit genuinely hides the raw reasoning it
 * archived before the policy sees the next prompt.
 *
 * Policies and tools are adapters. Scripted policies and mock tools are
 * pure, so identical runs serialize byte-identically -- the property the
 * determinism suite pins down. Parse failures are retried with the same
 * prompt and never touch engine state; engine rejections end the run
 * with the partial record intact.
 */

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctxkit/engine.hpp"
#include "ctxkit/prompt.hpp"
#include "ctxkit/trajectory.hpp"

namespace ctxkit::synth {

// ============================================================================
// Action-call grammar
// ============================================================================

/// A parsed policy emission: free text before the call (the thought) and
/// the literal call substring.
struct ParsedEmission {
  traj::MemoryAction action;
  std::string thought;
  std::string call_text;
};

struct ActionParseError {
  std::string message;
};

/**
 * Parse one canonical call from a policy response:
 *
 *   commit(raw=<quoted>, summary=<quoted>)
 *   expand(step_id=<int>[, reason=<quoted>])
 *   fold(step_id=<int>[, reason=<quoted>])
 *   answer(<quoted>)
 *   search(query=<quoted>)
 *   visit(url=<quoted>, goal=<quoted>)
 *
 * Free text before the call is tolerated (it becomes the thought); a
 * second call or trailing content is an error. Syntax only: step ids the
 * engine would reject still parse.
 */
std::variant<ParsedEmission, ActionParseError> parse_action(
    std::string_view text);

// ============================================================================
// Adapters
// ============================================================================

struct PolicyAdapter {
  std::string name;
  /// May throw; the loop treats a throwing policy like an unparseable
  /// response (retried, then malformed).
  std::function<std::string(const std::string& prompt)> request;
};

/// Replays responses in order; requests past the end throw.
PolicyAdapter scripted_policy(std::string name,
                              std::vector<std::string> responses);

/// Loads a script from a JSON Lines file of quoted strings.
PolicyAdapter scripted_policy_from_file(const std::filesystem::path& file);

/// POSTs {"prompt": ...} as JSON to the url and expects {"text": ...}.
/// Sends `Authorization: Bearer $CONTEXT_POLICY_TOKEN` when the variable
/// is set.
PolicyAdapter endpoint_policy(const std::string& url);

struct ToolAdapter {
  std::string name;  // "search" | "visit"
  std::function<std::string(const traj::MemoryAction& call)> request;
};

struct ToolSet {
  std::optional<ToolAdapter> search;
  std::optional<ToolAdapter> visit;
};

/// Fixture-backed mock tools: the observation for a call is read from
/// <dir>/<fnv1a64 of the canonical argument key>.txt, falling back to a
/// deterministic placeholder naming the missing fixture.
ToolSet mock_tools(const std::filesystem::path& dir);

/// The fixture key hashed for a call's observation file name.
std::string tool_fixture_key(const traj::MemoryAction& call);
std::string tool_fixture_hash(const traj::MemoryAction& call);

// ============================================================================
// Synthesis loop
// ============================================================================

struct SynthesisConfig {
  int max_rounds = 32;
  int env_budget = 16;     // counts search/visit only
  int parse_retries = 2;   // extra attempts after the first failure
  traj::Mode mode = traj::Mode::Reasoning;
  engine::ExpansionPolicy engine_policy{2, engine::Strictness::Strict};
  std::string prompt_template_id = "default";
  bool consult_governor_each_env_turn = true;
};

enum class SynthesisStatus {
  Answered,
  BudgetExhausted,
  RoundsExhausted,
  Malformed,
  EngineError,
};

std::string_view status_name(SynthesisStatus s);

struct SynthesisStats {
  int rounds = 0;
  int env_actions = 0;
  int mem_actions = 0;
  int violations = 0;
};

struct SynthesisOutcome {
  SynthesisStatus status = SynthesisStatus::Malformed;
  traj::TrajectoryRecord record;  // partial unless answered
  SynthesisStats stats;
  std::optional<engine::EngineError> engine_error;
  int failing_index = -1;
};

/// Single-policy loop. Throws std::invalid_argument on a bad config.
SynthesisOutcome run(const std::string& question, const PolicyAdapter& policy,
                     const ToolSet& tools, const SynthesisConfig& cfg);

/**
 * Two-role research loop: the interaction policy drives env actions and
 * expand/fold; after each completed env turn the governor is consulted
 * with the turn's thought/action/observation and either commits it (its
 * summary archives the turn, whose raw form is the assembled transcript)
 * or defers (any non-commit response).
 */
SynthesisOutcome orchestrate(const std::string& question,
                             const PolicyAdapter& interaction_policy,
                             const PolicyAdapter& governor_policy,
                             const ToolSet& tools,
                             const SynthesisConfig& cfg);

}  // namespace ctxkit::synth
