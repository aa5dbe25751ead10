#pragma once

/**
 * Decomposes validated trajectories into context-action training
 * instances: one instance per policy emission, each pairing the question
 * and the scratchpad rendered from the preceding events with the text the
 * policy emitted at that point. Previously committed steps therefore
 * appear as summaries unless an expand left them active, and observations
 * appear in the context, never in targets.
 */

#include <string>
#include <vector>

#include "ctxkit/prompt.hpp"
#include "ctxkit/trajectory.hpp"

namespace ctxkit::exporter {

struct TrainingInstance {
  std::string trajectory_id;
  int step_index = 0;  // 0-based event index within the trajectory
  std::string question;
  std::string context_render;  // scratchpad before this emission
  std::string target;          // the emission
  traj::Mode mode = traj::Mode::Reasoning;

  bool operator==(const TrainingInstance&) const = default;
};

struct ExportConfig {
  bool include_env_turns = true;
  /// Overrides the record's metadata "id"; falls back to "" when neither
  /// is present.
  std::string trajectory_id;
};

/// One instance per emission (env turns skippable). The caller is
/// responsible for admissibility; throws std::runtime_error with the
/// failing index when the record does not replay.
std::vector<TrainingInstance> export_instances(const traj::TrajectoryRecord& rec,
                                               const ExportConfig& cfg = {});

/// The instance's context wrapped in the round-prompt shape; first-round
/// instances (empty context) omit the scratchpad section.
std::string render_instance_prompt(const TrainingInstance& inst,
                                   const prompt::PromptTemplate& tmpl);

/// JSON Lines, one object per instance with fields
/// {trajectory_id, step_index, question, scratchpad, target, mode}.
std::string instances_to_jsonl(const std::vector<TrainingInstance>& instances);

}  // namespace ctxkit::exporter
