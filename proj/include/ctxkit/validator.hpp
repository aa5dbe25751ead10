#pragma once

/**
 * Behavioral pruning: trajectory admissibility filtering.
 *
 * A synthesized trajectory is admitted into a training set only when it
 * shows purposeful context management. Six rules, all evaluated (the
 * report never stops at the first failure):
 *
 *   R1  structural    strict-mode engine replay succeeds end-to-end
 *   R2  lifecycle     commit/expand/fold all exercised, one terminal
 *                     answer, judge verdict correct when present
 *   R3  symmetry      every fold reverts a step that is currently
 *                     expanded (reported instead of R1 when the replay
 *                     failure is exactly that)
 *   R4  density       n_expand <= n_commit and
 *                     n_expand + n_fold <= 2 * n_commit
 *   R5  anti-jitter   no adjacent identical expand/expand or fold/fold;
 *                     research mode also rejects adjacent memory actions
 *                     targeting the same step
 *   R6  similarity    consecutive commits must not be near-duplicates
 *                     (token-LCS ratio strictly greater than the
 *                     threshold rejects; exactly at it passes)
 *
 * Violations are data, not errors; validate() is a pure function.
 */

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ctxkit/trajectory.hpp"

namespace ctxkit::pruning {

enum class SimilarityField { Raw, Summary };

struct ValidatorConfig {
  double lcs_threshold = 0.9;  // strictly-greater rejects
  SimilarityField similarity_field = SimilarityField::Raw;
  bool require_use_between_expand_fold = false;
  traj::Mode mode = traj::Mode::Reasoning;
  bool require_judge_correct = true;
};

struct Violation {
  std::string rule_id;  // "R1".."R6"
  std::optional<int> event_index;
  std::string detail;
  bool operator==(const Violation&) const = default;
};

struct ActionCounts {
  int n_commit = 0;
  int n_expand = 0;
  int n_fold = 0;
  bool operator==(const ActionCounts&) const = default;
};

struct AdmissibilityReport {
  bool admissible = false;  // true iff violations is empty
  std::vector<Violation> violations;
  ActionCounts counts;

  /// Distinct rule ids present, in ascending order.
  std::vector<std::string> rule_ids() const;
};

/// Token-level longest-common-subsequence ratio over whitespace tokens,
/// normalized by the longer sequence. Symmetric; 1.0 iff the token
/// sequences are identical; both empty -> 1.0, exactly one empty -> 0.0.
/// Callers normalize the text first (validate applies normalize_text).
double lcs_ratio(std::string_view a, std::string_view b);

/// Density rule in isolation; empty iff both bounds hold.
std::vector<Violation> check_density(const ActionCounts& counts);

/// Evaluate every rule against the record. The config's mode selects the
/// research-only checks; the record's own mode is not consulted so the
/// same file can be screened under either ruleset.
AdmissibilityReport validate(const traj::TrajectoryRecord& rec,
                             const ValidatorConfig& cfg = {});

/// Report as a stable JSON object (single line).
std::string report_to_json(const AdmissibilityReport& report);

/// Human-readable multi-line rendering of the report.
std::string report_to_text(const AdmissibilityReport& report);

}  // namespace ctxkit::pruning
