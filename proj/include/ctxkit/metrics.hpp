#pragma once

/**
 * Inference-efficiency metrics over decode schedules and trajectories.
 *
 * A decode schedule lists, per generated token, the number of tokens
 * present in the context at that step (the token being generated
 * included). Two scalar views of it:
 *
 *   dependency  cumulative context over the whole generation -- the area
 *               under the context-vs-generated-tokens curve
 *   peak        the maximum context reached at any single step
 *
 * The two are deliberately decoupled: schedules can share a peak and
 * differ in dependency and vice versa. Closed forms use the continuous
 * trapezoid geometry; simulators use discrete sums. The conventions
 * differ by exactly L_O/2 for the uniform-growth schedule (a generated
 * token counts itself), which is asserted, not hidden.
 *
 * All dependency values in play are integers or half-integers and are
 * exact in binary floating point; tests compare them with ==.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxkit/prompt.hpp"
#include "ctxkit/trajectory.hpp"

namespace ctxkit::metrics {

/// Per-generated-token visible context sizes, self-inclusive.
struct DecodeSchedule {
  std::vector<std::int64_t> contexts;
};

struct ScheduleParams {
  std::int64_t prompt_len = 0;        // L_P
  std::int64_t output_len = 0;        // L_O
  std::int64_t cache_limit = 0;       // L_C, eviction mode only
  std::int64_t segment_len = 0;       // compression mode
  std::int64_t cache_size = 0;        // |C| retained per compressed segment
  std::int64_t anchor_len = 1;        // resume-token overhead per segment
  bool count_compression_passes = true;  // include boundary forward passes
};

// ============================================================================
// Dependency and peak
// ============================================================================

/// Sum of all schedule entries. Throws std::invalid_argument on empty.
double dependency_stepwise(const DecodeSchedule& s);

/// Closed form for unmanaged decoding: L_O^2/2 + L_P*L_O.
double dependency_vanilla(std::int64_t prompt_len, std::int64_t output_len);

/// Closed form for a fixed cache limit (grow-then-flat curve): the left
/// trapezoid plus the flat rectangle, (2*L_P*L_C + 2*L_O*L_C - L_P^2 -
/// L_C^2)/2. Falls back to the vanilla form when the cache never fills
/// (L_O < L_C - L_P). Throws when cache_limit < prompt_len.
double dependency_h2o(std::int64_t prompt_len, std::int64_t cache_limit,
                      std::int64_t output_len);

/// Largest schedule entry. Throws std::invalid_argument on empty.
std::int64_t peak(const DecodeSchedule& s);

/// dep_base / dep_method. Throws on a non-positive denominator.
double compression_ratio(double dep_base, double dep_method);

// ============================================================================
// Schedule simulators
// ============================================================================

/// Uniform growth: entry j is prompt_len + j for j = 1..output_len.
DecodeSchedule vanilla_schedule(std::int64_t prompt_len,
                                std::int64_t output_len);

/// Growth capped at cache_limit: entry j is min(prompt_len + j, cache_limit).
DecodeSchedule h2o_schedule(std::int64_t prompt_len, std::int64_t cache_limit,
                            std::int64_t output_len);

/**
 * Gist-style compression schedule. Generation proceeds in segments of
 * segment_len tokens. While a segment is open, context grows token by
 * token above the compressed base. When a segment fills and output
 * remains, the boundary runs cache_size + anchor_len compression passes
 * (counted as schedule entries when count_compression_passes is set, each
 * seeing base + segment_len + its position), after which the segment's
 * tokens leave the context and the base grows by cache_size + anchor_len.
 * The final partial segment is never compressed.
 *
 * Requires segment_len > cache_size + anchor_len.
 */
DecodeSchedule compress_schedule(const ScheduleParams& p);

// ============================================================================
// Trajectory-level metrics
// ============================================================================

/// Per-round active context: tokens of the rendered input plus tokens of
/// the emitted output, one entry per event. The input at round t is the
/// round prompt built from the question, the scratchpad after events
/// [0..t) and the observation attached to event t-1 when there is one.
/// Throws std::runtime_error when the record does not replay.
std::vector<std::int64_t> active_context_series(
    const traj::TrajectoryRecord& rec, const traj::TokenCounter& counter,
    const prompt::PromptTemplate& tmpl);

struct ActionDistribution {
  int commit = 0;
  int expand = 0;
  int fold = 0;
  int env = 0;
  /// Fractions of commit/expand/fold over memory actions only; absent
  /// when the trajectory has no memory actions.
  std::optional<double> commit_ratio;
  std::optional<double> expand_ratio;
  std::optional<double> fold_ratio;
};

ActionDistribution action_distribution(const traj::TrajectoryRecord& rec);

struct Histogram {
  std::vector<std::int64_t> bin_edges;  // n+1 edges define n bins
  std::vector<std::int64_t> counts;     // clamped at both ends
  double mean = 0.0;
  std::int64_t total = 0;
};

/// Token length of every commit's raw text, binned. Edges must be
/// strictly increasing; out-of-range values clamp into the end bins so
/// the total always equals the commit count.
Histogram pre_commit_length_stats(const std::vector<traj::TrajectoryRecord>& recs,
                                  const traj::TokenCounter& counter,
                                  const std::vector<std::int64_t>& bin_edges);

struct SegmentLengthStats {
  std::map<std::int64_t, std::int64_t> counts;  // character length -> count
  std::int64_t peak_length = 0;                 // modal length
  std::int64_t total_segments = 0;
};

/// Character-length distribution of delimiter-separated segments.
/// Throws std::invalid_argument on an empty delimiter.
SegmentLengthStats segment_length_stats(const std::vector<std::string>& texts,
                                        std::string_view delimiter);

struct BudgetedResult {
  bool success = false;
  int env_actions = 0;
};

struct BudgetPoint {
  int budget = 0;
  double accuracy = 0.0;
};

/// For each budget b: the fraction of results that succeeded using at
/// most b environment actions. Monotone non-decreasing in b. Throws on
/// empty results.
std::vector<BudgetPoint> acc_at_budget(const std::vector<BudgetedResult>& results,
                                       const std::vector<int>& budgets);

// ============================================================================
// CSV emission
// ============================================================================

/// "step,context" header plus one row per schedule entry.
std::string schedule_to_csv(const DecodeSchedule& s);

/// "budget,accuracy" header plus one row per point.
std::string curve_to_csv(const std::vector<BudgetPoint>& curve);

}  // namespace ctxkit::metrics
