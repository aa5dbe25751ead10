#pragma once

/**
 * Training-data preparation for gist-token compression: segmentation,
 * special-token insertion, attention-mask and label-mask construction,
 * and reachability-based verification of the information-flow rules.
 *
 * A laid-out sample is question tokens followed by thought segments with
 * a compressed block (optional trigger, cache tokens, resume anchor)
 * between neighbours; the final segment carries no trailing block. The
 * mask encodes, per position role:
 *
 *   question  causal within the question
 *   thought   question + every earlier cache/anchor block + causal
 *             within its own segment; never an earlier thought
 *   cache     question + earlier cache/anchor blocks + the whole current
 *             segment + causal within the cache block
 *   anchor    question + earlier cache/anchor blocks + the current cache
 *             block + causal within the anchor block; never the segment
 *             it follows
 *
 * The trigger token counts as the last token of its segment and is a
 * prediction target; cache and anchor tokens are structural placeholders
 * and are not. Everything here is pure and deterministic.
 */

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxkit::mask {

// ============================================================================
// Layout
// ============================================================================

struct SegmentSpec {
  int body_len = 0;          // tokens excluding the trigger
  bool has_trigger = false;  // trailing compression-trigger token
};

struct SegmentLayout {
  int x_len = 0;  // question tokens
  std::vector<SegmentSpec> segments;
  int cache_size = 0;
  int anchor_len = 1;
};

/// Total positions of the laid-out sample.
int layout_width(const SegmentLayout& layout);

/// Throws std::invalid_argument when the layout breaks an invariant
/// (empty question/segment, non-positive cache, trigger on the final
/// segment, anchor_len < 1).
void check_layout(const SegmentLayout& layout);

/// Compact text form `x=<n>;seg=<n!t|n>,...;c=<n>;o=<n>` where the
/// segment length n includes its trigger when `!t` is present and `o=`
/// may be omitted (defaults to 1).
SegmentLayout parse_layout(std::string_view descriptor);

// ============================================================================
// Segmentation and reconstruction
// ============================================================================

enum class SegmentLevel { Thought, Token };

struct Segment {
  std::vector<std::string> tokens;  // opaque; one entry per position
  std::string text;
};

struct SegmentParams {
  std::string delimiter = "\n\n";  // thought level
  int window = 6;                  // token level
};

/// Thought level splits on the delimiter, keeping the delimiter text at
/// segment ends so concatenating segment texts reproduces the input; each
/// thought becomes a single opaque token. Token level chunks the
/// whitespace token stream into windows (last chunk may be shorter).
/// Throws on empty input or window < 2.
std::vector<Segment> segment_text(std::string_view y, SegmentLevel level,
                                  const SegmentParams& params = {});

enum class Role { Question, Thought, Trigger, Cache, Anchor };

struct Position {
  Role role;
  int segment_index = 0;  // 0 for the question, 1-based otherwise
  std::string token;
  bool operator==(const Position&) const = default;
};

struct AugmentedSequence {
  std::vector<Position> positions;
};

/// Insert the special tokens between neighbouring segments: a trigger
/// "<w>" when requested, cache tokens "[c1]".."[cN]", then the anchor(s)
/// "[o]". Nothing follows the final segment. A single question
/// placeholder position leads the sequence. Throws on zero segments or
/// cache_size < 1.
AugmentedSequence reconstruct(const std::vector<Segment>& segments,
                              int cache_size, int anchor_len,
                              bool insert_trigger);

/// Layout whose block lengths match the augmented sequence.
SegmentLayout layout_of(const AugmentedSequence& seq);

// ============================================================================
// Masks
// ============================================================================

/// Row-major w*w boolean matrix; entry (q, s) says whether the query
/// position q may attend the key position s.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(int width) : width_(width), bits_(width * width, 0) {}

  int width() const { return width_; }
  bool at(int q, int s) const { return bits_[idx(q, s)] != 0; }
  void set(int q, int s, bool v) { bits_[idx(q, s)] = v ? 1 : 0; }

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t idx(int q, int s) const {
    return static_cast<std::size_t>(q) * width_ + s;
  }
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// True on prediction-target positions (thoughts and triggers).
struct LabelMask {
  std::vector<bool> targets;
};

AttentionMask build_attention_mask(const SegmentLayout& layout);

LabelMask build_label_mask(const SegmentLayout& layout);

/// Role of each position, in order.
std::vector<Role> layout_roles(const SegmentLayout& layout);

/// Reflexive-transitive closure of the attention edges: (q, s) is set
/// when information at s can influence q through any chain of edges.
AttentionMask reachability(const AttentionMask& mask);

struct MaskCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct MaskReport {
  std::vector<MaskCheck> checks;
  bool all_pass() const;
};

/// Checks causal-subset, diagonal, non-empty rows, exact per-role block
/// rules, and cache isolation (removing block j's cache/anchor positions
/// disconnects its segment from every later segment in the closure).
MaskReport verify_invariants(const AttentionMask& mask,
                             const SegmentLayout& layout);

// ============================================================================
// Emission
// ============================================================================

/// One row per line of comma-separated 0/1 values.
std::string mask_to_csv(const AttentionMask& mask);

/// Portable bitmap (P1); set bits render black.
std::string mask_to_pbm(const AttentionMask& mask);

/// Single row of comma-separated 0/1 values.
std::string label_mask_to_csv(const LabelMask& mask);

/// P1 bitmap of height 1.
std::string label_mask_to_pbm(const LabelMask& mask);

}  // namespace ctxkit::mask
