#include "ctxkit/mask.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "ctxkit/trajectory.hpp"

namespace ctxkit::mask {

int layout_width(const SegmentLayout& layout) {
  int w = layout.x_len;
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    const SegmentSpec& seg = layout.segments[i];
    w += seg.body_len + (seg.has_trigger ? 1 : 0);
    if (i + 1 < layout.segments.size())
      w += layout.cache_size + layout.anchor_len;
  }
  return w;
}

void check_layout(const SegmentLayout& layout) {
  if (layout.x_len < 1)
    throw std::invalid_argument("layout requires x_len >= 1");
  if (layout.segments.empty())
    throw std::invalid_argument("layout requires at least one segment");
  if (layout.cache_size < 1)
    throw std::invalid_argument("layout requires cache_size >= 1");
  if (layout.anchor_len < 1)
    throw std::invalid_argument("layout requires anchor_len >= 1");
  for (const SegmentSpec& seg : layout.segments)
    if (seg.body_len < 1)
      throw std::invalid_argument("every segment body must be >= 1 token");
  if (layout.segments.back().has_trigger)
    throw std::invalid_argument("the final segment carries no trigger");
}

namespace {

int parse_int(std::string_view text, const char* what) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::invalid_argument(std::string("bad ") + what +
                                " in layout descriptor");
  return value;
}

}  // namespace

SegmentLayout parse_layout(std::string_view descriptor) {
  SegmentLayout layout;
  layout.anchor_len = 1;
  bool saw_x = false, saw_seg = false, saw_c = false;

  std::size_t start = 0;
  while (start <= descriptor.size()) {
    std::size_t end = descriptor.find(';', start);
    if (end == std::string_view::npos) end = descriptor.size();
    const std::string_view field = descriptor.substr(start, end - start);
    start = end + 1;
    if (field.empty()) {
      if (start > descriptor.size()) break;
      continue;
    }
    const std::size_t eq = field.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("layout field without '='");
    const std::string_view key = field.substr(0, eq);
    const std::string_view value = field.substr(eq + 1);
    if (key == "x") {
      layout.x_len = parse_int(value, "x");
      saw_x = true;
    } else if (key == "c") {
      layout.cache_size = parse_int(value, "c");
      saw_c = true;
    } else if (key == "o") {
      layout.anchor_len = parse_int(value, "o");
    } else if (key == "seg") {
      std::size_t s = 0;
      while (s <= value.size()) {
        std::size_t comma = value.find(',', s);
        if (comma == std::string_view::npos) comma = value.size();
        std::string_view item = value.substr(s, comma - s);
        s = comma + 1;
        if (item.empty())
          throw std::invalid_argument("empty segment in layout descriptor");
        SegmentSpec spec;
        if (item.size() > 2 && item.substr(item.size() - 2) == "!t") {
          spec.has_trigger = true;
          item = item.substr(0, item.size() - 2);
          // n counts the trigger; the body is one shorter
          spec.body_len = parse_int(item, "segment length") - 1;
        } else {
          spec.body_len = parse_int(item, "segment length");
        }
        layout.segments.push_back(spec);
        if (comma == value.size()) break;
      }
      saw_seg = true;
    } else {
      throw std::invalid_argument("unknown layout field \"" +
                                  std::string(key) + "\"");
    }
    if (end == descriptor.size()) break;
  }
  if (!saw_x || !saw_seg || !saw_c)
    throw std::invalid_argument("layout descriptor requires x=, seg= and c=");
  check_layout(layout);
  return layout;
}

std::vector<Segment> segment_text(std::string_view y, SegmentLevel level,
                                  const SegmentParams& params) {
  if (y.empty()) throw std::invalid_argument("cannot segment empty text");
  std::vector<Segment> segments;
  if (level == SegmentLevel::Thought) {
    if (params.delimiter.empty())
      throw std::invalid_argument("delimiter must be non-empty");
    std::size_t start = 0;
    while (start < y.size()) {
      const std::size_t pos = y.find(params.delimiter, start);
      std::string piece;
      if (pos == std::string_view::npos) {
        piece = std::string(y.substr(start));
        start = y.size();
      } else {
        // keep the delimiter so concatenation reproduces the input
        piece = std::string(y.substr(start, pos - start + params.delimiter.size()));
        start = pos + params.delimiter.size();
      }
      Segment seg;
      seg.text = piece;
      seg.tokens = {std::move(piece)};
      segments.push_back(std::move(seg));
    }
  } else {
    if (params.window < 2)
      throw std::invalid_argument("token-level window must be >= 2");
    const std::vector<std::string> tokens = traj::whitespace_tokens(y);
    if (tokens.empty())
      throw std::invalid_argument("cannot segment whitespace-only text");
    for (std::size_t i = 0; i < tokens.size();
         i += static_cast<std::size_t>(params.window)) {
      Segment seg;
      const std::size_t end =
          std::min(tokens.size(), i + static_cast<std::size_t>(params.window));
      for (std::size_t j = i; j < end; ++j) {
        if (!seg.text.empty()) seg.text += ' ';
        seg.text += tokens[j];
        seg.tokens.push_back(tokens[j]);
      }
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

AugmentedSequence reconstruct(const std::vector<Segment>& segments,
                              int cache_size, int anchor_len,
                              bool insert_trigger) {
  if (segments.empty())
    throw std::invalid_argument("reconstruct requires at least one segment");
  if (cache_size < 1)
    throw std::invalid_argument("cache_size must be >= 1");
  if (anchor_len < 1)
    throw std::invalid_argument("anchor_len must be >= 1");

  AugmentedSequence seq;
  seq.positions.push_back({Role::Question, 0, "<question>"});
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const int seg_index = static_cast<int>(i) + 1;
    for (const std::string& tok : segments[i].tokens)
      seq.positions.push_back({Role::Thought, seg_index, tok});
    if (i + 1 == segments.size()) break;  // nothing after the final segment
    if (insert_trigger)
      seq.positions.push_back({Role::Trigger, seg_index, "<w>"});
    for (int c = 1; c <= cache_size; ++c)
      seq.positions.push_back(
          {Role::Cache, seg_index, "[c" + std::to_string(c) + "]"});
    for (int a = 0; a < anchor_len; ++a)
      seq.positions.push_back({Role::Anchor, seg_index, "[o]"});
  }
  return seq;
}

SegmentLayout layout_of(const AugmentedSequence& seq) {
  SegmentLayout layout;
  layout.cache_size = 0;
  layout.anchor_len = 0;
  for (const Position& p : seq.positions) {
    switch (p.role) {
      case Role::Question:
        layout.x_len++;
        break;
      case Role::Thought:
        if (static_cast<int>(layout.segments.size()) < p.segment_index)
          layout.segments.resize(p.segment_index);
        layout.segments[p.segment_index - 1].body_len++;
        break;
      case Role::Trigger:
        layout.segments[p.segment_index - 1].has_trigger = true;
        break;
      case Role::Cache:
        if (p.segment_index == 1) layout.cache_size++;
        break;
      case Role::Anchor:
        if (p.segment_index == 1) layout.anchor_len++;
        break;
    }
  }
  // A single-segment sequence has no compressed blocks to measure.
  if (layout.cache_size == 0) layout.cache_size = 1;
  if (layout.anchor_len == 0) layout.anchor_len = 1;
  return layout;
}

// ============================================================================
// Mask construction
// ============================================================================

namespace {

struct Blocks {
  int width = 0;
  int x_end = 0;  // question is [0, x_end)
  struct SegBlocks {
    int t_begin = 0, t_end = 0;  // thought incl. trigger
    int c_begin = 0, c_end = 0;  // cache (empty for the final segment)
    int o_begin = 0, o_end = 0;  // anchor (empty for the final segment)
  };
  std::vector<SegBlocks> segs;
};

Blocks compute_blocks(const SegmentLayout& layout) {
  Blocks b;
  b.x_end = layout.x_len;
  int pos = layout.x_len;
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    const SegmentSpec& spec = layout.segments[i];
    Blocks::SegBlocks sb;
    sb.t_begin = pos;
    pos += spec.body_len + (spec.has_trigger ? 1 : 0);
    sb.t_end = pos;
    if (i + 1 < layout.segments.size()) {
      sb.c_begin = pos;
      pos += layout.cache_size;
      sb.c_end = pos;
      sb.o_begin = pos;
      pos += layout.anchor_len;
      sb.o_end = pos;
    } else {
      sb.c_begin = sb.c_end = sb.o_begin = sb.o_end = pos;
    }
    b.segs.push_back(sb);
  }
  b.width = pos;
  return b;
}

}  // namespace

std::vector<Role> layout_roles(const SegmentLayout& layout) {
  check_layout(layout);
  std::vector<Role> roles;
  roles.insert(roles.end(), layout.x_len, Role::Question);
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    const SegmentSpec& seg = layout.segments[i];
    roles.insert(roles.end(), seg.body_len, Role::Thought);
    if (seg.has_trigger) roles.push_back(Role::Trigger);
    if (i + 1 < layout.segments.size()) {
      roles.insert(roles.end(), layout.cache_size, Role::Cache);
      roles.insert(roles.end(), layout.anchor_len, Role::Anchor);
    }
  }
  return roles;
}

AttentionMask build_attention_mask(const SegmentLayout& layout) {
  check_layout(layout);
  const Blocks b = compute_blocks(layout);
  AttentionMask mask(b.width);

  auto allow_range = [&mask](int q, int begin, int end) {
    for (int s = begin; s < end && s <= q; ++s) mask.set(q, s, true);
  };

  // Question rows: causal within the question.
  for (int q = 0; q < b.x_end; ++q) allow_range(q, 0, q + 1);

  for (std::size_t i = 0; i < b.segs.size(); ++i) {
    const Blocks::SegBlocks& sb = b.segs[i];

    // Thought rows (trigger included): question, every earlier compressed
    // block, causal within the segment.
    for (int q = sb.t_begin; q < sb.t_end; ++q) {
      allow_range(q, 0, b.x_end);
      for (std::size_t j = 0; j < i; ++j)
        allow_range(q, b.segs[j].c_begin, b.segs[j].o_end);
      allow_range(q, sb.t_begin, q + 1);
    }
    // Cache rows: as above plus the whole current segment.
    for (int q = sb.c_begin; q < sb.c_end; ++q) {
      allow_range(q, 0, b.x_end);
      for (std::size_t j = 0; j < i; ++j)
        allow_range(q, b.segs[j].c_begin, b.segs[j].o_end);
      allow_range(q, sb.t_begin, sb.t_end);
      allow_range(q, sb.c_begin, q + 1);
    }
    // Anchor rows: earlier blocks plus the current cache, never the
    // segment itself.
    for (int q = sb.o_begin; q < sb.o_end; ++q) {
      allow_range(q, 0, b.x_end);
      for (std::size_t j = 0; j < i; ++j)
        allow_range(q, b.segs[j].c_begin, b.segs[j].o_end);
      allow_range(q, sb.c_begin, sb.c_end);
      allow_range(q, sb.o_begin, q + 1);
    }
  }
  return mask;
}

LabelMask build_label_mask(const SegmentLayout& layout) {
  LabelMask out;
  for (Role r : layout_roles(layout))
    out.targets.push_back(r == Role::Thought || r == Role::Trigger);
  return out;
}

AttentionMask reachability(const AttentionMask& mask) {
  const int w = mask.width();
  const int words = (w + 63) / 64;
  std::vector<std::uint64_t> rows(static_cast<std::size_t>(words) * w, 0);
  auto row = [&rows, words](int q) {
    return rows.data() + static_cast<std::size_t>(q) * words;
  };
  // Edges only point backwards, so one forward pass closes the relation.
  for (int q = 0; q < w; ++q) {
    std::uint64_t* rq = row(q);
    rq[q >> 6] |= std::uint64_t{1} << (q & 63);
    for (int s = 0; s < q; ++s) {
      if (!mask.at(q, s)) continue;
      const std::uint64_t* rs = row(s);
      for (int k = 0; k < words; ++k) rq[k] |= rs[k];
    }
  }
  AttentionMask reach(w);
  for (int q = 0; q < w; ++q) {
    const std::uint64_t* rq = row(q);
    for (int s = 0; s <= q; ++s)
      if (rq[s >> 6] & (std::uint64_t{1} << (s & 63))) reach.set(q, s, true);
  }
  return reach;
}

bool MaskReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const MaskCheck& c) { return c.pass; });
}

MaskReport verify_invariants(const AttentionMask& mask,
                             const SegmentLayout& layout) {
  MaskReport report;
  const Blocks b = compute_blocks(layout);
  const int w = mask.width();

  {
    MaskCheck check{"causal_subset", true, ""};
    for (int q = 0; q < w && check.pass; ++q)
      for (int s = q + 1; s < w; ++s)
        if (mask.at(q, s)) {
          check.pass = false;
          check.detail = "future attention at (" + std::to_string(q) + "," +
                         std::to_string(s) + ")";
          break;
        }
    report.checks.push_back(std::move(check));
  }
  {
    MaskCheck check{"diagonal", true, ""};
    for (int q = 0; q < w; ++q)
      if (!mask.at(q, q)) {
        check.pass = false;
        check.detail = "diagonal false at " + std::to_string(q);
        break;
      }
    report.checks.push_back(std::move(check));
  }
  {
    MaskCheck check{"nonempty_rows", true, ""};
    for (int q = 0; q < w; ++q) {
      bool any = false;
      for (int s = 0; s <= q; ++s)
        if (mask.at(q, s)) {
          any = true;
          break;
        }
      if (!any) {
        check.pass = false;
        check.detail = "row " + std::to_string(q) + " is empty";
        break;
      }
    }
    report.checks.push_back(std::move(check));
  }
  {
    // Each row's true-set must equal the rule set exactly.
    MaskCheck check{"block_rules", true, ""};
    const AttentionMask expected = build_attention_mask(layout);
    if (expected.width() != w) {
      check.pass = false;
      check.detail = "width mismatch";
    } else {
      for (int q = 0; q < w && check.pass; ++q)
        for (int s = 0; s < w; ++s)
          if (mask.at(q, s) != expected.at(q, s)) {
            check.pass = false;
            check.detail = "rule mismatch at (" + std::to_string(q) + "," +
                           std::to_string(s) + ")";
            break;
          }
    }
    report.checks.push_back(std::move(check));
  }
  {
    // Removing block j's cache/anchor positions must disconnect its
    // segment from every later segment.
    MaskCheck check{"cache_isolation", true, ""};
    for (std::size_t j = 0; j + 1 < b.segs.size() && check.pass; ++j) {
      AttentionMask pruned = mask;
      for (int p = b.segs[j].c_begin; p < b.segs[j].o_end; ++p)
        for (int s = 0; s < w; ++s) {
          pruned.set(p, s, false);
          pruned.set(s, p, false);
        }
      const AttentionMask reach = reachability(pruned);
      for (std::size_t i = j + 1; i < b.segs.size() && check.pass; ++i) {
        for (int q = b.segs[i].t_begin; q < b.segs[i].t_end && check.pass; ++q)
          for (int s = b.segs[j].t_begin; s < b.segs[j].t_end; ++s)
            if (reach.at(q, s)) {
              check.pass = false;
              check.detail = "segment " + std::to_string(j + 1) +
                             " leaks to segment " + std::to_string(i + 1) +
                             " outside its cache";
              break;
            }
      }
    }
    report.checks.push_back(std::move(check));
  }
  return report;
}

// ============================================================================
// Emission
// ============================================================================

std::string mask_to_csv(const AttentionMask& mask) {
  std::string out;
  for (int q = 0; q < mask.width(); ++q) {
    for (int s = 0; s < mask.width(); ++s) {
      if (s) out += ',';
      out += mask.at(q, s) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

std::string mask_to_pbm(const AttentionMask& mask) {
  std::string out = "P1\n" + std::to_string(mask.width()) + " " +
                    std::to_string(mask.width()) + "\n";
  for (int q = 0; q < mask.width(); ++q) {
    for (int s = 0; s < mask.width(); ++s) {
      if (s) out += ' ';
      out += mask.at(q, s) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

std::string label_mask_to_csv(const LabelMask& mask) {
  std::string out;
  for (std::size_t i = 0; i < mask.targets.size(); ++i) {
    if (i) out += ',';
    out += mask.targets[i] ? '1' : '0';
  }
  out += '\n';
  return out;
}

std::string label_mask_to_pbm(const LabelMask& mask) {
  std::string out =
      "P1\n" + std::to_string(mask.targets.size()) + " 1\n";
  for (std::size_t i = 0; i < mask.targets.size(); ++i) {
    if (i) out += ' ';
    out += mask.targets[i] ? '1' : '0';
  }
  out += '\n';
  return out;
}

}  // namespace ctxkit::mask
