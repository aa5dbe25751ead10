#include "ctxkit/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "ctxkit/engine.hpp"

namespace ctxkit::metrics {

double dependency_stepwise(const DecodeSchedule& s) {
  if (s.contexts.empty())
    throw std::invalid_argument("empty decode schedule");
  std::int64_t sum = 0;
  for (std::int64_t c : s.contexts) sum += c;
  return static_cast<double>(sum);
}

double dependency_vanilla(std::int64_t prompt_len, std::int64_t output_len) {
  if (prompt_len < 0 || output_len < 0)
    throw std::invalid_argument("lengths must be non-negative");
  return static_cast<double>(output_len) * static_cast<double>(output_len) /
             2.0 +
         static_cast<double>(prompt_len) * static_cast<double>(output_len);
}

double dependency_h2o(std::int64_t prompt_len, std::int64_t cache_limit,
                      std::int64_t output_len) {
  if (cache_limit < prompt_len)
    throw std::invalid_argument("cache_limit must be >= prompt_len");
  if (output_len < cache_limit - prompt_len)
    return dependency_vanilla(prompt_len, output_len);  // cache never fills
  const double lp = static_cast<double>(prompt_len);
  const double lc = static_cast<double>(cache_limit);
  const double lo = static_cast<double>(output_len);
  return (2.0 * lp * lc + 2.0 * lo * lc - lp * lp - lc * lc) / 2.0;
}

std::int64_t peak(const DecodeSchedule& s) {
  if (s.contexts.empty())
    throw std::invalid_argument("empty decode schedule");
  return *std::max_element(s.contexts.begin(), s.contexts.end());
}

double compression_ratio(double dep_base, double dep_method) {
  if (dep_method <= 0.0)
    throw std::invalid_argument("dependency denominator must be positive");
  return dep_base / dep_method;
}

DecodeSchedule vanilla_schedule(std::int64_t prompt_len,
                                std::int64_t output_len) {
  DecodeSchedule s;
  s.contexts.reserve(static_cast<std::size_t>(output_len));
  for (std::int64_t j = 1; j <= output_len; ++j)
    s.contexts.push_back(prompt_len + j);
  return s;
}

DecodeSchedule h2o_schedule(std::int64_t prompt_len, std::int64_t cache_limit,
                            std::int64_t output_len) {
  if (cache_limit < prompt_len)
    throw std::invalid_argument("cache_limit must be >= prompt_len");
  DecodeSchedule s;
  s.contexts.reserve(static_cast<std::size_t>(output_len));
  for (std::int64_t j = 1; j <= output_len; ++j)
    s.contexts.push_back(std::min(prompt_len + j, cache_limit));
  return s;
}

DecodeSchedule compress_schedule(const ScheduleParams& p) {
  const std::int64_t retained = p.cache_size + p.anchor_len;
  if (p.segment_len <= retained)
    throw std::invalid_argument(
        "segment_len must exceed cache_size + anchor_len");
  if (p.prompt_len < 0 || p.output_len < 1 || p.cache_size < 1 ||
      p.anchor_len < 0)
    throw std::invalid_argument("invalid schedule parameters");

  DecodeSchedule s;
  std::int64_t base = p.prompt_len;
  std::int64_t emitted = 0;
  while (emitted < p.output_len) {
    const std::int64_t seg =
        std::min(p.segment_len, p.output_len - emitted);
    for (std::int64_t j = 1; j <= seg; ++j) s.contexts.push_back(base + j);
    emitted += seg;
    const bool full_segment = seg == p.segment_len;
    if (full_segment && emitted < p.output_len) {
      if (p.count_compression_passes) {
        for (std::int64_t j = 1; j <= retained; ++j)
          s.contexts.push_back(base + p.segment_len + j);
      }
      base += retained;  // segment tokens leave, the compressed block stays
    }
  }
  return s;
}

std::vector<std::int64_t> active_context_series(
    const traj::TrajectoryRecord& rec, const traj::TokenCounter& counter,
    const prompt::PromptTemplate& tmpl) {
  engine::ManagedContext ctx;
  std::vector<std::int64_t> series;
  series.reserve(rec.events.size());
  std::optional<std::string> pending_observation;
  for (std::size_t t = 0; t < rec.events.size(); ++t) {
    const traj::TrajectoryEvent& ev = rec.events[t];
    const std::string input = prompt::render_round_prompt(
        tmpl, rec.question, ctx.render(), pending_observation);
    series.push_back(static_cast<std::int64_t>(counter.count(input)) +
                     static_cast<std::int64_t>(counter.count(ev.emitted_text)));
    if (auto err = ctx.apply(ev.action))
      throw std::runtime_error("replay failed at event " + std::to_string(t) +
                               ": " + err->describe());
    pending_observation = traj::is_env_action(ev.action) ? ev.observation
                                                         : std::nullopt;
  }
  return series;
}

ActionDistribution action_distribution(const traj::TrajectoryRecord& rec) {
  ActionDistribution d;
  for (const traj::TrajectoryEvent& ev : rec.events) {
    if (std::holds_alternative<traj::CommitAction>(ev.action))
      d.commit++;
    else if (std::holds_alternative<traj::ExpandAction>(ev.action))
      d.expand++;
    else if (std::holds_alternative<traj::FoldAction>(ev.action))
      d.fold++;
    else if (traj::is_env_action(ev.action))
      d.env++;
  }
  const int mem = d.commit + d.expand + d.fold;
  if (mem > 0) {
    d.commit_ratio = static_cast<double>(d.commit) / mem;
    d.expand_ratio = static_cast<double>(d.expand) / mem;
    d.fold_ratio = static_cast<double>(d.fold) / mem;
  }
  return d;
}

Histogram pre_commit_length_stats(
    const std::vector<traj::TrajectoryRecord>& recs,
    const traj::TokenCounter& counter,
    const std::vector<std::int64_t>& bin_edges) {
  if (bin_edges.size() < 2)
    throw std::invalid_argument("need at least two bin edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i)
    if (bin_edges[i] <= bin_edges[i - 1])
      throw std::invalid_argument("bin edges must be strictly increasing");

  Histogram h;
  h.bin_edges = bin_edges;
  h.counts.assign(bin_edges.size() - 1, 0);
  double sum = 0.0;
  for (const traj::TrajectoryRecord& rec : recs) {
    for (const traj::TrajectoryEvent& ev : rec.events) {
      const auto* c = std::get_if<traj::CommitAction>(&ev.action);
      if (!c) continue;
      const std::int64_t len =
          static_cast<std::int64_t>(counter.count(c->raw));
      sum += static_cast<double>(len);
      h.total++;
      // Clamp out-of-range lengths into the end bins.
      auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), len);
      std::size_t bin;
      if (it == bin_edges.begin()) {
        bin = 0;
      } else {
        bin = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
        if (bin >= h.counts.size()) bin = h.counts.size() - 1;
      }
      h.counts[bin]++;
    }
  }
  h.mean = h.total > 0 ? sum / static_cast<double>(h.total) : 0.0;
  return h;
}

SegmentLengthStats segment_length_stats(const std::vector<std::string>& texts,
                                        std::string_view delimiter) {
  if (delimiter.empty())
    throw std::invalid_argument("delimiter must be non-empty");
  SegmentLengthStats stats;
  for (const std::string& text : texts) {
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = text.find(delimiter, start);
      const std::size_t end = pos == std::string::npos ? text.size() : pos;
      stats.counts[static_cast<std::int64_t>(end - start)]++;
      stats.total_segments++;
      if (pos == std::string::npos) break;
      start = pos + delimiter.size();
    }
  }
  std::int64_t best = -1;
  for (const auto& [len, count] : stats.counts) {
    if (count > best) {
      best = count;
      stats.peak_length = len;
    }
  }
  return stats;
}

std::vector<BudgetPoint> acc_at_budget(
    const std::vector<BudgetedResult>& results,
    const std::vector<int>& budgets) {
  if (results.empty()) throw std::invalid_argument("empty result set");
  for (const BudgetedResult& r : results)
    if (r.env_actions < 0)
      throw std::invalid_argument("env_actions must be non-negative");
  std::vector<BudgetPoint> curve;
  curve.reserve(budgets.size());
  for (int b : budgets) {
    int hits = 0;
    for (const BudgetedResult& r : results)
      if (r.success && r.env_actions <= b) hits++;
    curve.push_back(
        {b, static_cast<double>(hits) / static_cast<double>(results.size())});
  }
  return curve;
}

std::string schedule_to_csv(const DecodeSchedule& s) {
  std::string out = "step,context\n";
  for (std::size_t i = 0; i < s.contexts.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += std::to_string(s.contexts[i]);
    out += '\n';
  }
  return out;
}

std::string curve_to_csv(const std::vector<BudgetPoint>& curve) {
  std::ostringstream out;
  out << "budget,accuracy\n";
  for (const BudgetPoint& p : curve) out << p.budget << ',' << p.accuracy << '\n';
  return out.str();
}

}  // namespace ctxkit::metrics
