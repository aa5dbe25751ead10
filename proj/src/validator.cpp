#include "ctxkit/validator.hpp"

#include <algorithm>
#include <set>

#include "ctxkit/engine.hpp"
#include "json.hpp"

namespace ctxkit::pruning {

using traj::MemoryAction;
using traj::TrajectoryEvent;
using traj::TrajectoryRecord;

double lcs_ratio(std::string_view a, std::string_view b) {
  const std::vector<std::string> ta = traj::whitespace_tokens(a);
  const std::vector<std::string> tb = traj::whitespace_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;

  // Classic LCS table with two rolling rows.
  std::vector<std::size_t> prev(tb.size() + 1, 0);
  std::vector<std::size_t> cur(tb.size() + 1, 0);
  for (std::size_t i = 1; i <= ta.size(); ++i) {
    for (std::size_t j = 1; j <= tb.size(); ++j) {
      if (ta[i - 1] == tb[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const std::size_t lcs = prev[tb.size()];
  return static_cast<double>(lcs) /
         static_cast<double>(std::max(ta.size(), tb.size()));
}

std::vector<Violation> check_density(const ActionCounts& c) {
  std::vector<Violation> out;
  if (c.n_expand > c.n_commit) {
    out.push_back({"R4", std::nullopt,
                   "n_expand > n_commit (" + std::to_string(c.n_expand) +
                       " > " + std::to_string(c.n_commit) + ")"});
  }
  if (c.n_expand + c.n_fold > 2 * c.n_commit) {
    out.push_back({"R4", std::nullopt,
                   "n_expand + n_fold > 2*n_commit (" +
                       std::to_string(c.n_expand + c.n_fold) + " > " +
                       std::to_string(2 * c.n_commit) + ")"});
  }
  return out;
}

namespace {

std::string field_of(const traj::CommitAction& c, SimilarityField f) {
  return f == SimilarityField::Raw ? c.raw : c.summary;
}

}  // namespace

AdmissibilityReport validate(const TrajectoryRecord& rec,
                             const ValidatorConfig& cfg) {
  AdmissibilityReport report;
  auto& violations = report.violations;

  int n_answer = 0;
  for (const TrajectoryEvent& ev : rec.events) {
    if (std::holds_alternative<traj::CommitAction>(ev.action))
      report.counts.n_commit++;
    else if (std::holds_alternative<traj::ExpandAction>(ev.action))
      report.counts.n_expand++;
    else if (std::holds_alternative<traj::FoldAction>(ev.action))
      report.counts.n_fold++;
    else if (std::holds_alternative<traj::AnswerAction>(ev.action))
      n_answer++;
  }

  // R1 / R3: strict replay; a fold-precedence failure is R3, anything else R1.
  engine::ExpansionPolicy strict_policy;
  strict_policy.strictness = engine::Strictness::Strict;
  const engine::ReplayResult rr = engine::replay(rec, strict_policy);
  if (!rr.ok()) {
    const bool fold_failure =
        rr.error->kind == engine::EngineError::Kind::FoldNotExpanded;
    violations.push_back({fold_failure ? "R3" : "R1", rr.failing_index,
                          rr.error->describe()});
  }

  // R2: full lifecycle plus a correct verdict when one exists.
  if (report.counts.n_commit < 1)
    violations.push_back({"R2", std::nullopt, "no commit action"});
  if (report.counts.n_expand < 1)
    violations.push_back({"R2", std::nullopt, "no expand action"});
  if (report.counts.n_fold < 1)
    violations.push_back({"R2", std::nullopt, "no fold action"});
  if (n_answer != 1) {
    violations.push_back({"R2", std::nullopt,
                          n_answer == 0 ? "no terminal answer"
                                        : "multiple answer events"});
  } else if (!std::holds_alternative<traj::AnswerAction>(
                 rec.events.back().action)) {
    violations.push_back({"R2", std::nullopt, "answer is not the last event"});
  }
  if (cfg.require_judge_correct && rec.judge && !rec.judge->correct)
    violations.push_back({"R2", std::nullopt, "judge verdict is incorrect"});

  // Optional expand->use->fold discipline, reported under the symmetry rule.
  if (cfg.require_use_between_expand_fold) {
    std::set<int> expanded_unused;
    for (std::size_t i = 0; i < rec.events.size(); ++i) {
      const MemoryAction& a = rec.events[i].action;
      if (const auto* e = std::get_if<traj::ExpandAction>(&a)) {
        expanded_unused.insert(e->step_id);
      } else if (std::holds_alternative<traj::CommitAction>(a)) {
        expanded_unused.clear();
      } else if (const auto* f = std::get_if<traj::FoldAction>(&a)) {
        if (expanded_unused.count(f->step_id)) {
          violations.push_back(
              {"R3", static_cast<int>(i),
               "fold on step " + std::to_string(f->step_id) +
                   " without an intervening commit"});
        }
        expanded_unused.erase(f->step_id);
      }
    }
  }

  // R4: operational density.
  for (Violation v : check_density(report.counts))
    violations.push_back(std::move(v));

  // R5: adjacent-event jitter. Identical expand/expand or fold/fold pairs
  // in any mode; research mode also rejects adjacent memory actions on the
  // same step (commit/commit pairs are R6's business).
  for (std::size_t i = 0; i + 1 < rec.events.size(); ++i) {
    const MemoryAction& a = rec.events[i].action;
    const MemoryAction& b = rec.events[i + 1].action;
    if (!traj::is_memory_action(a) || !traj::is_memory_action(b)) continue;
    const bool same_type = a.index() == b.index();
    const bool expand_or_fold = std::holds_alternative<traj::ExpandAction>(a) ||
                                std::holds_alternative<traj::FoldAction>(a);
    if (same_type && expand_or_fold) {
      violations.push_back(
          {"R5", static_cast<int>(i + 1),
           "consecutive identical " + std::string(traj::action_name(a)) +
               " operations"});
      continue;
    }
    if (cfg.mode == traj::Mode::Research) {
      const std::optional<int> sa = traj::target_step(a);
      const std::optional<int> sb = traj::target_step(b);
      if (sa && sb && *sa == *sb) {
        violations.push_back({"R5", static_cast<int>(i + 1),
                              "consecutive memory actions on step " +
                                  std::to_string(*sa)});
      }
    }
  }

  // R6: near-duplicate consecutive commits.
  const traj::CommitAction* prev_commit = nullptr;
  int prev_commit_index = -1;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const auto* c = std::get_if<traj::CommitAction>(&rec.events[i].action);
    if (!c) continue;
    if (prev_commit) {
      const double ratio = lcs_ratio(
          traj::normalize_text(field_of(*prev_commit, cfg.similarity_field)),
          traj::normalize_text(field_of(*c, cfg.similarity_field)));
      if (ratio > cfg.lcs_threshold) {
        violations.push_back(
            {"R6", static_cast<int>(i),
             "commits at events " + std::to_string(prev_commit_index) +
                 " and " + std::to_string(i) + " have LCS ratio " +
                 std::to_string(ratio)});
      }
    }
    prev_commit = c;
    prev_commit_index = static_cast<int>(i);
  }

  report.admissible = violations.empty();
  return report;
}

std::vector<std::string> AdmissibilityReport::rule_ids() const {
  std::set<std::string> ids;
  for (const Violation& v : violations) ids.insert(v.rule_id);
  return {ids.begin(), ids.end()};
}

std::string report_to_json(const AdmissibilityReport& report) {
  nlohmann::ordered_json obj;
  obj["admissible"] = report.admissible;
  obj["violations"] = nlohmann::ordered_json::array();
  for (const Violation& v : report.violations) {
    nlohmann::ordered_json vj;
    vj["rule_id"] = v.rule_id;
    if (v.event_index) vj["event_index"] = *v.event_index;
    vj["detail"] = v.detail;
    obj["violations"].push_back(vj);
  }
  obj["counts"] = {{"n_commit", report.counts.n_commit},
                   {"n_expand", report.counts.n_expand},
                   {"n_fold", report.counts.n_fold}};
  return obj.dump();
}

std::string report_to_text(const AdmissibilityReport& report) {
  std::string out = report.admissible ? "admissible" : "inadmissible";
  out += " (commits " + std::to_string(report.counts.n_commit) + ", expands " +
         std::to_string(report.counts.n_expand) + ", folds " +
         std::to_string(report.counts.n_fold) + ")";
  for (const Violation& v : report.violations) {
    out += "\n  " + v.rule_id;
    if (v.event_index) out += " @ event " + std::to_string(*v.event_index);
    out += ": " + v.detail;
  }
  return out;
}

}  // namespace ctxkit::pruning
