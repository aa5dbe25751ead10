#include "ctxkit/engine.hpp"

#include <stdexcept>

namespace ctxkit::engine {

using traj::MemoryAction;
using traj::ReasoningEntity;
using traj::Visibility;

std::string EngineError::describe() const {
  switch (kind) {
    case Kind::UnknownStep:
      return "unknown step " + std::to_string(step_id);
    case Kind::FoldNotExpanded:
      return "fold on step " + std::to_string(step_id) +
             " which is not currently expanded";
    case Kind::AlreadyActive:
      return "expand on step " + std::to_string(step_id) +
             " which is already expanded";
    case Kind::Terminated:
      return "context is terminated";
    case Kind::EmptySummary:
      return "commit with empty summary";
    case Kind::PolicyViolation:
      return "more than " + std::to_string(limit) +
             " entities expanded simultaneously";
  }
  return "unknown error";
}

ManagedContext::ManagedContext(ExpansionPolicy policy) : policy_(policy) {
  if (policy.max_expanded < 1)
    throw std::invalid_argument("max_expanded must be >= 1");
}

int ManagedContext::active_count() const {
  int n = 0;
  for (const ReasoningEntity& e : entities_)
    if (e.visibility == Visibility::Active) ++n;
  return n;
}

std::optional<EngineError> ManagedContext::apply(const MemoryAction& action) {
  const int event_index = events_seen_++;
  if (terminated_) return EngineError{EngineError::Kind::Terminated};

  if (const auto* c = std::get_if<traj::CommitAction>(&action)) {
    if (c->summary.empty())
      return EngineError{EngineError::Kind::EmptySummary};
    ReasoningEntity e;
    e.index = static_cast<int>(entities_.size()) + 1;
    e.raw = c->raw;
    e.summary = c->summary;
    e.kind = traj::EntityKind::ReasoningStep;
    e.visibility = Visibility::Archive;
    entities_.push_back(std::move(e));
    return std::nullopt;
  }
  if (const auto* x = std::get_if<traj::ExpandAction>(&action)) {
    if (x->step_id < 1 || x->step_id > entity_count())
      return EngineError{EngineError::Kind::UnknownStep, x->step_id};
    ReasoningEntity& e = entities_[x->step_id - 1];
    if (e.visibility == Visibility::Active)
      return EngineError{EngineError::Kind::AlreadyActive, x->step_id};
    if (active_count() + 1 > policy_.max_expanded) {
      if (policy_.strictness == Strictness::Strict)
        return EngineError{EngineError::Kind::PolicyViolation, 0,
                           policy_.max_expanded};
      violations_.push_back({event_index, "max_expanded_exceeded"});
    }
    e.visibility = Visibility::Active;
    return std::nullopt;
  }
  if (const auto* f = std::get_if<traj::FoldAction>(&action)) {
    if (f->step_id < 1 || f->step_id > entity_count())
      return EngineError{EngineError::Kind::UnknownStep, f->step_id};
    ReasoningEntity& e = entities_[f->step_id - 1];
    if (e.visibility == Visibility::Archive)
      return EngineError{EngineError::Kind::FoldNotExpanded, f->step_id};
    e.visibility = Visibility::Archive;
    return std::nullopt;
  }
  if (std::holds_alternative<traj::AnswerAction>(action)) {
    terminated_ = true;
    return std::nullopt;
  }
  // search/visit: memory state is unchanged
  return std::nullopt;
}

std::optional<EngineError> ManagedContext::apply_commit_entity(
    ReasoningEntity entity) {
  events_seen_++;
  if (terminated_) return EngineError{EngineError::Kind::Terminated};
  if (entity.summary.empty())
    return EngineError{EngineError::Kind::EmptySummary};
  entity.index = static_cast<int>(entities_.size()) + 1;
  entity.visibility = Visibility::Archive;
  entities_.push_back(std::move(entity));
  return std::nullopt;
}

const std::string& ManagedContext::projection(int k) const {
  if (k < 1 || k > entity_count())
    throw std::out_of_range("unknown step " + std::to_string(k));
  const ReasoningEntity& e = entities_[k - 1];
  return e.visibility == Visibility::Archive ? e.summary : e.raw;
}

std::string ManagedContext::render() const {
  std::string out;
  for (const ReasoningEntity& e : entities_) {
    if (!out.empty()) out += "\n\n";
    out += "[Step " + std::to_string(e.index) + "] ";
    if (e.visibility == Visibility::Archive) {
      out += e.summary;
    } else {
      out += "(expanded)\n";
      if (e.kind == traj::EntityKind::TaoTurn && e.thought && e.action_text) {
        out += traj::make_tao_raw(*e.thought, *e.action_text,
                                  e.observation.value_or(""));
      } else {
        out += e.raw;
      }
    }
  }
  return out;
}

ReplayResult replay(const std::vector<MemoryAction>& actions,
                    ExpansionPolicy policy) {
  ReplayResult result{ManagedContext(policy), std::nullopt, -1};
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (auto err = result.context.apply(actions[i])) {
      result.error = err;
      result.failing_index = static_cast<int>(i);
      return result;
    }
  }
  return result;
}

ReplayResult replay(const traj::TrajectoryRecord& rec,
                    ExpansionPolicy policy) {
  std::vector<MemoryAction> actions;
  actions.reserve(rec.events.size());
  for (const traj::TrajectoryEvent& ev : rec.events)
    actions.push_back(ev.action);
  return replay(actions, policy);
}

std::string render_prefix(const traj::TrajectoryRecord& rec,
                          std::size_t prefix_len, ExpansionPolicy policy) {
  ManagedContext ctx(policy);
  const std::size_t n = std::min(prefix_len, rec.events.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto err = ctx.apply(rec.events[i].action))
      throw std::runtime_error("replay failed at event " + std::to_string(i) +
                               ": " + err->describe());
  }
  return ctx.render();
}

}  // namespace ctxkit::engine
