#include "ctxkit/exporter.hpp"

#include <stdexcept>

#include "ctxkit/engine.hpp"
#include "ctxkit/synthesis.hpp"
#include "json.hpp"

namespace ctxkit::exporter {

using traj::TrajectoryEvent;
using traj::TrajectoryRecord;

namespace {

/// Research targets carry the thought and the call in labelled form;
/// reasoning targets are the emission itself. Falls back to the
/// canonical call when the emission is empty or carries no call.
std::string target_for(const TrajectoryEvent& ev, traj::Mode mode) {
  if (mode == traj::Mode::Reasoning) {
    if (!ev.emitted_text.empty()) return ev.emitted_text;
    return traj::canonical_call(ev.action);
  }
  std::string thought;
  std::string call = traj::canonical_call(ev.action);
  auto parsed = synth::parse_action(ev.emitted_text);
  if (auto* ok = std::get_if<synth::ParsedEmission>(&parsed)) {
    thought = ok->thought;
    call = ok->call_text;
  }
  return "Thought: " + thought + "\nAction: " + call;
}

}  // namespace

std::vector<TrainingInstance> export_instances(const TrajectoryRecord& rec,
                                               const ExportConfig& cfg) {
  std::string id = cfg.trajectory_id;
  if (id.empty()) {
    if (auto it = rec.metadata.find("id"); it != rec.metadata.end())
      id = it->second;
  }

  std::vector<TrainingInstance> out;
  engine::ManagedContext ctx;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const TrajectoryEvent& ev = rec.events[i];
    const bool skip = !cfg.include_env_turns && traj::is_env_action(ev.action);
    if (!skip) {
      TrainingInstance inst;
      inst.trajectory_id = id;
      inst.step_index = static_cast<int>(i);
      inst.question = rec.question;
      inst.context_render = ctx.render();
      inst.target = target_for(ev, rec.mode);
      inst.mode = rec.mode;
      out.push_back(std::move(inst));
    }
    if (auto err = ctx.apply(ev.action))
      throw std::runtime_error("replay failed at event " + std::to_string(i) +
                               ": " + err->describe());
  }
  return out;
}

std::string render_instance_prompt(const TrainingInstance& inst,
                                   const prompt::PromptTemplate& tmpl) {
  return prompt::render_round_prompt(tmpl, inst.question, inst.context_render);
}

std::string instances_to_jsonl(const std::vector<TrainingInstance>& instances) {
  std::string out;
  for (const TrainingInstance& inst : instances) {
    nlohmann::ordered_json obj;
    obj["trajectory_id"] = inst.trajectory_id;
    obj["step_index"] = inst.step_index;
    obj["question"] = inst.question;
    obj["scratchpad"] = inst.context_render;
    obj["target"] = inst.target;
    obj["mode"] = std::string(traj::mode_name(inst.mode));
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ctxkit::exporter
