// Python bindings for the compressed-context reasoning toolkit. Records
// cross the boundary in their canonical JSON Lines form, so python callers
// exercise exactly the file format the CLI reads and writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctxkit/engine.hpp"
#include "ctxkit/exporter.hpp"
#include "ctxkit/mask.hpp"
#include "ctxkit/metrics.hpp"
#include "ctxkit/prompt.hpp"
#include "ctxkit/synthesis.hpp"
#include "ctxkit/trajectory.hpp"
#include "ctxkit/validator.hpp"

namespace py = pybind11;
using namespace ctxkit;

namespace {

traj::MemoryAction parse_action_or_throw(const std::string& text) {
  auto result = synth::parse_action(text);
  if (auto* err = std::get_if<synth::ActionParseError>(&result))
    throw py::value_error(err->message);
  return std::get<synth::ParsedEmission>(result).action;
}

py::dict report_to_dict(const pruning::AdmissibilityReport& report) {
  py::dict out;
  out["admissible"] = report.admissible;
  py::list violations;
  for (const pruning::Violation& v : report.violations) {
    py::dict vd;
    vd["rule_id"] = v.rule_id;
    if (v.event_index) vd["event_index"] = *v.event_index;
    vd["detail"] = v.detail;
    violations.append(vd);
  }
  out["violations"] = violations;
  py::dict counts;
  counts["n_commit"] = report.counts.n_commit;
  counts["n_expand"] = report.counts.n_expand;
  counts["n_fold"] = report.counts.n_fold;
  out["counts"] = counts;
  return out;
}

std::vector<std::vector<bool>> mask_to_rows(const mask::AttentionMask& m) {
  std::vector<std::vector<bool>> rows(m.width(),
                                      std::vector<bool>(m.width(), false));
  for (int q = 0; q < m.width(); ++q)
    for (int s = 0; s < m.width(); ++s) rows[q][s] = m.at(q, s);
  return rows;
}

}  // namespace

PYBIND11_MODULE(ctxkit, m) {
  m.doc() = "compressed-context reasoning toolkit";

  // ---- trajectory model ---------------------------------------------------

  m.def("normalize_text",
        [](const std::string& t) { return traj::normalize_text(t); },
        py::arg("text"));

  m.def(
      "reserialize",
      [](const std::string& doc) {
        return traj::serialize_trajectory(traj::parse_trajectory(doc));
      },
      py::arg("document"),
      "Parse a trajectory document and emit its canonical serialization.");

  // ---- memory engine ------------------------------------------------------

  py::class_<engine::ManagedContext>(m, "ManagedContext")
      .def(py::init([](int max_expanded, bool strict) {
             return engine::ManagedContext(engine::ExpansionPolicy{
                 max_expanded, strict ? engine::Strictness::Strict
                                      : engine::Strictness::Warn});
           }),
           py::arg("max_expanded") = 2, py::arg("strict") = false)
      .def(
          "apply",
          [](engine::ManagedContext& ctx, const std::string& call) {
            if (auto err = ctx.apply(parse_action_or_throw(call)))
              throw std::runtime_error(err->describe());
          },
          py::arg("call"),
          "Apply one action given as canonical call text; raises on "
          "rejection.")
      .def("render", &engine::ManagedContext::render)
      .def("projection",
           [](const engine::ManagedContext& ctx, int k) {
             return ctx.projection(k);
           },
           py::arg("step_id"))
      .def_property_readonly("entity_count",
                             &engine::ManagedContext::entity_count)
      .def_property_readonly("active_count",
                             &engine::ManagedContext::active_count)
      .def_property_readonly("terminated", &engine::ManagedContext::terminated);

  m.def(
      "replay",
      [](const std::string& doc, int max_expanded, bool strict) {
        const traj::TrajectoryRecord rec = traj::parse_trajectory(doc);
        const engine::ReplayResult result = engine::replay(
            rec, engine::ExpansionPolicy{max_expanded,
                                         strict ? engine::Strictness::Strict
                                                : engine::Strictness::Warn});
        py::dict out;
        out["ok"] = result.ok();
        if (result.ok()) {
          out["render"] = result.context.render();
          out["entity_count"] = result.context.entity_count();
        } else {
          out["error"] = result.error->describe();
          out["failing_index"] = result.failing_index;
        }
        return out;
      },
      py::arg("document"), py::arg("max_expanded") = 2,
      py::arg("strict") = false);

  // ---- pruning validator --------------------------------------------------

  m.def(
      "validate",
      [](const std::string& doc, std::optional<std::string> mode,
         double lcs_threshold, const std::string& similarity_field,
         bool require_judge_correct, bool require_use_between_expand_fold) {
        const traj::TrajectoryRecord rec = traj::parse_trajectory(doc);
        pruning::ValidatorConfig cfg;
        cfg.mode = rec.mode;
        if (mode == "reasoning") cfg.mode = traj::Mode::Reasoning;
        if (mode == "research") cfg.mode = traj::Mode::Research;
        cfg.lcs_threshold = lcs_threshold;
        cfg.similarity_field = similarity_field == "summary"
                                   ? pruning::SimilarityField::Summary
                                   : pruning::SimilarityField::Raw;
        cfg.require_judge_correct = require_judge_correct;
        cfg.require_use_between_expand_fold = require_use_between_expand_fold;
        return report_to_dict(pruning::validate(rec, cfg));
      },
      py::arg("document"), py::arg("mode") = py::none(),
      py::arg("lcs_threshold") = 0.9, py::arg("similarity_field") = "raw",
      py::arg("require_judge_correct") = true,
      py::arg("require_use_between_expand_fold") = false);

  m.def("lcs_ratio",
        [](const std::string& a, const std::string& b) {
          return pruning::lcs_ratio(a, b);
        },
        py::arg("a"), py::arg("b"));

  // ---- metrics --------------------------------------------------------------

  m.def("dependency_vanilla", &metrics::dependency_vanilla,
        py::arg("prompt_len"), py::arg("output_len"));
  m.def("dependency_h2o", &metrics::dependency_h2o, py::arg("prompt_len"),
        py::arg("cache_limit"), py::arg("output_len"));
  m.def(
      "dependency_stepwise",
      [](const std::vector<std::int64_t>& contexts) {
        return metrics::dependency_stepwise({contexts});
      },
      py::arg("contexts"));
  m.def(
      "peak",
      [](const std::vector<std::int64_t>& contexts) {
        return metrics::peak({contexts});
      },
      py::arg("contexts"));
  m.def("compression_ratio", &metrics::compression_ratio, py::arg("dep_base"),
        py::arg("dep_method"));

  m.def(
      "vanilla_schedule",
      [](std::int64_t lp, std::int64_t lo) {
        return metrics::vanilla_schedule(lp, lo).contexts;
      },
      py::arg("prompt_len"), py::arg("output_len"));
  m.def(
      "h2o_schedule",
      [](std::int64_t lp, std::int64_t lc, std::int64_t lo) {
        return metrics::h2o_schedule(lp, lc, lo).contexts;
      },
      py::arg("prompt_len"), py::arg("cache_limit"), py::arg("output_len"));
  m.def(
      "compress_schedule",
      [](std::int64_t prompt_len, std::int64_t output_len,
         std::int64_t segment_len, std::int64_t cache_size,
         std::int64_t anchor_len, bool count_compression_passes) {
        metrics::ScheduleParams p;
        p.prompt_len = prompt_len;
        p.output_len = output_len;
        p.segment_len = segment_len;
        p.cache_size = cache_size;
        p.anchor_len = anchor_len;
        p.count_compression_passes = count_compression_passes;
        return metrics::compress_schedule(p).contexts;
      },
      py::arg("prompt_len"), py::arg("output_len"), py::arg("segment_len"),
      py::arg("cache_size"), py::arg("anchor_len") = 1,
      py::arg("count_compression_passes") = true);

  m.def(
      "active_context_series",
      [](const std::string& doc, const std::string& counter) {
        return metrics::active_context_series(
            traj::parse_trajectory(doc), traj::counter_by_name(counter),
            prompt::template_by_id("default"));
      },
      py::arg("document"), py::arg("token_counter") = "whitespace");

  m.def(
      "action_distribution",
      [](const std::string& doc) {
        const auto d =
            metrics::action_distribution(traj::parse_trajectory(doc));
        py::dict out;
        out["commit"] = d.commit;
        out["expand"] = d.expand;
        out["fold"] = d.fold;
        out["env"] = d.env;
        if (d.commit_ratio) {
          out["commit_ratio"] = *d.commit_ratio;
          out["expand_ratio"] = *d.expand_ratio;
          out["fold_ratio"] = *d.fold_ratio;
        }
        return out;
      },
      py::arg("document"));

  m.def(
      "acc_at_budget",
      [](const std::vector<std::pair<bool, int>>& results,
         const std::vector<int>& budgets) {
        std::vector<metrics::BudgetedResult> rs;
        for (const auto& [success, env] : results) rs.push_back({success, env});
        std::vector<std::pair<int, double>> out;
        for (const auto& p : metrics::acc_at_budget(rs, budgets))
          out.emplace_back(p.budget, p.accuracy);
        return out;
      },
      py::arg("results"), py::arg("budgets"));

  // ---- mask builder ---------------------------------------------------------

  m.def(
      "attention_mask",
      [](const std::string& layout) {
        return mask_to_rows(
            mask::build_attention_mask(mask::parse_layout(layout)));
      },
      py::arg("layout"),
      "Boolean matrix for a layout descriptor like 'x=2;seg=3!t,2;c=1;o=1'.");
  m.def(
      "label_mask",
      [](const std::string& layout) {
        return mask::build_label_mask(mask::parse_layout(layout)).targets;
      },
      py::arg("layout"));
  m.def(
      "verify_mask",
      [](const std::string& layout) {
        const auto parsed = mask::parse_layout(layout);
        const auto report =
            mask::verify_invariants(mask::build_attention_mask(parsed), parsed);
        py::dict out;
        for (const auto& check : report.checks) out[check.name.c_str()] = check.pass;
        return out;
      },
      py::arg("layout"));

  // ---- exporter ---------------------------------------------------------------

  m.def(
      "export_instances",
      [](const std::string& doc, bool include_env_turns,
         const std::string& trajectory_id) {
        exporter::ExportConfig cfg;
        cfg.include_env_turns = include_env_turns;
        cfg.trajectory_id = trajectory_id;
        const auto instances =
            exporter::export_instances(traj::parse_trajectory(doc), cfg);
        py::list out;
        for (const auto& inst : instances) {
          py::dict d;
          d["trajectory_id"] = inst.trajectory_id;
          d["step_index"] = inst.step_index;
          d["question"] = inst.question;
          d["scratchpad"] = inst.context_render;
          d["target"] = inst.target;
          d["mode"] = std::string(traj::mode_name(inst.mode));
          out.append(d);
        }
        return out;
      },
      py::arg("document"), py::arg("include_env_turns") = true,
      py::arg("trajectory_id") = "");

  // ---- synthesis -----------------------------------------------------------

  m.def(
      "parse_action",
      [](const std::string& text) {
        auto result = synth::parse_action(text);
        if (auto* err = std::get_if<synth::ActionParseError>(&result))
          throw py::value_error(err->message);
        const auto& ok = std::get<synth::ParsedEmission>(result);
        py::dict out;
        out["action"] = std::string(traj::action_name(ok.action));
        out["thought"] = ok.thought;
        out["call_text"] = ok.call_text;
        return out;
      },
      py::arg("text"));

  m.def(
      "run_scripted",
      [](const std::string& question, const std::vector<std::string>& script,
         std::optional<std::string> tools_dir, int max_rounds, int env_budget,
         const std::string& mode) {
        synth::SynthesisConfig cfg;
        cfg.max_rounds = max_rounds;
        cfg.env_budget = env_budget;
        cfg.mode = mode == "research" ? traj::Mode::Research
                                      : traj::Mode::Reasoning;
        synth::ToolSet tools;
        if (tools_dir) tools = synth::mock_tools(*tools_dir);
        const synth::SynthesisOutcome outcome = synth::run(
            question, synth::scripted_policy("scripted", script), tools, cfg);
        py::dict out;
        out["status"] = std::string(synth::status_name(outcome.status));
        out["record"] = traj::serialize_trajectory(outcome.record);
        out["rounds"] = outcome.stats.rounds;
        out["env_actions"] = outcome.stats.env_actions;
        out["mem_actions"] = outcome.stats.mem_actions;
        return out;
      },
      py::arg("question"), py::arg("script"),
      py::arg("tools_dir") = py::none(), py::arg("max_rounds") = 32,
      py::arg("env_budget") = 16, py::arg("mode") = "reasoning");
}
