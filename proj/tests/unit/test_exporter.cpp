#include "ctxkit/engine.hpp"
#include "ctxkit/exporter.hpp"
#include "doctest.h"

using namespace ctxkit;
using namespace ctxkit::exporter;
using namespace ctxkit::traj;

namespace {

TrajectoryEvent ev(MemoryAction a, std::optional<std::string> obs = {},
                   std::string emitted = "") {
  if (emitted.empty()) emitted = canonical_call(a);
  return TrajectoryEvent{a, std::move(obs), std::move(emitted)};
}

}  // namespace

TEST_CASE("one instance per emission") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.metadata["id"] = "t1";
  rec.events = {
      ev(CommitAction{"work one", "sum 12"}),
      ev(CommitAction{"work two", "prod 40"}),
      ev(AnswerAction{"40"}),
  };
  const auto instances = export_instances(rec);
  REQUIRE(instances.size() == 3);
  CHECK(instances[0].trajectory_id == "t1");
  CHECK(instances[0].step_index == 0);
  CHECK(instances[0].context_render == "");
  CHECK(instances[1].context_render == "[Step 1] sum 12");
  CHECK(instances[2].context_render == "[Step 1] sum 12\n\n[Step 2] prod 40");
}

TEST_CASE("committed raw text never leaks into later contexts") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {
      ev(CommitAction{"the secret full derivation", "Z1 summary"}),
      ev(CommitAction{"other work", "Z2"}),
      ev(AnswerAction{"x"}),
  };
  const auto instances = export_instances(rec);
  CHECK(instances[1].context_render.find("[Step 1] Z1 summary") !=
        std::string::npos);
  CHECK(instances[1].context_render.find("the secret full derivation") ==
        std::string::npos);
}

TEST_CASE("expand reveals the raw form for the rounds it is active") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {
      ev(CommitAction{"raw derivation", "Z1"}),
      ev(ExpandAction{1, {}}),
      ev(CommitAction{"second step", "Z2"}),
      ev(FoldAction{1, {}}),
      ev(AnswerAction{"x"}),
  };
  const auto instances = export_instances(rec);
  REQUIRE(instances.size() == 5);
  // instance #3 (index 2) sees the expanded raw form
  CHECK(instances[2].context_render ==
        "[Step 1] (expanded)\nraw derivation");
  // instance #5 (index 4) sees the summary again
  CHECK(instances[4].context_render == "[Step 1] Z1\n\n[Step 2] Z2");
}

TEST_CASE("prefix consistency against the replay oracle") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {
      ev(CommitAction{"a", "s1"}), ev(ExpandAction{1, {}}),
      ev(CommitAction{"b", "s2"}), ev(FoldAction{1, {}}),
      ev(AnswerAction{"x"}),
  };
  const auto instances = export_instances(rec);
  for (const TrainingInstance& inst : instances) {
    REQUIRE(inst.context_render ==
            engine::render_prefix(rec, inst.step_index));
  }
}

TEST_CASE("no target leakage into the instance's own context") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {
      ev(CommitAction{"alpha beta", "gamma"}),
      ev(ExpandAction{1, {}}),
      ev(FoldAction{1, {}}),
      ev(AnswerAction{"delta"}),
  };
  for (const TrainingInstance& inst : export_instances(rec)) {
    CHECK(inst.context_render.find(inst.target) == std::string::npos);
    CHECK_FALSE(inst.target.empty());
  }
}

TEST_CASE("research mode: env turns skippable, targets labelled") {
  TrajectoryRecord rec;
  rec.mode = Mode::Research;
  rec.question = "who?";
  rec.events = {
      ev(SearchAction{"find x"}, "observed text",
         "I should look this up. search(query=\"find x\")"),
      ev(CommitAction{"Thought: t\nAction: a\nObservation: o", "found x"}, {},
         "commit(raw=\"...\", summary=\"found x\")"),
      ev(AnswerAction{"x"}, {}, "answer(\"x\")"),
  };

  const auto with_env = export_instances(rec);
  REQUIRE(with_env.size() == 3);
  CHECK(with_env[0].target ==
        "Thought: I should look this up.\nAction: search(query=\"find x\")");
  // observations appear in later context only, never in targets
  for (const TrainingInstance& inst : with_env)
    CHECK(inst.target.find("observed text") == std::string::npos);

  ExportConfig no_env;
  no_env.include_env_turns = false;
  const auto without_env = export_instances(rec, no_env);
  REQUIRE(without_env.size() == 2);
  CHECK(without_env[0].step_index == 1);  // indices stay event-based
}

TEST_CASE("replay failure surfaces the failing index") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {ev(CommitAction{"a", "s"}), ev(FoldAction{1, {}})};
  CHECK_THROWS_WITH_AS(export_instances(rec),
                       doctest::Contains("event 1"), std::runtime_error);
}

TEST_CASE("instance prompt rendering") {
  const prompt::PromptTemplate tmpl = prompt::template_by_id("default");
  TrainingInstance first;
  first.question = "What is 2+2?";
  first.context_render = "";
  const std::string p0 = render_instance_prompt(first, tmpl);
  CHECK(p0.find("### Question:\nWhat is 2+2?") != std::string::npos);
  CHECK(p0.find("Current Scratchpad") == std::string::npos);

  TrainingInstance later = first;
  later.context_render = "[Step 1] sum";
  const std::string p1 = render_instance_prompt(later, tmpl);
  CHECK(p1.find("### Current Scratchpad:\n[Step 1] sum") != std::string::npos);
  CHECK(render_instance_prompt(later, tmpl) == p1);  // deterministic

  prompt::PromptTemplate broken{"no slot", "{scratchpad}", "{observation}"};
  CHECK_THROWS_AS(render_instance_prompt(first, broken), std::invalid_argument);
}

TEST_CASE("jsonl emission uses the documented field names") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.metadata["id"] = "abc";
  rec.events = {ev(CommitAction{"w", "s"})};
  const std::string out = instances_to_jsonl(export_instances(rec));
  CHECK(out ==
        R"j({"trajectory_id":"abc","step_index":0,"question":"q","scratchpad":"","target":"commit(raw=\"w\", summary=\"s\")","mode":"reasoning"})j"
        "\n");
}
