// ctxkit command line: validation, metrics, export, schedule simulation,
// mask emission, trajectory synthesis and replay. Every subcommand is a
// thin shell over one library operation; reports go to stdout and
// diagnostics to stderr. Exit codes: 0 success, 1 domain failure,
// 2 usage or parse errors.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctxkit/engine.hpp"
#include "ctxkit/exporter.hpp"
#include "ctxkit/mask.hpp"
#include "ctxkit/metrics.hpp"
#include "ctxkit/prompt.hpp"
#include "ctxkit/synthesis.hpp"
#include "ctxkit/trajectory.hpp"
#include "ctxkit/validator.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ctxkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Runs fn over each file concurrently, keeping input order on output.
template <typename Fn>
auto map_files(const std::vector<std::string>& files, Fn fn) {
  using Result = std::invoke_result_t<Fn, const std::string&>;
  std::vector<std::future<Result>> futures;
  futures.reserve(files.size());
  for (const std::string& f : files)
    futures.push_back(std::async(std::launch::async, fn, f));
  std::vector<Result> out;
  out.reserve(files.size());
  for (auto& fut : futures) out.push_back(fut.get());
  return out;
}

struct ValidateOptions {
  std::vector<std::string> files;
  std::string mode;  // "" = use each record's own mode
  bool strict = false;
  double lcs_threshold = 0.9;
  std::string similarity_field = "raw";
  bool json = false;
};

int cmd_validate(const ValidateOptions& opt) {
  bool any_inadmissible = false;
  auto results = map_files(opt.files, [&opt](const std::string& file) {
    const traj::TrajectoryRecord rec = traj::parse_trajectory(read_file(file));
    pruning::ValidatorConfig cfg;
    cfg.lcs_threshold = opt.lcs_threshold;
    cfg.similarity_field = opt.similarity_field == "summary"
                               ? pruning::SimilarityField::Summary
                               : pruning::SimilarityField::Raw;
    cfg.mode = rec.mode;
    if (opt.mode == "reasoning") cfg.mode = traj::Mode::Reasoning;
    if (opt.mode == "research") cfg.mode = traj::Mode::Research;
    const pruning::AdmissibilityReport report = pruning::validate(rec, cfg);
    if (opt.json) {
      nlohmann::ordered_json obj;
      obj["file"] = file;
      obj["report"] = nlohmann::ordered_json::parse(
          pruning::report_to_json(report));
      return obj.dump() + "\n";
    }
    return file + ": " + pruning::report_to_text(report) + "\n";
  });
  for (const std::string& text : results) {
    std::cout << text;
    if (text.find(": inadmissible") != std::string::npos ||
        text.find("\"admissible\":false") != std::string::npos)
      any_inadmissible = true;
  }
  return (opt.strict && any_inadmissible) ? kExitDomain : kExitOk;
}

struct MetricsOptions {
  std::vector<std::string> files;
  std::string token_counter = "whitespace";
  std::string out;
  bool acc_budget = false;
};

int cmd_metrics(const MetricsOptions& opt) {
  const traj::TokenCounter counter = traj::counter_by_name(opt.token_counter);
  const prompt::PromptTemplate tmpl = prompt::template_by_id("default");

  std::string csv;
  if (opt.acc_budget) {
    std::vector<metrics::BudgetedResult> results;
    for (const std::string& file : opt.files) {
      const traj::TrajectoryRecord rec =
          traj::parse_trajectory(read_file(file));
      metrics::BudgetedResult r;
      r.success = rec.judge && rec.judge->correct;
      r.env_actions = metrics::action_distribution(rec).env;
      results.push_back(r);
    }
    int max_env = 0;
    for (const metrics::BudgetedResult& r : results)
      max_env = std::max(max_env, r.env_actions);
    std::vector<int> budgets;
    for (int b = 0; b <= max_env; ++b) budgets.push_back(b);
    csv = metrics::curve_to_csv(metrics::acc_at_budget(results, budgets));
  } else {
    struct FileMetrics {
      std::string rows;
      std::string summary;
    };
    auto results = map_files(opt.files, [&](const std::string& file) {
      const traj::TrajectoryRecord rec =
          traj::parse_trajectory(read_file(file));
      const std::vector<std::int64_t> series =
          metrics::active_context_series(rec, counter, tmpl);
      FileMetrics out;
      for (std::size_t t = 0; t < series.size(); ++t) {
        out.rows += file + "," + std::to_string(t) + "," +
                    std::string(traj::action_name(rec.events[t].action)) +
                    "," + std::to_string(series[t]) + "\n";
      }
      const metrics::ActionDistribution d = metrics::action_distribution(rec);
      std::ostringstream summary;
      summary << file << ": commits=" << d.commit << " expands=" << d.expand
              << " folds=" << d.fold << " env=" << d.env;
      if (d.commit_ratio)
        summary << " ratios=" << *d.commit_ratio << "/" << *d.expand_ratio
                << "/" << *d.fold_ratio;
      out.summary = summary.str();
      return out;
    });
    csv = "file,event_index,action,active_context\n";
    for (const FileMetrics& r : results) {
      csv += r.rows;
      std::cerr << r.summary << "\n";
    }
  }

  if (opt.out.empty()) {
    std::cout << csv;
  } else {
    write_file(opt.out, csv);
  }
  return kExitOk;
}

struct ExportOptions {
  std::vector<std::string> files;
  std::string out_dir;
  bool include_env_turns = true;
};

int cmd_export(const ExportOptions& opt) {
  fs::create_directories(opt.out_dir);
  auto results = map_files(opt.files, [&opt](const std::string& file) {
    const traj::TrajectoryRecord rec = traj::parse_trajectory(read_file(file));
    exporter::ExportConfig cfg;
    cfg.include_env_turns = opt.include_env_turns;
    cfg.trajectory_id = fs::path(file).stem().string();
    const auto instances = exporter::export_instances(rec, cfg);
    const fs::path out_path =
        fs::path(opt.out_dir) / (fs::path(file).stem().string() +
                                 ".instances.jsonl");
    write_file(out_path, exporter::instances_to_jsonl(instances));
    return std::to_string(instances.size()) + " instances -> " +
           out_path.string();
  });
  for (const std::string& r : results) std::cerr << r << "\n";
  return kExitOk;
}

struct SimulateOptions {
  std::int64_t prompt_len = 0;
  std::int64_t output_len = 0;
  std::string mode;
  std::int64_t cache_limit = 0;
  std::int64_t segment_len = 0;
  std::int64_t cache_size = 0;
  std::int64_t anchor_len = 1;
  bool no_compression_passes = false;
};

int cmd_simulate(const SimulateOptions& opt) {
  metrics::DecodeSchedule schedule;
  if (opt.mode == "vanilla") {
    schedule = metrics::vanilla_schedule(opt.prompt_len, opt.output_len);
  } else if (opt.mode == "h2o") {
    if (opt.cache_limit <= 0)
      throw CLI::ValidationError("--cache-limit is required for h2o mode");
    schedule = metrics::h2o_schedule(opt.prompt_len, opt.cache_limit,
                                     opt.output_len);
  } else if (opt.mode == "compress") {
    if (opt.segment_len <= 0 || opt.cache_size <= 0)
      throw CLI::ValidationError(
          "--segment-len and --cache-size are required for compress mode");
    metrics::ScheduleParams params;
    params.prompt_len = opt.prompt_len;
    params.output_len = opt.output_len;
    params.segment_len = opt.segment_len;
    params.cache_size = opt.cache_size;
    params.anchor_len = opt.anchor_len;
    params.count_compression_passes = !opt.no_compression_passes;
    schedule = metrics::compress_schedule(params);
  } else {
    throw CLI::ValidationError("--mode must be vanilla, h2o or compress");
  }

  std::cout << metrics::schedule_to_csv(schedule);

  const std::int64_t pk = metrics::peak(schedule);
  const double dep = metrics::dependency_stepwise(schedule);
  std::cerr << "peak=" << pk << " dependency=" << dep;
  if (opt.mode == "compress") {
    const std::int64_t vanilla_peak = opt.prompt_len + opt.output_len;
    std::cerr << " vanilla_peak=" << vanilla_peak << " peak_reduction="
              << 100.0 * (1.0 - static_cast<double>(pk) /
                                    static_cast<double>(vanilla_peak))
              << "%";
  }
  std::cerr << "\n";
  return kExitOk;
}

struct MaskOptions {
  std::string layout;
  std::string format = "csv";
  bool labels = false;
};

int cmd_mask(const MaskOptions& opt) {
  const mask::SegmentLayout layout = mask::parse_layout(opt.layout);
  if (opt.labels) {
    const mask::LabelMask labels = mask::build_label_mask(layout);
    std::cout << (opt.format == "pbm" ? mask::label_mask_to_pbm(labels)
                                      : mask::label_mask_to_csv(labels));
    return kExitOk;
  }
  const mask::AttentionMask m = mask::build_attention_mask(layout);
  std::cout << (opt.format == "pbm" ? mask::mask_to_pbm(m)
                                    : mask::mask_to_csv(m));
  return kExitOk;
}

struct SynthesizeOptions {
  std::string questions_file;
  std::string policy;
  std::string governor;
  std::string tools;
  std::string mode;
  std::string out_dir;
  int max_rounds = 32;
  int env_budget = 16;
};

synth::PolicyAdapter make_policy(const std::string& spec) {
  if (spec.rfind("scripted:", 0) == 0)
    return synth::scripted_policy_from_file(spec.substr(9));
  if (spec.rfind("endpoint:", 0) == 0)
    return synth::endpoint_policy(spec.substr(9));
  throw CLI::ValidationError("policy must be scripted:<file> or endpoint:<url>");
}

int cmd_synthesize(const SynthesizeOptions& opt) {
  std::vector<std::string> questions;
  {
    std::istringstream in(read_file(opt.questions_file));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) questions.push_back(line);
  }
  if (questions.empty())
    throw std::runtime_error("no questions in " + opt.questions_file);

  synth::ToolSet tools;
  if (!opt.tools.empty()) {
    if (opt.tools.rfind("mock:", 0) != 0)
      throw CLI::ValidationError("tools must be mock:<dir>");
    tools = synth::mock_tools(opt.tools.substr(5));
  }

  synth::SynthesisConfig cfg;
  cfg.max_rounds = opt.max_rounds;
  cfg.env_budget = opt.env_budget;
  const bool research =
      opt.mode == "research" || (opt.mode.empty() && !opt.governor.empty());
  cfg.mode = research ? traj::Mode::Research : traj::Mode::Reasoning;

  if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);

  for (std::size_t i = 0; i < questions.size(); ++i) {
    // Scripted policies are stateful; each question gets a fresh one.
    synth::PolicyAdapter policy = make_policy(opt.policy);
    synth::SynthesisOutcome outcome;
    if (!opt.governor.empty()) {
      synth::PolicyAdapter governor = make_policy(opt.governor);
      outcome = synth::orchestrate(questions[i], policy, governor, tools, cfg);
    } else {
      outcome = synth::run(questions[i], policy, tools, cfg);
    }
    const std::string serialized = traj::serialize_trajectory(outcome.record);
    if (opt.out_dir.empty()) {
      if (i) std::cout << "\n";
      std::cout << serialized;
    } else {
      write_file(fs::path(opt.out_dir) / ("q" + std::to_string(i) + ".jsonl"),
                 serialized);
    }
    std::cerr << "q" << i << ": " << synth::status_name(outcome.status)
              << " rounds=" << outcome.stats.rounds
              << " env=" << outcome.stats.env_actions
              << " mem=" << outcome.stats.mem_actions << "\n";
  }
  return kExitOk;
}

struct ReplayOptions {
  std::string file;
  int at = -1;
};

int cmd_replay(const ReplayOptions& opt) {
  const traj::TrajectoryRecord rec =
      traj::parse_trajectory(read_file(opt.file));
  const std::size_t upto = opt.at >= 0
                               ? std::min<std::size_t>(opt.at, rec.events.size())
                               : rec.events.size();
  engine::ManagedContext ctx;
  for (std::size_t i = 0; i < upto; ++i) {
    if (auto err = ctx.apply(rec.events[i].action)) {
      std::cerr << "engine error at event " << i << ": " << err->describe()
                << "\n";
      return kExitDomain;
    }
  }
  std::cout << ctx.render() << "\n";
  std::cerr << "entities=" << ctx.entity_count()
            << " active=" << ctx.active_count()
            << " terminated=" << (ctx.terminated() ? "yes" : "no") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressed-context reasoning toolkit"};
  app.require_subcommand(1);

  ValidateOptions validate_opt;
  CLI::App* validate = app.add_subcommand(
      "validate", "check trajectory admissibility (behavioral pruning)");
  validate->add_option("files", validate_opt.files, "trajectory files")
      ->required();
  validate->add_option("--mode", validate_opt.mode, "override ruleset mode")
      ->check(CLI::IsMember({"reasoning", "research"}));
  validate->add_flag("--strict", validate_opt.strict,
                     "exit 1 when any input is inadmissible");
  validate->add_option("--lcs-threshold", validate_opt.lcs_threshold,
                       "commit-similarity threshold (default 0.9)");
  validate->add_option("--similarity-field", validate_opt.similarity_field,
                       "compare commit raw text or summaries")
      ->check(CLI::IsMember({"raw", "summary"}));
  validate->add_flag("--json", validate_opt.json, "emit JSON reports");

  MetricsOptions metrics_opt;
  CLI::App* metrics_cmd = app.add_subcommand(
      "metrics", "per-round active-context series and action distribution");
  metrics_cmd->add_option("files", metrics_opt.files, "trajectory files")
      ->required();
  metrics_cmd
      ->add_option("--token-counter", metrics_opt.token_counter,
                   "whitespace or chars")
      ->check(CLI::IsMember({"whitespace", "chars"}));
  metrics_cmd->add_option("--out", metrics_opt.out,
                          "CSV output path (default stdout)");
  metrics_cmd->add_flag("--acc-budget", metrics_opt.acc_budget,
                        "emit the success-within-budget curve instead");

  ExportOptions export_opt;
  CLI::App* export_cmd = app.add_subcommand(
      "export", "decompose trajectories into training instances");
  export_cmd->add_option("files", export_opt.files, "trajectory files")
      ->required();
  export_cmd->add_option("--out", export_opt.out_dir, "output directory")
      ->required();
  export_cmd->add_flag("--include-env-turns,!--no-include-env-turns",
                       export_opt.include_env_turns,
                       "also export search/visit emissions (default on)");

  SimulateOptions simulate_opt;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "emit a decode schedule as CSV");
  simulate->add_option("--prompt-len", simulate_opt.prompt_len)->required();
  simulate->add_option("--output-len", simulate_opt.output_len)->required();
  simulate->add_option("--mode", simulate_opt.mode, "vanilla, h2o or compress")
      ->required();
  simulate->add_option("--cache-limit", simulate_opt.cache_limit,
                       "retained-token cap (h2o)");
  simulate->add_option("--segment-len", simulate_opt.segment_len,
                       "tokens per compressed segment");
  simulate->add_option("--cache-size", simulate_opt.cache_size,
                       "gist tokens retained per segment");
  simulate->add_option("--anchor-len", simulate_opt.anchor_len,
                       "resume tokens retained per segment (default 1)");
  simulate->add_flag("--no-compression-passes",
                     simulate_opt.no_compression_passes,
                     "exclude boundary forward passes from the schedule");

  MaskOptions mask_opt;
  CLI::App* mask_cmd = app.add_subcommand(
      "mask", "emit the attention mask for a layout descriptor");
  mask_cmd->add_option("--layout", mask_opt.layout,
                       "x=<n>;seg=<n!t|n>,...;c=<n>;o=<n>")
      ->required();
  mask_cmd->add_option("--format", mask_opt.format, "csv or pbm")
      ->check(CLI::IsMember({"csv", "pbm"}));
  mask_cmd->add_flag("--labels", mask_opt.labels,
                     "emit the label (prediction-target) mask instead");

  SynthesizeOptions synth_opt;
  CLI::App* synth_cmd = app.add_subcommand(
      "synthesize", "drive a policy against the memory engine");
  synth_cmd->add_option("--questions", synth_opt.questions_file,
                        "one question per line")
      ->required();
  synth_cmd->add_option("--policy", synth_opt.policy,
                        "scripted:<file> or endpoint:<url>")
      ->required();
  synth_cmd->add_option("--governor", synth_opt.governor,
                        "second policy that curates commits (research)");
  synth_cmd->add_option("--tools", synth_opt.tools, "mock:<dir>");
  synth_cmd->add_option("--mode", synth_opt.mode, "reasoning or research")
      ->check(CLI::IsMember({"reasoning", "research"}));
  synth_cmd->add_option("--max-rounds", synth_opt.max_rounds);
  synth_cmd->add_option("--env-budget", synth_opt.env_budget);
  synth_cmd->add_option("--out", synth_opt.out_dir,
                        "write one record per question into this directory");

  ReplayOptions replay_opt;
  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "replay a trajectory and print the scratchpad");
  replay_cmd->add_option("file", replay_opt.file, "trajectory file")
      ->required();
  replay_cmd->add_option("--at", replay_opt.at,
                         "render after this many events (default all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_opt);
    if (metrics_cmd->parsed()) return cmd_metrics(metrics_opt);
    if (export_cmd->parsed()) return cmd_export(export_opt);
    if (simulate->parsed()) return cmd_simulate(simulate_opt);
    if (mask_cmd->parsed()) return cmd_mask(mask_opt);
    if (synth_cmd->parsed()) return cmd_synthesize(synth_opt);
    if (replay_cmd->parsed()) return cmd_replay(replay_opt);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const traj::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
