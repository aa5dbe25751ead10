#include <random>

#include "ctxkit/engine.hpp"
#include "ctxkit/metrics.hpp"
#include "doctest.h"

using namespace ctxkit;
using namespace ctxkit::metrics;
using traj::MemoryAction;

TEST_CASE("dependency_stepwise sums exactly") {
  CHECK(dependency_stepwise({{5, 6, 7, 8}}) == 26.0);
  CHECK(dependency_stepwise({{1}}) == 1.0);
  CHECK_THROWS_AS(dependency_stepwise({}), std::invalid_argument);
}

TEST_CASE("uniform-growth stepwise matches the closed summation formula") {
  // sum of (L_P + j) for j=1..L_O is L_P*L_O + L_O(L_O+1)/2
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t lp = std::uniform_int_distribution<int>(0, 200)(rng);
    const std::int64_t lo = std::uniform_int_distribution<int>(1, 400)(rng);
    const double expected = static_cast<double>(lp * lo + lo * (lo + 1) / 2.0);
    CHECK(dependency_stepwise(vanilla_schedule(lp, lo)) == expected);
  }
}

TEST_CASE("dependency_vanilla evaluates the trapezoid formula") {
  CHECK(dependency_vanilla(100, 200) == 40000.0);
  CHECK(dependency_stepwise(vanilla_schedule(100, 200)) == 40100.0);
  CHECK(dependency_vanilla(7, 0) == 0.0);
  CHECK(dependency_vanilla(10, 4) == 48.0);
  CHECK(dependency_stepwise(vanilla_schedule(10, 4)) == 50.0);
}

TEST_CASE("exact trapezoid identity over the full grid") {
  for (std::int64_t lp = 0; lp <= 50; ++lp)
    for (std::int64_t lo = 1; lo <= 200; ++lo) {
      const double diff = dependency_stepwise(vanilla_schedule(lp, lo)) -
                          dependency_vanilla(lp, lo);
      REQUIRE(diff == static_cast<double>(lo) / 2.0);
    }
}

TEST_CASE("dependency_h2o: both algebraic forms and the flat fallback") {
  // trapezoid + rectangle vs the expanded formula, exactly
  auto two_part = [](std::int64_t lp, std::int64_t lc, std::int64_t lo) {
    const double trap = static_cast<double>((lp + lc) * (lc - lp)) / 2.0;
    const double rect = static_cast<double>(lc * (lo - lc + lp));
    return trap + rect;
  };
  CHECK(dependency_h2o(10, 20, 50) == 950.0);
  CHECK(two_part(10, 20, 50) == 950.0);
  std::mt19937 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t lp = std::uniform_int_distribution<int>(0, 100)(rng);
    const std::int64_t lc =
        lp + std::uniform_int_distribution<int>(0, 100)(rng);
    const std::int64_t lo =
        (lc - lp) + std::uniform_int_distribution<int>(0, 300)(rng);
    REQUIRE(dependency_h2o(lp, lc, lo) == two_part(lp, lc, lo));
  }

  // cache never binds: vanilla fallback
  CHECK(dependency_h2o(10, 20, 5) == dependency_vanilla(10, 5));
  CHECK(dependency_vanilla(10, 5) == 62.5);

  // degenerate trapezoid: flat curve
  CHECK(dependency_h2o(7, 7, 100) == 700.0);

  CHECK_THROWS_AS(dependency_h2o(10, 5, 50), std::invalid_argument);
}

TEST_CASE("h2o closed form tracks the discrete schedule within (L_C-L_P)/2") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t lp = std::uniform_int_distribution<int>(0, 60)(rng);
    const std::int64_t lc = lp + std::uniform_int_distribution<int>(0, 60)(rng);
    const std::int64_t lo =
        (lc - lp) + std::uniform_int_distribution<int>(1, 200)(rng);
    const double discrete = dependency_stepwise(h2o_schedule(lp, lc, lo));
    const double closed = dependency_h2o(lp, lc, lo);
    REQUIRE(discrete - closed == static_cast<double>(lc - lp) / 2.0);
  }
}

TEST_CASE("peak") {
  CHECK(peak({{5, 6, 7, 8}}) == 8);
  CHECK(peak(vanilla_schedule(100, 200)) == 300);
  CHECK_THROWS_AS(peak({}), std::invalid_argument);
}

TEST_CASE("compression schedule reproduces the reported peak reductions") {
  ScheduleParams p;
  p.prompt_len = 125;
  p.segment_len = 56;
  p.cache_size = 7;
  p.anchor_len = 1;

  p.output_len = 1024;
  const std::int64_t peak_1k = peak(compress_schedule(p));
  CHECK(peak_1k == 325);
  const double reduction_1k =
      1.0 - static_cast<double>(peak_1k) / static_cast<double>(125 + 1024);
  CHECK(reduction_1k > 0.70);
  CHECK(reduction_1k < 0.74);

  p.output_len = 32768;
  const std::int64_t peak_32k = peak(compress_schedule(p));
  const double reduction_32k =
      1.0 - static_cast<double>(peak_32k) / static_cast<double>(125 + 32768);
  CHECK(reduction_32k > 0.83);
  CHECK(reduction_32k < 0.87);
}

TEST_CASE("single-segment compression equals vanilla growth") {
  ScheduleParams p;
  p.prompt_len = 40;
  p.output_len = 30;
  p.segment_len = 30;  // never fills mid-generation
  p.cache_size = 3;
  p.anchor_len = 1;
  CHECK(compress_schedule(p).contexts == vanilla_schedule(40, 30).contexts);
}

TEST_CASE("compression must shrink") {
  ScheduleParams p;
  p.prompt_len = 10;
  p.output_len = 100;
  p.segment_len = 8;
  p.cache_size = 7;
  p.anchor_len = 1;  // retained == segment_len
  CHECK_THROWS_AS(compress_schedule(p), std::invalid_argument);
}

TEST_CASE("compressed peak is weakly increasing in cache size") {
  ScheduleParams p;
  p.prompt_len = 125;
  p.output_len = 2048;
  p.segment_len = 56;
  p.anchor_len = 1;
  std::int64_t prev = 0;
  for (std::int64_t c = 1; c <= 40; ++c) {
    p.cache_size = c;
    const std::int64_t pk = peak(compress_schedule(p));
    CHECK(pk >= prev);
    prev = pk;
  }
}

TEST_CASE("vanilla dependency is strictly increasing in output length") {
  double prev = -1.0;
  for (std::int64_t lo = 1; lo <= 100; ++lo) {
    const double dep = dependency_vanilla(37, lo);
    CHECK(dep > prev);
    prev = dep;
  }
}

TEST_CASE("peak and dependency are decoupled") {
  // same peak, different dependency
  const DecodeSchedule a{{10, 10, 10}};
  const DecodeSchedule b{{1, 1, 10}};
  CHECK(peak(a) == peak(b));
  CHECK(dependency_stepwise(a) != dependency_stepwise(b));
  // same dependency, different peak
  const DecodeSchedule c{{6, 6, 6}};
  const DecodeSchedule d{{1, 8, 9}};
  CHECK(dependency_stepwise(c) == dependency_stepwise(d));
  CHECK(peak(c) != peak(d));
}

TEST_CASE("compression ratio arithmetic") {
  const double h2o = compression_ratio(16.6e6, 4.4e6);
  CHECK(std::abs(h2o - 3.8) < 0.05);
  CHECK(std::round(h2o * 10.0) / 10.0 == 3.8);
  const double managed = compression_ratio(16.6e6, 3.7e6);
  CHECK(std::abs(managed - 4.5) < 0.05);
  CHECK(std::round(managed * 10.0) / 10.0 == 4.5);
  CHECK(compression_ratio(123.0, 123.0) == 1.0);
  CHECK_THROWS_AS(compression_ratio(1.0, 0.0), std::invalid_argument);
}

// ----------------------------------------------------------------------------
// Trajectory-level metrics
// ----------------------------------------------------------------------------

namespace {

traj::TrajectoryEvent ev(MemoryAction a, std::optional<std::string> obs = {},
                         std::string emitted = "") {
  if (emitted.empty()) emitted = traj::canonical_call(a);
  return traj::TrajectoryEvent{a, std::move(obs), std::move(emitted)};
}

}  // namespace

TEST_CASE("active context series counts rendered input plus emission") {
  traj::TrajectoryRecord rec;
  rec.question = "Q";
  rec.events.push_back(
      ev(traj::AnswerAction{"done"}, {}, "three word answer"));
  // single event: prompt renders the base template only (empty scratchpad)
  prompt::PromptTemplate tiny{"{question} p2 p3 p4",
                              "\nscratch {scratchpad}", "\nobs {observation}"};
  const auto series =
      active_context_series(rec, traj::whitespace_counter(), tiny);
  REQUIRE(series.size() == 1);
  CHECK(series[0] == 7);  // 4-word prompt + 3-word emission
}

TEST_CASE("series length equals event count and commits shrink later rounds") {
  traj::TrajectoryRecord rec;
  rec.question = "Q";
  std::string long_raw;
  for (int i = 0; i < 60; ++i) long_raw += "word" + std::to_string(i) + " ";
  rec.events.push_back(ev(traj::CommitAction{long_raw, "short summary"}));
  rec.events.push_back(ev(traj::CommitAction{"more text here", "another one"}));
  rec.events.push_back(ev(traj::AnswerAction{"x"}));

  const prompt::PromptTemplate tmpl = prompt::template_by_id("default");
  const traj::TokenCounter counter = traj::whitespace_counter();
  const auto series = active_context_series(rec, counter, tmpl);
  REQUIRE(series.size() == rec.events.size());

  // Oracle: re-render round 1 with the archived entity forced active; the
  // projected scratchpad must be strictly smaller than the raw one.
  engine::ManagedContext ctx;
  ctx.apply(rec.events[0].action);
  const std::string projected = prompt::render_round_prompt(
      tmpl, rec.question, ctx.render(), std::nullopt);
  engine::ManagedContext forced;
  forced.apply(rec.events[0].action);
  forced.apply(traj::ExpandAction{1, {}});
  const std::string all_active = prompt::render_round_prompt(
      tmpl, rec.question, forced.render(), std::nullopt);
  CHECK(counter.count(projected) < counter.count(all_active));
  CHECK(series[1] ==
        static_cast<std::int64_t>(counter.count(projected) +
                                  counter.count(rec.events[1].emitted_text)));
}

TEST_CASE("action distribution counts and ratios") {
  traj::TrajectoryRecord rec;
  rec.question = "q";
  rec.events = {
      ev(traj::CommitAction{"a", "s"}),
      ev(traj::ExpandAction{1, {}}),
      ev(traj::FoldAction{1, {}}),
      ev(traj::CommitAction{"b", "t"}),
      ev(traj::AnswerAction{"x"}),
  };
  const ActionDistribution d = action_distribution(rec);
  CHECK(d.commit == 2);
  CHECK(d.expand == 1);
  CHECK(d.fold == 1);
  CHECK(d.env == 0);
  REQUIRE(d.commit_ratio.has_value());
  CHECK(*d.commit_ratio + *d.expand_ratio + *d.fold_ratio ==
        doctest::Approx(1.0));

  traj::TrajectoryRecord empty;
  empty.question = "q";
  empty.events = {ev(traj::AnswerAction{"x"})};
  const ActionDistribution none = action_distribution(empty);
  CHECK(none.commit == 0);
  CHECK_FALSE(none.commit_ratio.has_value());
}

TEST_CASE("pre-commit length histogram") {
  traj::TrajectoryRecord rec;
  rec.question = "q";
  std::string ten_tokens;
  for (int i = 0; i < 10; ++i) ten_tokens += "w ";
  rec.events = {ev(traj::CommitAction{ten_tokens, "s"})};

  const Histogram h =
      pre_commit_length_stats({rec}, traj::whitespace_counter(), {0, 8, 16});
  CHECK(h.counts == std::vector<std::int64_t>{0, 1});
  CHECK(h.total == 1);
  CHECK(h.mean == 10.0);

  const Histogram empty =
      pre_commit_length_stats({}, traj::whitespace_counter(), {0, 8, 16});
  CHECK(empty.counts == std::vector<std::int64_t>{0, 0});
  CHECK(empty.total == 0);

  CHECK_THROWS_AS(
      pre_commit_length_stats({rec}, traj::whitespace_counter(), {8, 0}),
      std::invalid_argument);

  // totals always equal the commit count, even out of range
  traj::TrajectoryRecord many;
  many.question = "q";
  many.events = {
      ev(traj::CommitAction{"one two three four five six seven eight nine ten "
                            "eleven twelve thirteen fourteen fifteen sixteen "
                            "seventeen eighteen",
                            "s"}),
      ev(traj::CommitAction{"tiny", "s"}),
  };
  const Histogram clamped =
      pre_commit_length_stats({many}, traj::whitespace_counter(), {2, 8, 16});
  CHECK(clamped.total == 2);
  CHECK(clamped.counts[0] + clamped.counts[1] == 2);
}

TEST_CASE("segment length stats") {
  const SegmentLengthStats s = segment_length_stats({"ab\n\ncdef"}, "\n\n");
  CHECK(s.total_segments == 2);
  CHECK(s.counts.at(2) == 1);
  CHECK(s.counts.at(4) == 1);

  const SegmentLengthStats one = segment_length_stats({"plain"}, "\n\n");
  CHECK(one.total_segments == 1);
  CHECK(one.peak_length == 5);

  // segment count = delimiter occurrences + 1 per text
  const SegmentLengthStats multi =
      segment_length_stats({"a|bb|ccc", "dd"}, "|");
  CHECK(multi.total_segments == 4);

  CHECK_THROWS_AS(segment_length_stats({"x"}, ""), std::invalid_argument);
}

TEST_CASE("acc_at_budget: values and monotonicity") {
  const std::vector<BudgetedResult> results = {
      {true, 3}, {false, 2}, {true, 10}};
  const auto curve = acc_at_budget(results, {5, 10});
  CHECK(curve[0].accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(curve[1].accuracy == doctest::Approx(2.0 / 3.0));  // overall rate

  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BudgetedResult> random_results;
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    for (int i = 0; i < n; ++i)
      random_results.push_back(
          {std::bernoulli_distribution(0.5)(rng),
           std::uniform_int_distribution<int>(0, 20)(rng)});
    std::vector<int> budgets;
    for (int b = 0; b <= 20; ++b) budgets.push_back(b);
    const auto c = acc_at_budget(random_results, budgets);
    for (std::size_t i = 1; i < c.size(); ++i)
      REQUIRE(c[i].accuracy >= c[i - 1].accuracy);
  }

  CHECK_THROWS_AS(acc_at_budget({}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(acc_at_budget({{true, -1}}, {1}), std::invalid_argument);
}

TEST_CASE("csv emission") {
  CHECK(schedule_to_csv({{5, 6}}) == "step,context\n1,5\n2,6\n");
  CHECK(curve_to_csv({{1, 0.5}}) == "budget,accuracy\n1,0.5\n");
}
