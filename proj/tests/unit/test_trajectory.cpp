#include <random>

#include "ctxkit/trajectory.hpp"
#include "doctest.h"

using namespace ctxkit;
using namespace ctxkit::traj;

namespace {

TrajectoryEvent ev(MemoryAction a, std::optional<std::string> obs = {},
                   std::string emitted = "") {
  if (emitted.empty()) emitted = canonical_call(a);
  return TrajectoryEvent{std::move(a), std::move(obs), std::move(emitted)};
}

}  // namespace

TEST_CASE("minimal document parses: header + commit + answer") {
  const std::string doc =
      R"j({"version":"1","mode":"reasoning","question":"q","metadata":{}})j"
      "\n"
      R"j({"action":"commit","raw":"work","summary":"x=3","emitted_text":"commit(...)"})j"
      "\n"
      R"j({"action":"answer","text":"3","emitted_text":"answer(\"3\")"})j"
      "\n";
  const TrajectoryRecord rec = parse_trajectory(doc);
  CHECK(rec.events.size() == 2);
  CHECK(rec.question == "q");
  CHECK(std::holds_alternative<CommitAction>(rec.events[0].action));
  CHECK(std::get<CommitAction>(rec.events[0].action).summary == "x=3");
  CHECK(std::holds_alternative<AnswerAction>(rec.events[1].action));
}

TEST_CASE("unknown action name reports its line") {
  const std::string doc =
      R"j({"version":"1","mode":"reasoning","question":"q","metadata":{}})j"
      "\n"
      R"j({"action":"comit","raw":"w","summary":"s","emitted_text":"x"})j"
      "\n";
  try {
    parse_trajectory(doc);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("comit") != std::string::npos);
  }
}

TEST_CASE("parse errors: malformed line, missing field, duplicate answer") {
  const std::string header =
      R"j({"version":"1","mode":"reasoning","question":"q","metadata":{}})j"
      "\n";
  CHECK_THROWS_AS(parse_trajectory(header + "not json\n"), ParseError);
  CHECK_THROWS_AS(
      parse_trajectory(header +
                       R"j({"action":"commit","raw":"w","emitted_text":"x"})j"
                       "\n"),
      ParseError);
  const std::string two_answers =
      header +
      R"j({"action":"answer","text":"a","emitted_text":"x"})j"
      "\n"
      R"j({"action":"answer","text":"b","emitted_text":"x"})j"
      "\n";
  CHECK_THROWS_AS(parse_trajectory(two_answers), ParseError);
  const std::string after_answer =
      header +
      R"j({"action":"answer","text":"a","emitted_text":"x"})j"
      "\n"
      R"j({"action":"commit","raw":"w","summary":"s","emitted_text":"x"})j"
      "\n";
  CHECK_THROWS_AS(parse_trajectory(after_answer), ParseError);
}

TEST_CASE("unknown version is rejected") {
  CHECK_THROWS_AS(
      parse_trajectory(
          R"j({"version":"2","mode":"reasoning","question":"q","metadata":{}})j"
          "\n"),
      ParseError);
}

TEST_CASE("observation placement is enforced") {
  const std::string header =
      R"j({"version":"1","mode":"research","question":"q","metadata":{}})j"
      "\n";
  // search without observation
  CHECK_THROWS_AS(
      parse_trajectory(header +
                       R"j({"action":"search","query":"x","emitted_text":"s"})j"
                       "\n"),
      ParseError);
  // commit with observation
  CHECK_THROWS_AS(
      parse_trajectory(
          header +
          R"j({"action":"commit","raw":"w","summary":"s","observation":"o","emitted_text":"c"})j"
          "\n"),
      ParseError);
}

TEST_CASE("env actions are research-mode only") {
  const std::string reasoning_header =
      R"j({"version":"1","mode":"reasoning","question":"q","metadata":{}})j"
      "\n";
  CHECK_THROWS_AS(
      parse_trajectory(
          reasoning_header +
          R"j({"action":"search","query":"x","observation":"o","emitted_text":"s"})j"
          "\n"),
      ParseError);
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events.push_back(ev(SearchAction{"x"}, "obs"));
  CHECK_THROWS_AS(serialize_trajectory(rec), InvariantError);
  rec.mode = Mode::Research;
  CHECK_NOTHROW(serialize_trajectory(rec));
}

TEST_CASE("empty-events record serializes to the header line only") {
  TrajectoryRecord rec;
  rec.question = "q";
  const std::string out = serialize_trajectory(rec);
  CHECK(out ==
        R"j({"version":"1","mode":"reasoning","question":"q","metadata":{}})j"
        "\n");
}

TEST_CASE("serialize rejects answer-not-last without partial output") {
  TrajectoryRecord rec;
  rec.question = "q";
  rec.events.push_back(ev(AnswerAction{"a"}));
  rec.events.push_back(ev(CommitAction{"w", "s"}));
  CHECK_THROWS_AS(serialize_trajectory(rec), InvariantError);
}

TEST_CASE("metadata and judge round-trip with canonical field order") {
  TrajectoryRecord rec;
  rec.mode = Mode::Research;
  rec.question = "who?";
  rec.ground_truth = "x";
  rec.judge = JudgeVerdict{true, "gpt-judge"};
  rec.metadata = {{"id", "t-7"}, {"source", "pool"}};
  rec.events.push_back(ev(SearchAction{"find x"}, "result text",
                          "I search. search(query=\"find x\")j"));
  rec.events.push_back(ev(CommitAction{"raw", "sum"}));
  rec.events.push_back(ev(AnswerAction{"x"}));
  const std::string doc = serialize_trajectory(rec);
  const TrajectoryRecord back = parse_trajectory(doc);
  CHECK(back == rec);
  CHECK(serialize_trajectory(back) == doc);
}

namespace {

// Deterministic random records for the round-trip property.
TrajectoryRecord random_record(std::mt19937& rng) {
  static const std::string words[] = {"alpha", "beta", "x=3", "sum\nis 12",
                                      "q\"uote", "tab\tchar", "plain"};
  auto word = [&rng]() {
    return words[std::uniform_int_distribution<std::size_t>(0, 6)(rng)];
  };
  TrajectoryRecord rec;
  rec.mode = std::bernoulli_distribution(0.5)(rng) ? Mode::Reasoning
                                                   : Mode::Research;
  rec.question = word();
  if (std::bernoulli_distribution(0.5)(rng)) rec.ground_truth = word();
  if (std::bernoulli_distribution(0.5)(rng))
    rec.judge = JudgeVerdict{std::bernoulli_distribution(0.5)(rng), word()};
  if (std::bernoulli_distribution(0.5)(rng)) rec.metadata["id"] = word();

  const int n = std::uniform_int_distribution<int>(0, 8)(rng);
  int committed = 0;
  for (int i = 0; i < n; ++i) {
    switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
      case 0:
        rec.events.push_back(ev(CommitAction{word(), word()}));
        committed++;
        break;
      case 1:
        rec.events.push_back(ev(ExpandAction{
            std::uniform_int_distribution<int>(1, committed + 1)(rng),
            std::bernoulli_distribution(0.5)(rng)
                ? std::optional<std::string>(word())
                : std::nullopt}));
        break;
      case 2:
        rec.events.push_back(ev(FoldAction{
            std::uniform_int_distribution<int>(1, committed + 1)(rng),
            std::nullopt}));
        break;
      case 3:
        if (rec.mode == Mode::Research) {
          rec.events.push_back(ev(SearchAction{word()}, word()));
          break;
        }
        [[fallthrough]];
      default:
        if (rec.mode == Mode::Research)
          rec.events.push_back(ev(VisitAction{word(), word()}, word()));
        else
          rec.events.push_back(ev(CommitAction{word(), word()}));
        break;
    }
  }
  if (std::bernoulli_distribution(0.6)(rng))
    rec.events.push_back(ev(AnswerAction{word()}));
  return rec;
}

}  // namespace

TEST_CASE("round-trip property over generated records") {
  std::mt19937 rng(20260808);
  for (int i = 0; i < 200; ++i) {
    const TrajectoryRecord rec = random_record(rng);
    const std::string doc = serialize_trajectory(rec);
    const TrajectoryRecord back = parse_trajectory(doc);
    REQUIRE(back == rec);                        // parse . serialize = id
    REQUIRE(serialize_trajectory(back) == doc);  // serialize . parse = id
  }
}

TEST_CASE("normalize_text collapses whitespace and lowercases") {
  CHECK(normalize_text("  A  b\n c ") == "a b c");
  CHECK(normalize_text("") == "");
  // idempotence
  std::mt19937 rng(7);
  for (int i = 0; i < 50; ++i) {
    std::string s;
    for (int j = 0; j < 30; ++j)
      s += " aA\t\nzZ09."[std::uniform_int_distribution<int>(0, 9)(rng)];
    CHECK(normalize_text(normalize_text(s)) == normalize_text(s));
  }
}

TEST_CASE("token counters") {
  const TokenCounter ws = whitespace_counter();
  CHECK(ws.count("") == 0);
  CHECK(ws.count("one two  three\nfour") == 4);
  const TokenCounter ch = char_counter();
  CHECK(ch.count("") == 0);
  CHECK(ch.count("abc") == 3);
  CHECK_THROWS_AS(counter_by_name("bytes"), std::invalid_argument);
  CHECK(counter_by_name("whitespace").name == "whitespace");
}

TEST_CASE("canonical_call emits the parseable grammar") {
  CHECK(canonical_call(CommitAction{"a \"b\"", "s"}) ==
        "commit(raw=\"a \\\"b\\\"\", summary=\"s\")");
  CHECK(canonical_call(ExpandAction{2, std::nullopt}) == "expand(step_id=2)");
  CHECK(canonical_call(FoldAction{1, "done"}) ==
        "fold(step_id=1, reason=\"done\")");
  CHECK(canonical_call(AnswerAction{"42"}) == "answer(\"42\")");
  CHECK(canonical_call(SearchAction{"x"}) == "search(query=\"x\")");
  CHECK(canonical_call(VisitAction{"http://a", "g"}) ==
        "visit(url=\"http://a\", goal=\"g\")");
}
