#include <doctest.h>

#include "safedit/orchestrator.hpp"
#include "support.hpp"

using namespace safedit;
using namespace safedit::testing;
using nlohmann::json;

namespace {

orchestrator::PipelineConfig config(int max_refinements = 3) {
  orchestrator::PipelineConfig c;
  c.variant = corpus::VisibilityVariant::Highlight;
  c.max_refinements = max_refinements;
  c.test_timeout = verifier::Seconds(sandbox_timeout_seconds());
  return c;
}

corpus::EditTask corpus_task(const std::string& id) {
  for (const auto& t : fixture_corpus()) {
    if (t.id == id) {
      return t;
    }
  }
  throw std::runtime_error("no corpus task " + id);
}

std::string fragments(const std::string& anchor, const std::string& replacement) {
  return json::array({{{"anchor", anchor}, {"replacement", replacement}}}).dump();
}

std::string plan_json() { return planner::to_json(calc_plan()).dump(); }

void check_invariants(const orchestrator::TaskTrace& t) {
  CHECK(t.attempts_used == static_cast<int>(t.iterations.size()));
  CHECK(t.attempts_used <= 1 + t.max_refinements);
  for (std::size_t i = 0; i < t.iterations.size(); ++i) {
    CHECK(t.iterations[i].index == static_cast<int>(i) + 1);
    if (i + 1 < t.iterations.size()) {
      CHECK_FALSE(t.iterations[i].succeeded());
      REQUIRE(t.iterations[i].feedback.has_value());
      CHECK(*t.iterations[i].feedback == fal::render_feedback(t.iterations[i].reports));
    } else {
      CHECK_FALSE(t.iterations[i].feedback.has_value());
    }
  }
  CHECK((t.verdict == orchestrator::Verdict::Pass) ==
        (!t.iterations.empty() && t.iterations.back().succeeded()));
}

}  // namespace

TEST_CASE("config validation") {
  auto c = config();
  CHECK_NOTHROW(orchestrator::validate(c));
  c.max_refinements = -1;
  CHECK_THROWS_AS(orchestrator::validate(c), std::invalid_argument);
  c = config();
  c.test_timeout = verifier::Seconds(0);
  CHECK_THROWS_AS(orchestrator::validate(c), std::invalid_argument);
}

TEST_CASE("trace file names") {
  CHECK(orchestrator::trace_filename("calc", corpus::VisibilityVariant::HighlightCursor) ==
        "calc.highlight_cursor.trace.json");
}

TEST_CASE("cassette first_try passes in one attempt") {
  provider::ReplayProvider replay(cassette("first_try"));
  const auto t = orchestrator::run_task(corpus_task("first_try"), config(), replay);
  CHECK(t.verdict == orchestrator::Verdict::Pass);
  CHECK(t.attempts_used == 1);
  CHECK(t.plan.has_value());
  check_invariants(t);
}

TEST_CASE("cassette fix_on_2 passes on the second attempt") {
  provider::ReplayProvider replay(cassette("fix_on_2"));
  const auto t = orchestrator::run_task(corpus_task("fix_on_2"), config(), replay);
  CHECK(t.verdict == orchestrator::Verdict::Pass);
  CHECK(t.attempts_used == 2);
  REQUIRE(t.iterations.size() == 2);
  CHECK(t.iterations[0].reports.at(0).type == fal::FailureType::AssertionMismatch);
  check_invariants(t);
}

TEST_CASE("cassette never_fixes exhausts the budget") {
  provider::ReplayProvider replay(cassette("never_fixes"));
  const auto t = orchestrator::run_task(corpus_task("never_fixes"), config(), replay);
  CHECK(t.verdict == orchestrator::Verdict::Fail);
  CHECK(t.attempts_used == 4);
  check_invariants(t);
}

TEST_CASE("feedback of the failed attempt reaches the next editor call") {
  QueueProvider p({plan_json(), fragments("return a + b", "return b - a"), fragments("return a + b", "return a - b")});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(), p);
  CHECK(t.verdict == orchestrator::Verdict::Pass);
  REQUIRE(t.iterations.size() == 2);
  const auto requests = p.requests();
  REQUIRE(requests.size() == 3);
  const auto& second_edit = requests[2].messages.back().content;
  CHECK(second_edit.find(*t.iterations[0].feedback) != std::string::npos);
  CHECK(second_edit.find("return a + b") != std::string::npos);
  CHECK(requests[1].messages.back().content.find("[TEST]") == std::string::npos);
  check_invariants(t);
}

TEST_CASE("apply failure becomes a synthetic report and the loop continues") {
  QueueProvider p({plan_json(), fragments("return a + c", "return a - b"), fragments("return a + b", "return a - b")});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(), p);
  CHECK(t.verdict == orchestrator::Verdict::Pass);
  REQUIRE(t.iterations.size() == 2);
  const auto& first = t.iterations[0];
  CHECK(first.apply_error.has_value());
  CHECK_FALSE(first.run.has_value());
  REQUIRE(first.reports.size() == 1);
  CHECK(first.reports[0].test == orchestrator::kApplyTest);
  check_invariants(t);
}

TEST_CASE("plan failure ends the task without attempts") {
  QueueProvider p({"nope", "still nope"});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(), p);
  CHECK(t.verdict == orchestrator::Verdict::Fail);
  CHECK(t.plan_error.has_value());
  CHECK(t.iterations.empty());
  CHECK(t.attempts_used == 0);
  CHECK(t.planner_exchanges.size() == 2);
}

TEST_CASE("editor failure ends the loop") {
  QueueProvider p({plan_json(), "prose", "more prose"});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(), p);
  CHECK(t.verdict == orchestrator::Verdict::Fail);
  REQUIRE(t.iterations.size() == 1);
  CHECK(t.iterations[0].edit_error.has_value());
  CHECK(t.iterations[0].editor_exchanges.size() == 2);
  check_invariants(t);
}

TEST_CASE("zero refinements means a single attempt") {
  QueueProvider p({plan_json(), fragments("return a + b", "return b - a")});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(0), p);
  CHECK(t.verdict == orchestrator::Verdict::Fail);
  CHECK(t.attempts_used == 1);
  check_invariants(t);
}

TEST_CASE("full-file fragments are flagged") {
  const auto task = fixture_task("calc");
  auto fixed = task.original_code;
  fixed.replace(fixed.find("return a + b"), 12, "return a - b");
  QueueProvider p({plan_json(), fragments(task.original_code, fixed)});
  const auto t = orchestrator::run_task(task, config(), p);
  CHECK(t.verdict == orchestrator::Verdict::Pass);
  CHECK(t.iterations.at(0).full_file);
}

TEST_CASE("trace JSON round-trip") {
  QueueProvider p({plan_json(), fragments("return a + c", "x"), fragments("return a + b", "return b - a"),
                   fragments("return a + b", "return a - b")});
  const auto t = orchestrator::run_task(fixture_task("calc"), config(), p);
  const auto doc = orchestrator::to_json(t);
  const auto back = orchestrator::trace_from_json(doc);
  CHECK(orchestrator::to_json(back) == doc);
  CHECK(doc.at("verdict") == "pass");
  CHECK(doc.at("attempts_used") == 3);
}
