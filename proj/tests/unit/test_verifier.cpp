#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <future>

#include "safedit/verifier.hpp"
#include "support.hpp"

using namespace safedit;
using namespace safedit::testing;
namespace fs = std::filesystem;

namespace {

corpus::EditTask script_task(std::vector<std::string> command) {
  auto task = fixture_task("plain");
  task.test_command = std::move(command);
  return task;
}

verifier::SandboxOptions options_under(const fs::path& root, double limit = 10.0) {
  verifier::SandboxOptions o;
  o.limit = verifier::Seconds(limit);
  o.temp_root = root;
  return o;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("safedit-verifier-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fixed_calc() {
  auto code = fixture_task("calc").original_code;
  code.replace(code.find("return a + b"), 12, "return a - b");
  return code;
}

}  // namespace

TEST_CASE("expand_command substitutes file placeholders only") {
  const auto argv = verifier::expand_command({"run", "{code_file}", "--t={test_file}", "{other}"}, "s.py", "t.py");
  CHECK(argv == std::vector<std::string>{"run", "s.py", "--t=t.py", "{other}"});
}

TEST_CASE("parse_case_outcomes") {
  using verifier::CaseStatus;
  const auto pytest = verifier::parse_case_outcomes(
      "PASSED test_solution.py::test_add\nFAILED test_solution.py::test_sub - assert 8 == 2\n"
      "ERROR test_solution.py\nPASSED test_solution.py::TestK::test_m\n");
  REQUIRE(pytest.size() == 4);
  CHECK(pytest[3].name == "TestK.test_m");
  CHECK(pytest[0] == verifier::CaseOutcome{"test_add", CaseStatus::Pass});
  CHECK(pytest[1] == verifier::CaseOutcome{"test_sub", CaseStatus::Fail});
  CHECK(pytest[2].name == "<collection>");
  CHECK(pytest[2].status == CaseStatus::Error);

  const auto dialect = verifier::parse_case_outcomes(read_text(fixtures_dir() / "logs" / "generic_dialect.log"));
  REQUIRE(dialect.size() == 3);
  CHECK(dialect[0].status == CaseStatus::Pass);
  CHECK(dialect[2].name == "test_div");
  CHECK(dialect[2].status == CaseStatus::Fail);

  CHECK(verifier::parse_case_outcomes("").empty());
}

TEST_CASE("test run JSON round-trip") {
  verifier::TestRunResult r;
  r.overall = verifier::Overall::Timeout;
  r.case_outcomes = {{"a", verifier::CaseStatus::Error}};
  r.raw_log = "log";
  r.duration_seconds = 1.5;
  r.exit_code = 137;
  const auto back = verifier::run_from_json(verifier::to_json(r));
  CHECK(back.overall == r.overall);
  CHECK(back.case_outcomes == r.case_outcomes);
  CHECK(back.raw_log == "log");
  CHECK(back.exit_code == 137);
}

TEST_CASE("pytest pass and fail on the calculator task") {
  const auto root = fresh_dir("calc");
  const auto task = fixture_task("calc");

  const auto pass = verifier::run_tests(fixed_calc(), task, options_under(root));
  CHECK(pass.overall == verifier::Overall::Pass);
  CHECK(pass.exit_code == 0);
  CHECK(pass.case_outcomes.size() == 3);
  CHECK(verifier::is_success(pass));

  const auto fail = verifier::run_tests(task.original_code, task, options_under(root));
  CHECK(fail.overall == verifier::Overall::Fail);
  CHECK(fail.exit_code == 1);
  CHECK(fail.raw_log.find("assert 8 == 2") != std::string::npos);
  const auto bad = std::count_if(fail.case_outcomes.begin(), fail.case_outcomes.end(),
                                 [](const auto& c) { return c.status != verifier::CaseStatus::Pass; });
  CHECK(bad == 1);

  CHECK(fs::is_empty(root));
  fs::remove_all(root);
}

TEST_CASE("infinite loop is killed at the limit") {
  const double limit = sandbox_timeout_seconds();
  auto code = fixture_task("spin").original_code;
  code.replace(code.find("n -= 1"), 6, "pass");
  const auto root = fresh_dir("spin");
  const auto run = verifier::run_tests(code, fixture_task("spin"), options_under(root, limit));
  CHECK(run.overall == verifier::Overall::Timeout);
  CHECK(run.duration_seconds >= limit);
  CHECK(run.duration_seconds <= limit + 5.0);
  CHECK(fs::is_empty(root));
  fs::remove_all(root);
}

TEST_CASE("concurrent runs get separate directories") {
  const auto task = fixture_task("sentinel");
  auto one = std::async(std::launch::async, [&] { return verifier::run_tests(task.original_code, task, verifier::Seconds(20)); });
  auto two = std::async(std::launch::async, [&] { return verifier::run_tests(task.original_code, task, verifier::Seconds(20)); });
  CHECK(one.get().overall == verifier::Overall::Pass);
  CHECK(two.get().overall == verifier::Overall::Pass);
}

TEST_CASE("sandbox path is scrubbed from the log") {
  const auto root = fresh_dir("scrub");
  const auto run = verifier::run_tests(
      "", script_task({"python3", "-c", "import os; print(os.getcwd())"}), options_under(root));
  CHECK(run.overall == verifier::Overall::Pass);
  CHECK(run.raw_log == "<sandbox>\n");
  fs::remove_all(root);
}

TEST_CASE("environment is filtered") {
  ::setenv("SAFEDIT_TEST_SECRET", "leak", 1);
  const auto run = verifier::run_tests(
      "", script_task({"python3", "-c", "import os; print(os.environ.get('SAFEDIT_TEST_SECRET', 'absent'))"}),
      verifier::Seconds(10));
  ::unsetenv("SAFEDIT_TEST_SECRET");
  CHECK(run.raw_log == "absent\n");
}

TEST_CASE("signal death is a crash") {
  const auto run = verifier::run_tests("import os, signal\nos.kill(os.getpid(), signal.SIGSEGV)\n",
                                       script_task({"python3", "{code_file}"}), verifier::Seconds(10));
  CHECK(run.overall == verifier::Overall::Crash);
  CHECK(run.exit_code == 128 + 11);
}

TEST_CASE("output cap") {
  auto options = options_under(fs::temp_directory_path());
  options.max_log_bytes = 1000;
  const auto run = verifier::run_tests("", script_task({"python3", "-c", "print('x' * 100000)"}), options);
  CHECK(run.raw_log.size() < 1100);
  CHECK(run.raw_log.find("output truncated") != std::string::npos);
}

TEST_CASE("missing runner is an environment error") {
  CHECK_THROWS_AS(verifier::run_tests("", script_task({"safedit-no-such-program"}), verifier::Seconds(5)),
                  verifier::EnvironmentError);
  CHECK_THROWS_AS(
      verifier::run_tests("", script_task({"python3", "-m", "safedit_no_such_module"}), verifier::Seconds(5)),
      verifier::EnvironmentError);
}
