#pragma once

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "safedit/corpus.hpp"
#include "safedit/test_run.hpp"

namespace safedit::verifier {

using Seconds = std::chrono::duration<double>;

inline constexpr Seconds kDefaultTimeLimit{30.0};

/// The sandbox cannot run the suite at all (runner missing, temp dir not
/// writable, ...). A harness problem, never a scored task failure.
class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SandboxOptions {
  Seconds limit = kDefaultTimeLimit;
  /// Parent directory for per-run sandboxes; empty means the system temp dir.
  std::filesystem::path temp_root;
  /// Variables copied from the parent environment when set.
  std::vector<std::string> inherited_env = {"PATH", "LANG", "LC_ALL", "LC_CTYPE", "SYSTEMROOT"};
  /// Output beyond this many bytes is dropped (a marker line notes it).
  std::size_t max_log_bytes = 4u << 20;
};

/// Token substituted for the sandbox directory in captured logs, so logs of
/// identical runs are byte-identical.
inline constexpr std::string_view kSandboxToken = "<sandbox>";

/// Writes the code and suite into a fresh temporary directory, runs the
/// task's test command there in its own process group with a filtered
/// environment, kills the group at the deadline and removes the directory.
TestRunResult run_tests(std::string_view code, const corpus::EditTask& task,
                        const SandboxOptions& options);

TestRunResult run_tests(std::string_view code, const corpus::EditTask& task,
                        Seconds limit = kDefaultTimeLimit);

/// Substitutes {code_file} / {test_file} in every argv element.
std::vector<std::string> expand_command(const std::vector<std::string>& argv_template,
                                        std::string_view code_file, std::string_view test_file);

/// Per-test outcomes from a runner summary (pytest -rA lines or the
/// "PASS name" / "FAIL name: msg" dialect); falls back to the FAL log
/// parser for failures when no summary lines are present.
std::vector<CaseOutcome> parse_case_outcomes(std::string_view log);

}  // namespace safedit::verifier
