#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "safedit/corpus.hpp"
#include "safedit/orchestrator.hpp"
#include "safedit/planner.hpp"
#include "safedit/provider.hpp"
#include "safedit/test_run.hpp"

namespace safedit::testing {

std::filesystem::path fixtures_dir();
std::string read_text(const std::filesystem::path& path);

corpus::EditTask fixture_task(const std::string& name);
std::vector<corpus::EditTask> fixture_corpus();
std::filesystem::path corpus_dir();

std::filesystem::path cassette_path(const std::string& name);
provider::Cassette cassette(const std::string& name);

struct FixtureLog {
  std::string name;
  verifier::TestRunResult run;
  std::vector<std::string> expected_types;
};

/// Every log listed in logs/index.json, with its recorded verdict.
std::vector<FixtureLog> fixture_logs();
FixtureLog fixture_log(const std::string& name);

/// Sandbox time limit for slow tests; SAFEDIT_SANDBOX_TIMEOUT overrides 30s.
double sandbox_timeout_seconds();

/// Hands out scripted replies in order and remembers every request.
class QueueProvider final : public provider::Provider {
 public:
  explicit QueueProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  provider::ChatResponse complete(const provider::ChatRequest& request) override;
  std::vector<provider::ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> replies_;
  std::vector<provider::ChatRequest> requests_;
};

/// A reply chosen by substring rules over the whole request; first match wins.
struct StubRule {
  std::vector<std::string> contains;
  std::vector<std::string> excludes;
  std::string reply;
};

/// OpenAI-compatible chat-completions server on 127.0.0.1 with a random port.
class StubServer {
 public:
  explicit StubServer(std::vector<StubRule> rules);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string endpoint() const;
  std::size_t hits() const;
  /// Requests no rule matched (answered with HTTP 500).
  std::vector<std::string> unmatched() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Plans the scripted model returns for the fixture tasks.
planner::EditPlan connect_plan();
planner::EditPlan calc_plan();
planner::EditPlan rename_plan();
planner::EditPlan logging_plan();
planner::EditPlan clamp_plan();

/// Failed traces handed to the taxonomy classifier: the add-logging task
/// where the edit deleted the function, and the calc task where subtraction
/// is still addition.
orchestrator::TaskTrace deleted_function_trace();
orchestrator::TaskTrace still_adding_trace();

}  // namespace safedit::testing
