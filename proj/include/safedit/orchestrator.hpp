#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/corpus.hpp"
#include "safedit/editor.hpp"
#include "safedit/fal.hpp"
#include "safedit/planner.hpp"
#include "safedit/provider.hpp"
#include "safedit/structured.hpp"
#include "safedit/test_run.hpp"
#include "safedit/verifier.hpp"

namespace safedit::orchestrator {

struct PipelineConfig {
  int max_refinements = 3;
  verifier::Seconds test_timeout = verifier::kDefaultTimeLimit;
  corpus::VisibilityVariant variant = corpus::VisibilityVariant::CodeOnly;
  std::string model_id = provider::kDefaultModel;
  double temperature = provider::kDefaultTemperature;
  int max_output_tokens = provider::kDefaultMaxOutputTokens;
  /// Parent directory for sandboxes; empty means the system temp dir.
  std::filesystem::path sandbox_root;
};

/// Throws std::invalid_argument when max_refinements < 0 or the timeout is
/// not positive.
void validate(const PipelineConfig& config);

/// Test name used for the synthetic report of a fragment that failed to apply.
inline constexpr std::string_view kApplyTest = "<apply>";

struct IterationRecord {
  int index = 1;
  std::vector<structured::Exchange> editor_exchanges;
  /// Absent when the editor gave up (EditFailure).
  std::optional<std::vector<editor::EditFragment>> fragments;
  bool full_file = false;
  std::optional<std::string> edited_code;
  /// Absent when the fragments did not apply or the editor gave up.
  std::optional<verifier::TestRunResult> run;
  std::optional<std::string> apply_error;
  std::optional<std::string> edit_error;
  std::vector<fal::FeedbackReport> reports;
  /// Rendered FAL text; present iff another attempt follows.
  std::optional<std::string> feedback;

  bool succeeded() const { return run && verifier::is_success(*run); }
};

enum class Verdict { Pass, Fail };

std::string_view to_string(Verdict v);

struct TaskTrace {
  std::string task_id;
  std::string instruction_language;
  corpus::VisibilityVariant variant = corpus::VisibilityVariant::CodeOnly;
  int max_refinements = 3;
  std::optional<planner::EditPlan> plan;
  std::optional<std::string> plan_error;
  std::vector<structured::Exchange> planner_exchanges;
  std::vector<IterationRecord> iterations;
  Verdict verdict = Verdict::Fail;
  int attempts_used = 0;
  double wall_time_seconds = 0.0;
};

nlohmann::json to_json(const TaskTrace& trace);
TaskTrace trace_from_json(const nlohmann::json& doc);

/// "<task>.<variant>.trace.json".
std::string trace_filename(std::string_view task_id, corpus::VisibilityVariant variant);

/// Plans once, then edits, applies and verifies up to 1 + max_refinements
/// times. Every attempt edits the original code; only the latest feedback
/// is sent. Provider errors and verifier::EnvironmentError propagate.
TaskTrace run_task(const corpus::EditTask& task, const PipelineConfig& config,
                   provider::Provider& provider);

}  // namespace safedit::orchestrator
