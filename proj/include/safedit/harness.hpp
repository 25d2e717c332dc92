#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/corpus.hpp"
#include "safedit/orchestrator.hpp"
#include "safedit/provider.hpp"
#include "safedit/taxonomy.hpp"

namespace safedit::harness {

struct RunRecord {
  std::string task_id;
  std::string instruction_language;
  corpus::VisibilityVariant variant = corpus::VisibilityVariant::CodeOnly;
  orchestrator::Verdict verdict = orchestrator::Verdict::Fail;
  int attempts_used = 1;
  bool first_try = false;
  std::optional<taxonomy::TaxonomyLabel> taxonomy;
  /// The classifier gave up on this failure.
  bool unclassified = false;
};

/// first_try is derived. A trace that never reached the verifier (plan
/// failure) counts as one attempt.
RunRecord make_record(std::string task_id, std::string language, corpus::VisibilityVariant variant,
                      orchestrator::Verdict verdict, int attempts_used);

/// Reads a trace document, including a "taxonomy" annotation if present.
RunRecord record_from_trace(const nlohmann::json& trace_doc);

// All three throw std::invalid_argument on empty input. Unrounded.
double compute_tsr(const std::vector<RunRecord>& records);
double compute_first_try_rate(const std::vector<RunRecord>& records);
double compute_avg_iterations(const std::vector<RunRecord>& records);

struct FailureDistribution {
  std::size_t failed = 0;
  std::size_t classified = 0;
  std::size_t unclassified = 0;
  /// Failed records the classifier has not been run on.
  std::size_t pending = 0;
  std::array<std::size_t, 4> counts{};  // indexed like taxonomy::kAllCategories
  std::array<double, 4> percent{};      // over classified failures
  /// No classified failures: percentages are all zero and meaningless.
  bool empty = true;

  double percent_of(taxonomy::TaxonomyCategory c) const;
};

FailureDistribution compute_failure_distribution(const std::vector<RunRecord>& records);

struct GroupMetrics {
  std::size_t instances = 0;
  std::size_t passed = 0;
  std::size_t first_try = 0;
  double tsr = 0.0;
  double first_try_rate = 0.0;
  double avg_iterations = 0.0;
};

GroupMetrics compute_group(const std::vector<RunRecord>& records);

struct NotApplicable {
  std::string task_id;
  corpus::VisibilityVariant variant = corpus::VisibilityVariant::CodeOnly;
};

struct MetricsReport {
  GroupMetrics overall;
  /// Sorted language tags; variants in canonical order, only those present.
  std::vector<std::string> languages;
  std::vector<corpus::VisibilityVariant> variants;
  /// Indexed [language], [variant], [language][variant]; a cell with zero
  /// instances is absent.
  std::vector<GroupMetrics> by_language;
  std::vector<GroupMetrics> by_variant;
  std::vector<std::vector<std::optional<GroupMetrics>>> by_language_variant;
  FailureDistribution failures;
  std::vector<FailureDistribution> failures_by_language;
  std::vector<NotApplicable> not_applicable;
};

/// Throws std::invalid_argument on empty records.
MetricsReport compute_report(const std::vector<RunRecord>& records,
                             std::vector<NotApplicable> not_applicable = {});

/// One decimal, half away from zero, never "-0.0".
std::string format_percent(double value, int decimals = 1);
/// "(0.0)", "(+1.2)" or "(−2.3)" (U+2212) from the displayed values.
std::string format_delta(double value, double base, int decimals = 1);

std::string render_text(const MetricsReport& report);
nlohmann::json render_json(const MetricsReport& report);

inline constexpr std::string_view kManifestFile = "run_manifest.json";
inline constexpr std::string_view kReportJson = "report.json";
inline constexpr std::string_view kReportText = "report.txt";

/// Records from every *.trace.json in a run directory, sorted by file name,
/// plus not-applicable pairs from the manifest when present.
MetricsReport report_for_run_dir(const std::filesystem::path& run_dir);

/// Writes report.json and report.txt into the run directory.
MetricsReport write_report(const std::filesystem::path& run_dir);

struct RunOptions {
  std::vector<corpus::VisibilityVariant> variants{std::begin(corpus::kAllVariants),
                                                  std::end(corpus::kAllVariants)};
  orchestrator::PipelineConfig pipeline;
  int parallel = 1;
  /// Recorded in the manifest so classify can find the tasks again.
  std::string corpus_path;
};

struct RunError {
  std::string task_id;
  corpus::VisibilityVariant variant = corpus::VisibilityVariant::CodeOnly;
  std::string message;
};

struct RunSummary {
  std::size_t traces_written = 0;
  std::size_t traces_skipped = 0;
  std::vector<NotApplicable> not_applicable;
  std::vector<RunError> errors;
  MetricsReport report;
};

/// Runs every task x applicable variant not already traced in out_dir,
/// writes the manifest and report. verifier::EnvironmentError aborts the
/// run; other per-task errors are recorded in the manifest.
RunSummary run_corpus(const std::vector<corpus::EditTask>& tasks, const RunOptions& options,
                      provider::Provider& provider, const std::filesystem::path& out_dir);

struct ClassifySummary {
  std::size_t classified = 0;
  std::size_t unclassified = 0;
  std::size_t skipped = 0;
};

/// Annotates each failed, not yet annotated trace in place with a
/// "taxonomy" entry.
ClassifySummary classify_run_dir(const std::filesystem::path& run_dir,
                                 const std::vector<corpus::EditTask>& tasks,
                                 provider::Provider& provider,
                                 const planner::RequestOptions& options = {});

std::vector<std::filesystem::path> trace_files(const std::filesystem::path& run_dir);

}  // namespace safedit::harness
