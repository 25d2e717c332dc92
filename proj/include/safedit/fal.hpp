#pragma once

// Failure Abstraction Layer: turns raw test-runner output into structured
// feedback in three pure stages (parse -> classify -> explain). This module
// deliberately has no dependency on the model provider.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/test_run.hpp"

namespace safedit::fal {

struct SourceLocation {
  std::string file;
  int line = 0;

  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

struct ParsedFailure {
  std::string test_name;
  std::string exception_type;
  std::optional<std::string> expected;
  std::optional<std::string> actual;
  std::optional<SourceLocation> location;
  std::string excerpt;
};

inline constexpr std::string_view kCollectionTest = "<collection>";
inline constexpr std::string_view kUnparsedTest = "<unparsed>";
inline constexpr std::string_view kTimeoutTest = "<timeout>";

enum class FailureType {
  SyntaxError,
  AssertionMismatch,
  ImportError,
  AttributeError,
  TypeError,
  ValueError,
  NameError,
  IndexError,
  KeyError,
  ZeroDivisionError,
  IndentationError,
  Timeout,
  CollectionError,
  UnknownRuntimeError,
};

inline constexpr FailureType kAllFailureTypes[] = {
    FailureType::SyntaxError,       FailureType::AssertionMismatch, FailureType::ImportError,
    FailureType::AttributeError,    FailureType::TypeError,         FailureType::ValueError,
    FailureType::NameError,         FailureType::IndexError,        FailureType::KeyError,
    FailureType::ZeroDivisionError, FailureType::IndentationError,  FailureType::Timeout,
    FailureType::CollectionError,   FailureType::UnknownRuntimeError,
};

/// Upper-snake names, e.g. "ASSERTION_MISMATCH".
std::string_view to_string(FailureType type);
std::optional<FailureType> parse_failure_type(std::string_view s);

struct Classification {
  FailureType type = FailureType::UnknownRuntimeError;
  int confidence = 0;  // percent
};

struct FeedbackReport {
  std::string test;
  FailureType type = FailureType::UnknownRuntimeError;
  std::string diagnosis;
  std::string action;
  std::optional<std::string> expected;
  std::optional<std::string> actual;
  int confidence = 0;  // percent, [0, 100]

  friend bool operator==(const FeedbackReport&, const FeedbackReport&) = default;
};

/// Reports beyond this many are summarised by a count line.
inline constexpr std::size_t kMaxRenderedReports = 3;

/// Stage 1. Understands the pytest plain-text report and a minimal
/// "PASS <name>" / "FAIL <name>: <message>" dialect. Never throws; an
/// unrecognised non-empty log yields a single "<unparsed>" failure.
std::vector<ParsedFailure> parse_log(std::string_view raw_log);

/// Stage 2. Ordered rules, first match wins; total over all inputs.
Classification classify(const ParsedFailure& failure, const verifier::TestRunResult& run);

/// Stage 3. Diagnosis and action come from a fixed per-type table.
FeedbackReport explain(const ParsedFailure& failure, FailureType type, int confidence);

std::string render_report(const FeedbackReport& report);

/// Blank-line separated blocks, at most kMaxRenderedReports of them, plus a
/// trailing count line when truncated. Empty input renders as "".
std::string render_feedback(std::span<const FeedbackReport> reports);

/// All three stages over a finished run. A failed run whose log yields no
/// parsed failure still produces one report ("<timeout>" or "<unparsed>").
std::vector<FeedbackReport> diagnose(const verifier::TestRunResult& run);

/// render_feedback(diagnose(run)).
std::string feedback_for(const verifier::TestRunResult& run);

nlohmann::json to_json(const ParsedFailure& failure);
nlohmann::json to_json(const FeedbackReport& report);

}  // namespace safedit::fal
