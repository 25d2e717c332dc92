#include "safedit/fal.hpp"

#include <algorithm>

#include "safedit/text.hpp"

namespace safedit::fal {

using nlohmann::json;

namespace {

constexpr int kParsedAssertionConfidence = 95;
constexpr int kExactRuleConfidence = 90;
constexpr int kCatchAllConfidence = 50;

struct TypeInfo {
  FailureType type;
  std::string_view name;
  std::string_view diagnosis;
  std::string_view action;
};

constexpr TypeInfo kTypeTable[] = {
    {FailureType::SyntaxError, "SYNTAX_ERROR", "The edited code does not parse.",
     "Fix the syntax at the reported location without touching unrelated code."},
    {FailureType::AssertionMismatch, "ASSERTION_MISMATCH",
     "Expected value does not match actual value.",
     "Modify the logic to match the expected calculation."},
    {FailureType::ImportError, "IMPORT_ERROR", "A module or name could not be imported.",
     "Correct the import statement or module name; do not introduce new dependencies."},
    {FailureType::AttributeError, "ATTRIBUTE_ERROR",
     "Code accesses an attribute or method that the object does not have.",
     "Use the correct attribute name or make sure the object has the expected type."},
    {FailureType::TypeError, "TYPE_ERROR",
     "A value of the wrong type was used or a call passed the wrong arguments.",
     "Check the signature, argument count and argument types at the failing call."},
    {FailureType::ValueError, "VALUE_ERROR",
     "A function received an argument of the right type but an invalid value.",
     "Validate or convert the value before use so it matches what the tests expect."},
    {FailureType::NameError, "NAME_ERROR", "Code refers to a name that is not defined in scope.",
     "Define the missing name or fix its spelling, including every renamed call site."},
    {FailureType::IndexError, "INDEX_ERROR", "A sequence index is out of range.",
     "Correct the index or bounds check so it stays within the sequence length."},
    {FailureType::KeyError, "KEY_ERROR", "A mapping lookup used a key that is not present.",
     "Use the correct key or handle the missing-key case explicitly."},
    {FailureType::ZeroDivisionError, "ZERO_DIVISION_ERROR", "A division or modulo by zero occurred.",
     "Guard the division against a zero divisor in the way the tests require."},
    {FailureType::IndentationError, "INDENTATION_ERROR",
     "The edited code has inconsistent indentation.",
     "Restore indentation consistent with the surrounding block."},
    {FailureType::Timeout, "TIMEOUT",
     "The test run exceeded its time limit, most likely because of a non-halting loop or recursion.",
     "Make the non-halting loop terminate by fixing its exit condition or bounding its iterations."},
    {FailureType::CollectionError, "COLLECTION_ERROR",
     "The test module could not be collected, so no tests ran.",
     "Fix the module-level error in the edited code so the test file can import it."},
    {FailureType::UnknownRuntimeError, "UNKNOWN_RUNTIME_ERROR",
     "The code raised an unexpected runtime error.",
     "Read the failing test's traceback and correct the code path that raises it."},
};

const TypeInfo& info(FailureType type) {
  for (const auto& entry : kTypeTable) {
    if (entry.type == type) {
      return entry;
    }
  }
  return kTypeTable[std::size(kTypeTable) - 1];
}

struct NameRule {
  FailureType type;
  std::initializer_list<std::string_view> names;
};

// Ordered: IndentationError is a SyntaxError subclass and must win first.
const NameRule kNameRules[] = {
    {FailureType::IndentationError, {"IndentationError", "TabError"}},
    {FailureType::SyntaxError, {"SyntaxError"}},
    {FailureType::AssertionMismatch, {"AssertionError"}},
    {FailureType::ImportError, {"ImportError", "ModuleNotFoundError"}},
    {FailureType::AttributeError, {"AttributeError"}},
    {FailureType::TypeError, {"TypeError"}},
    {FailureType::ValueError, {"ValueError"}},
    {FailureType::NameError, {"NameError", "UnboundLocalError"}},
    {FailureType::IndexError, {"IndexError"}},
    {FailureType::KeyError, {"KeyError"}},
    {FailureType::ZeroDivisionError, {"ZeroDivisionError"}},
    {FailureType::Timeout, {"TimeoutError", "Timeout", "TimeoutExpired"}},
};

std::string_view last_segment(std::string_view dotted) {
  const auto dot = dotted.rfind('.');
  return dot == std::string_view::npos ? dotted : dotted.substr(dot + 1);
}

std::string single_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

}  // namespace

std::string_view to_string(FailureType type) { return info(type).name; }

std::optional<FailureType> parse_failure_type(std::string_view s) {
  for (const auto& entry : kTypeTable) {
    if (entry.name == s) {
      return entry.type;
    }
  }
  return std::nullopt;
}

Classification classify(const ParsedFailure& failure, const verifier::TestRunResult& run) {
  if (run.overall == verifier::Overall::Timeout) {
    return {FailureType::Timeout, kExactRuleConfidence};
  }
  const auto name = last_segment(text::trim(failure.exception_type));
  for (const auto& rule : kNameRules) {
    if (std::find(rule.names.begin(), rule.names.end(), name) != rule.names.end()) {
      if (rule.type == FailureType::AssertionMismatch && failure.expected && failure.actual) {
        return {rule.type, kParsedAssertionConfidence};
      }
      return {rule.type, kExactRuleConfidence};
    }
  }
  if (failure.test_name == kCollectionTest) {
    return {FailureType::CollectionError, kExactRuleConfidence};
  }
  return {FailureType::UnknownRuntimeError, kCatchAllConfidence};
}

FeedbackReport explain(const ParsedFailure& failure, FailureType type, int confidence) {
  const auto& entry = info(type);
  FeedbackReport report;
  report.test = single_line(failure.test_name);
  report.type = type;
  report.diagnosis = std::string(entry.diagnosis);
  report.action = std::string(entry.action);
  if (failure.expected && failure.actual) {
    report.expected = single_line(*failure.expected);
    report.actual = single_line(*failure.actual);
  }
  report.confidence = std::clamp(confidence, 0, 100);
  return report;
}

std::string render_report(const FeedbackReport& r) {
  std::string out;
  out += "[TEST] " + single_line(r.test) + "\n";
  out += "[TYPE] " + std::string(to_string(r.type)) + "\n";
  out += "[DIAGNOSIS] " + single_line(r.diagnosis) + "\n";
  out += "[ACTION] " + single_line(r.action) + "\n";
  if (r.expected) {
    out += "[EXPECTED] " + single_line(*r.expected) + "\n";
  }
  if (r.actual) {
    out += "[ACTUAL] " + single_line(*r.actual) + "\n";
  }
  out += "[CONFIDENCE] " + std::to_string(std::clamp(r.confidence, 0, 100)) + "%\n";
  return out;
}

std::string render_feedback(std::span<const FeedbackReport> reports) {
  std::string out;
  const auto shown = std::min(reports.size(), kMaxRenderedReports);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i > 0) {
      out += "\n";
    }
    out += render_report(reports[i]);
  }
  if (reports.size() > shown) {
    const auto more = reports.size() - shown;
    out += "\n…and " + std::to_string(more) + " more failing test" + (more == 1 ? "" : "s") +
           "\n";
  }
  return out;
}

std::vector<FeedbackReport> diagnose(const verifier::TestRunResult& run) {
  auto failures = parse_log(run.raw_log);
  if (failures.empty() && !verifier::is_success(run)) {
    ParsedFailure synthetic;
    synthetic.test_name = std::string(run.overall == verifier::Overall::Timeout ? kTimeoutTest
                                                                                 : kUnparsedTest);
    synthetic.excerpt = text::tail_lines(run.raw_log, 15);
    failures.push_back(std::move(synthetic));
  }
  std::vector<FeedbackReport> reports;
  reports.reserve(failures.size());
  for (const auto& f : failures) {
    const auto c = classify(f, run);
    reports.push_back(explain(f, c.type, c.confidence));
  }
  return reports;
}

std::string feedback_for(const verifier::TestRunResult& run) { return render_feedback(diagnose(run)); }

json to_json(const ParsedFailure& f) {
  json doc = {{"test_name", f.test_name},
              {"exception_type", f.exception_type},
              {"excerpt", f.excerpt},
              {"expected", nullptr},
              {"actual", nullptr},
              {"location", nullptr}};
  if (f.expected) {
    doc["expected"] = *f.expected;
  }
  if (f.actual) {
    doc["actual"] = *f.actual;
  }
  if (f.location) {
    doc["location"] = {{"file", f.location->file}, {"line", f.location->line}};
  }
  return doc;
}

json to_json(const FeedbackReport& r) {
  return {{"test", r.test},
          {"type", to_string(r.type)},
          {"diagnosis", r.diagnosis},
          {"action", r.action},
          {"expected", r.expected ? json(*r.expected) : json(nullptr)},
          {"actual", r.actual ? json(*r.actual) : json(nullptr)},
          {"confidence", r.confidence}};
}

}  // namespace safedit::fal
