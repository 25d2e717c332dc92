#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace safedit::corpus {

/// Half-open byte range [start, end) into a task's original code.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct EditTask {
  std::string id;
  std::string instruction;
  std::string instruction_language;
  std::string code_language;
  std::string original_code;
  std::string test_suite;
  /// argv template; "{code_file}" and "{test_file}" are substituted per run.
  std::vector<std::string> test_command;
  std::optional<Span> highlight;
  std::optional<std::size_t> cursor;
  /// File names the code and suite are written under inside the sandbox.
  std::string code_filename;
  std::string test_filename;
};

enum class VisibilityVariant { CodeOnly, Highlight, HighlightCursor };

inline constexpr VisibilityVariant kAllVariants[] = {
    VisibilityVariant::CodeOnly, VisibilityVariant::Highlight, VisibilityVariant::HighlightCursor};

/// "code_only" / "highlight" / "highlight_cursor".
std::string_view to_string(VisibilityVariant v);
/// "CODE ONLY" / "HIGHLIGHT" / "HIGHLIGHT + CURSOR".
std::string_view display_name(VisibilityVariant v);
std::optional<VisibilityVariant> parse_variant(std::string_view s);

struct VisibleCode {
  std::string text;
  VisibilityVariant variant = VisibilityVariant::CodeOnly;
};

inline constexpr std::string_view kHighlightBegin = "<<HL>>";
inline constexpr std::string_view kHighlightEnd = "<</HL>>";
inline constexpr std::string_view kCursor = "<<CUR>>";

struct Diagnostic {
  std::string source;   // file the bundle came from, if any
  std::string task_id;  // may be empty when the id itself is unreadable
  std::string field;
  std::string message;
};

/// Thrown for unreadable paths, malformed bundles and invariant violations.
/// Carries one diagnostic per rejected bundle.
class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Thrown when a task cannot be rendered under the requested variant.
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates one bundle document.
EditTask parse_task(const nlohmann::json& doc, const std::string& source = {});
nlohmann::json task_to_json(const EditTask& task);

/// Loads a single *.task.json file or every *.task.json file in a directory,
/// ordered by task id. Any rejected bundle makes the whole load fail with a
/// CorpusError listing every problem found.
std::vector<EditTask> load_corpus(const std::filesystem::path& path);

bool is_applicable(const EditTask& task, VisibilityVariant variant);

VisibleCode render_visible_code(const EditTask& task, VisibilityVariant variant);

/// Removes every marker token.
std::string strip_markers(std::string_view text);

/// The part of the visible code a plan may cite: the whole file for
/// CodeOnly, the highlighted region otherwise. Markers are stripped.
std::string visible_region(const VisibleCode& visible);

}  // namespace safedit::corpus
