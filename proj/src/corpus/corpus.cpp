#include "safedit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "safedit/text.hpp"

namespace safedit::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string describe(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream out;
  out << "corpus rejected (" << diagnostics.size() << " problem"
      << (diagnostics.size() == 1 ? "" : "s") << ")";
  for (const auto& d : diagnostics) {
    out << "\n  ";
    if (!d.source.empty()) {
      out << d.source << ": ";
    }
    out << "task '" << d.task_id << "'";
    if (!d.field.empty()) {
      out << " field '" << d.field << "'";
    }
    out << ": " << d.message;
  }
  return out.str();
}

struct DefaultFiles {
  std::string_view language;
  std::string_view code;
  std::string_view test;
};

constexpr DefaultFiles kDefaultFiles[] = {
    {"python", "solution.py", "test_solution.py"},
    {"javascript", "solution.js", "solution.test.js"},
    {"typescript", "solution.ts", "solution.test.ts"},
};

bool is_safe_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") {
    return false;
  }
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

bool is_safe_filename(std::string_view name) {
  return !name.empty() && name.find('/') == std::string_view::npos &&
         name.find('\\') == std::string_view::npos && name != "." && name != "..";
}

class BundleReader {
 public:
  BundleReader(const json& doc, std::string source) : doc_(doc), source_(std::move(source)) {
    if (doc_.is_object() && doc_.contains("id") && doc_["id"].is_string()) {
      id_ = doc_["id"].get<std::string>();
    }
  }

  [[noreturn]] void fail(std::string field, std::string message) const {
    throw CorpusError({Diagnostic{source_, id_, std::move(field), std::move(message)}});
  }

  std::string required_string(const char* key) const {
    if (!doc_.contains(key)) {
      fail(key, "missing required key");
    }
    if (!doc_[key].is_string()) {
      fail(key, "must be a string");
    }
    return doc_[key].get<std::string>();
  }

  std::optional<std::string> optional_string(const char* key) const {
    if (!doc_.contains(key) || doc_[key].is_null()) {
      return std::nullopt;
    }
    if (!doc_[key].is_string()) {
      fail(key, "must be a string");
    }
    return doc_[key].get<std::string>();
  }

  std::size_t offset(const json& value, const std::string& field) const {
    if (!value.is_number_integer() || value.get<long long>() < 0) {
      fail(field, "must be a non-negative integer");
    }
    return static_cast<std::size_t>(value.get<long long>());
  }

  const json& doc() const { return doc_; }

 private:
  const json& doc_;
  std::string source_;
  std::string id_;
};

}  // namespace

CorpusError::CorpusError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(describe(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::string_view to_string(VisibilityVariant v) {
  switch (v) {
    case VisibilityVariant::CodeOnly:
      return "code_only";
    case VisibilityVariant::Highlight:
      return "highlight";
    case VisibilityVariant::HighlightCursor:
      return "highlight_cursor";
  }
  return "code_only";
}

std::string_view display_name(VisibilityVariant v) {
  switch (v) {
    case VisibilityVariant::CodeOnly:
      return "CODE ONLY";
    case VisibilityVariant::Highlight:
      return "HIGHLIGHT";
    case VisibilityVariant::HighlightCursor:
      return "HIGHLIGHT + CURSOR";
  }
  return "CODE ONLY";
}

std::optional<VisibilityVariant> parse_variant(std::string_view s) {
  for (const auto v : kAllVariants) {
    if (s == to_string(v)) {
      return v;
    }
  }
  return std::nullopt;
}

EditTask parse_task(const json& doc, const std::string& source) {
  if (!doc.is_object()) {
    throw CorpusError({Diagnostic{source, "", "", "task bundle must be a JSON object"}});
  }
  BundleReader r(doc, source);

  EditTask task;
  task.id = r.required_string("id");
  if (!is_safe_id(task.id)) {
    r.fail("id", "must be non-empty and use only [A-Za-z0-9._-]");
  }
  task.instruction = r.required_string("instruction");
  if (text::trim(task.instruction).empty()) {
    r.fail("instruction", "must not be empty");
  }
  task.instruction_language = r.required_string("instruction_language");
  task.code_language = r.required_string("code_language");
  task.original_code = r.required_string("original_code");
  if (task.original_code.empty()) {
    r.fail("original_code", "must not be empty");
  }
  for (const auto marker : {kHighlightBegin, kHighlightEnd, kCursor}) {
    if (task.original_code.find(marker) != std::string::npos) {
      r.fail("original_code", "contains the reserved marker " + std::string(marker));
    }
  }
  task.test_suite = r.required_string("test_suite");
  if (task.test_suite.empty()) {
    r.fail("test_suite", "must not be empty");
  }

  if (!doc.contains("test_command")) {
    r.fail("test_command", "missing required key");
  }
  const auto& cmd = doc["test_command"];
  if (!cmd.is_array() || cmd.empty()) {
    r.fail("test_command", "must be a non-empty array of strings");
  }
  for (const auto& arg : cmd) {
    if (!arg.is_string()) {
      r.fail("test_command", "must be a non-empty array of strings");
    }
    task.test_command.push_back(arg.get<std::string>());
  }
  if (task.test_command.front().empty()) {
    r.fail("test_command", "program name must not be empty");
  }

  const auto size = task.original_code.size();
  if (doc.contains("highlight") && !doc["highlight"].is_null()) {
    const auto& hl = doc["highlight"];
    if (!hl.is_object() || !hl.contains("start") || !hl.contains("end")) {
      r.fail("highlight", "must be an object with 'start' and 'end'");
    }
    Span span{r.offset(hl["start"], "highlight"), r.offset(hl["end"], "highlight")};
    if (span.start > span.end) {
      r.fail("highlight", "start must not exceed end");
    }
    if (span.end > size) {
      r.fail("highlight", "end " + std::to_string(span.end) + " exceeds code length " +
                              std::to_string(size));
    }
    if (!text::is_utf8_boundary(task.original_code, span.start) ||
        !text::is_utf8_boundary(task.original_code, span.end)) {
      r.fail("highlight", "offsets must not split a UTF-8 sequence");
    }
    task.highlight = span;
  }
  if (doc.contains("cursor") && !doc["cursor"].is_null()) {
    const auto cursor = r.offset(doc["cursor"], "cursor");
    if (cursor > size) {
      r.fail("cursor", "offset " + std::to_string(cursor) + " exceeds code length " +
                           std::to_string(size));
    }
    if (!text::is_utf8_boundary(task.original_code, cursor)) {
      r.fail("cursor", "offset must not split a UTF-8 sequence");
    }
    if (task.highlight && (cursor < task.highlight->start || cursor > task.highlight->end)) {
      r.fail("cursor", "offset lies outside the highlight span");
    }
    task.cursor = cursor;
  }

  for (const auto& d : kDefaultFiles) {
    if (d.language == task.code_language) {
      task.code_filename = d.code;
      task.test_filename = d.test;
    }
  }
  if (auto name = r.optional_string("code_filename")) {
    task.code_filename = *name;
  }
  if (auto name = r.optional_string("test_filename")) {
    task.test_filename = *name;
  }
  if (!is_safe_filename(task.code_filename)) {
    r.fail("code_filename", "required for code_language '" + task.code_language +
                                "' and must be a plain file name");
  }
  if (!is_safe_filename(task.test_filename)) {
    r.fail("test_filename", "required for code_language '" + task.code_language +
                                "' and must be a plain file name");
  }
  if (task.code_filename == task.test_filename) {
    r.fail("test_filename", "must differ from code_filename");
  }
  return task;
}

json task_to_json(const EditTask& task) {
  json doc = {
      {"id", task.id},
      {"instruction", task.instruction},
      {"instruction_language", task.instruction_language},
      {"code_language", task.code_language},
      {"original_code", task.original_code},
      {"test_suite", task.test_suite},
      {"test_command", task.test_command},
      {"code_filename", task.code_filename},
      {"test_filename", task.test_filename},
  };
  if (task.highlight) {
    doc["highlight"] = {{"start", task.highlight->start}, {"end", task.highlight->end}};
  }
  if (task.cursor) {
    doc["cursor"] = *task.cursor;
  }
  return doc;
}

std::vector<EditTask> load_corpus(const fs::path& path) {
  std::error_code ec;
  const auto status = fs::status(path, ec);
  if (ec || !fs::exists(status)) {
    throw CorpusError({Diagnostic{path.string(), "", "", "path does not exist or is unreadable"}});
  }

  std::vector<fs::path> files;
  if (fs::is_directory(status)) {
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name.size() > 10 &&
          name.compare(name.size() - 10, 10, ".task.json") == 0) {
        files.push_back(entry.path());
      }
    }
    if (ec) {
      throw CorpusError({Diagnostic{path.string(), "", "", "cannot list directory: " + ec.message()}});
    }
  } else {
    files.push_back(path);
  }
  std::sort(files.begin(), files.end());

  std::vector<EditTask> tasks;
  std::vector<Diagnostic> problems;
  std::map<std::string, std::string> seen;  // id -> source
  for (const auto& file : files) {
    const auto source = file.string();
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      problems.push_back({source, "", "", "cannot open file"});
      continue;
    }
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      problems.push_back({source, "", "", std::string("malformed JSON: ") + e.what()});
      continue;
    }
    try {
      auto task = parse_task(doc, source);
      if (auto it = seen.find(task.id); it != seen.end()) {
        problems.push_back({source, task.id, "id", "duplicate of " + it->second});
        continue;
      }
      seen.emplace(task.id, source);
      tasks.push_back(std::move(task));
    } catch (const CorpusError& e) {
      problems.insert(problems.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
  }
  if (!problems.empty()) {
    throw CorpusError(std::move(problems));
  }
  std::sort(tasks.begin(), tasks.end(),
            [](const EditTask& a, const EditTask& b) { return a.id < b.id; });
  return tasks;
}

bool is_applicable(const EditTask& task, VisibilityVariant variant) {
  switch (variant) {
    case VisibilityVariant::CodeOnly:
      return true;
    case VisibilityVariant::Highlight:
      return task.highlight.has_value();
    case VisibilityVariant::HighlightCursor:
      return task.highlight.has_value() && task.cursor.has_value();
  }
  return false;
}

VisibleCode render_visible_code(const EditTask& task, VisibilityVariant variant) {
  if (!is_applicable(task, variant)) {
    throw NotApplicable("task '" + task.id + "' has no " +
                        (task.highlight ? "cursor" : "highlight") + " for variant " +
                        std::string(to_string(variant)));
  }
  if (variant == VisibilityVariant::CodeOnly) {
    return {task.original_code, variant};
  }

  // A cursor at the span start goes after the begin marker; at the span end,
  // before the end marker.
  const auto& code = task.original_code;
  const auto [start, end] = *task.highlight;
  std::string out;
  out.reserve(code.size() + 32);
  out.append(code, 0, start);
  out += kHighlightBegin;
  if (variant == VisibilityVariant::HighlightCursor) {
    const auto cursor = *task.cursor;
    out.append(code, start, cursor - start);
    out += kCursor;
    out.append(code, cursor, end - cursor);
  } else {
    out.append(code, start, end - start);
  }
  out += kHighlightEnd;
  out.append(code, end, std::string::npos);
  return {std::move(out), variant};
}

std::string strip_markers(std::string_view text) {
  std::string out(text);
  for (const auto marker : {kHighlightBegin, kHighlightEnd, kCursor}) {
    out = text::replace_all(std::move(out), marker, "");
  }
  return out;
}

std::string visible_region(const VisibleCode& visible) {
  if (visible.variant == VisibilityVariant::CodeOnly) {
    return strip_markers(visible.text);
  }
  const auto begin = visible.text.find(kHighlightBegin);
  const auto end = visible.text.find(kHighlightEnd);
  if (begin == std::string::npos || end == std::string::npos || end < begin) {
    return strip_markers(visible.text);
  }
  const auto inner = begin + kHighlightBegin.size();
  return strip_markers(std::string_view(visible.text).substr(inner, end - inner));
}

}  // namespace safedit::corpus
