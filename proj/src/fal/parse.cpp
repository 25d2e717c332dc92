#include <algorithm>
#include <charconv>

#include "safedit/fal.hpp"
#include "safedit/text.hpp"

namespace safedit::fal {

namespace {

using text::trim;

constexpr std::size_t kExcerptLines = 12;
constexpr std::size_t kUnparsedTailLines = 15;

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  return line;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// "==== FAILURES ====" -> "FAILURES"; returns nullopt for non-headers.
std::optional<std::string_view> section_title(std::string_view line) {
  line = trim(line);
  if (line.size() < 7 || line.front() != '=' || line.back() != '=') {
    return std::nullopt;
  }
  const auto first = line.find_first_not_of('=');
  const auto last = line.find_last_not_of('=');
  if (first == std::string_view::npos || first < 2 || line.size() - 1 - last < 2) {
    return std::nullopt;
  }
  return trim(line.substr(first, last - first + 1));
}

// "____ test_name ____" -> "test_name".
std::optional<std::string_view> block_title(std::string_view line) {
  line = trim(line);
  if (line.size() < 5 || line.front() != '_' || line.back() != '_') {
    return std::nullopt;
  }
  const auto first = line.find_first_not_of('_');
  const auto last = line.find_last_not_of('_');
  if (first == std::string_view::npos) {
    return std::nullopt;
  }
  auto title = trim(line.substr(first, last - first + 1));
  if (title.empty() || line[first] != ' ' || line[last] != ' ') {
    return std::nullopt;
  }
  // "_ _ _ _" separates traceback frames inside one block.
  if (title.find_first_not_of("_ ") == std::string_view::npos) {
    return std::nullopt;
  }
  return title;
}

// Dotted identifier whose final segment reads like an exception class.
bool is_exception_name(std::string_view s) {
  if (s.empty() || s.size() > 200) {
    return false;
  }
  std::size_t start = 0;
  std::string_view last;
  while (true) {
    const auto dot = s.find('.', start);
    const auto segment = s.substr(start, dot == std::string_view::npos ? s.npos : dot - start);
    if (!text::is_identifier(segment)) {
      return false;
    }
    last = segment;
    if (dot == std::string_view::npos) {
      break;
    }
    start = dot + 1;
  }
  if (!(last.front() >= 'A' && last.front() <= 'Z')) {
    return false;
  }
  for (const auto suffix :
       {"Error", "Exception", "Exit", "Interrupt", "Warning", "Failure", "Failed", "Timeout",
        "TimeoutExpired", "StopIteration"}) {
    if (ends_with(last, suffix)) {
      return true;
    }
  }
  return false;
}

// "KeyError: 'x'" or "KeyError" -> "KeyError".
std::optional<std::string_view> leading_exception(std::string_view s) {
  s = trim(s);
  const auto colon = s.find(':');
  const auto name = colon == std::string_view::npos ? s : s.substr(0, colon);
  if (is_exception_name(name)) {
    return name;
  }
  return std::nullopt;
}

std::string_view last_segment(std::string_view dotted) {
  const auto dot = dotted.rfind('.');
  return dot == std::string_view::npos ? dotted : dotted.substr(dot + 1);
}

// "test_solution.py:9: AssertionError"
struct LocationLine {
  SourceLocation location;
  std::string exception;
};

std::optional<LocationLine> parse_location_line(std::string_view line) {
  line = trim(line);
  const auto sep = line.rfind(": ");
  if (sep == std::string_view::npos || sep == 0) {
    return std::nullopt;
  }
  const auto exception = trim(line.substr(sep + 2));
  if (!is_exception_name(exception)) {
    return std::nullopt;
  }
  const auto head = line.substr(0, sep);
  const auto colon = head.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    return std::nullopt;
  }
  const auto number = head.substr(colon + 1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (ec != std::errc{} || ptr != number.data() + number.size() || number.empty()) {
    return std::nullopt;
  }
  const auto file = head.substr(0, colon);
  if (file.find(' ') != std::string_view::npos) {
    return std::nullopt;
  }
  return LocationLine{{std::string(file), value}, std::string(exception)};
}

// Splits "lhs == rhs" at the first "==" outside quotes and brackets.
std::optional<std::pair<std::string_view, std::string_view>> split_top_level(std::string_view s,
                                                                             std::string_view op) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i + op.size() <= s.size(); ++i) {
    const char c = s[i];
    if (quote != 0) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      --depth;
    } else if (depth == 0 && s.substr(i, op.size()) == op) {
      const auto lhs = trim(s.substr(0, i));
      const auto rhs = trim(s.substr(i + op.size()));
      if (lhs.empty() || rhs.empty()) {
        return std::nullopt;
      }
      return std::pair{lhs, rhs};
    }
  }
  return std::nullopt;
}

struct Comparison {
  std::string expected;
  std::string actual;
};

// pytest's rewritten "assert <actual> == <expected>" and unittest's
// "<first> != <second>" (assertEqual(actual, expected)).
std::optional<Comparison> parse_comparison(std::string_view message) {
  message = trim(message);
  if (starts_with(message, "AssertionError:")) {
    message = trim(message.substr(15));
  }
  if (starts_with(message, "assert ")) {
    if (auto parts = split_top_level(message.substr(7), " == ")) {
      return Comparison{std::string(parts->second), std::string(parts->first)};
    }
    return std::nullopt;
  }
  if (auto parts = split_top_level(message, " != ")) {
    return Comparison{std::string(parts->second), std::string(parts->first)};
  }
  return std::nullopt;
}

// Generic dialect: "expected 2, got 8" / "expected 2 but got 8".
std::optional<Comparison> parse_expected_got(std::string_view message) {
  const auto at = message.find("expected ");
  if (at == std::string_view::npos) {
    return std::nullopt;
  }
  auto rest = message.substr(at + 9);
  for (const auto sep : {", got ", " but got ", ", actual ", " but was "}) {
    const auto pos = rest.find(sep);
    if (pos != std::string_view::npos) {
      const auto expected = trim(rest.substr(0, pos));
      const auto actual = trim(rest.substr(pos + std::string_view(sep).size()));
      if (!expected.empty() && !actual.empty()) {
        return Comparison{std::string(expected), std::string(actual)};
      }
    }
  }
  return std::nullopt;
}

std::string_view error_line_content(std::string_view line) {
  // "E       assert 8 == 2" -> "assert 8 == 2"
  if (line.size() >= 2 && line[0] == 'E' && (line[1] == ' ' || line[1] == '\t')) {
    return trim(line.substr(1));
  }
  return {};
}

std::string join_tail(const std::vector<std::string_view>& lines, std::size_t n) {
  std::size_t end = lines.size();
  while (end > 0 && trim(lines[end - 1]).empty()) {
    --end;
  }
  const std::size_t begin = end > n ? end - n : 0;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) {
      out += '\n';
    }
    out += lines[i];
  }
  return out;
}

std::string block_test_name(std::string_view title) {
  if (starts_with(title, "ERROR collecting")) {
    return std::string(kCollectionTest);
  }
  for (const auto prefix : {"ERROR at setup of ", "ERROR at teardown of "}) {
    if (starts_with(title, prefix)) {
      return std::string(trim(title.substr(std::string_view(prefix).size())));
    }
  }
  return std::string(title);
}

ParsedFailure parse_block(std::string_view title, const std::vector<std::string_view>& lines) {
  ParsedFailure f;
  f.test_name = block_test_name(title);

  std::optional<std::string> import_header;
  std::optional<LocationLine> location;
  std::optional<std::string> e_line_exception;
  std::optional<Comparison> comparison;
  for (const auto line : lines) {
    const auto trimmed = trim(line);
    if (const auto pos = trimmed.find(" while importing test module");
        pos != std::string_view::npos && is_exception_name(trimmed.substr(0, pos))) {
      import_header = std::string(trimmed.substr(0, pos));
    }
    if (auto loc = parse_location_line(line)) {
      location = std::move(loc);
    }
    const auto content = error_line_content(line);
    if (!content.empty()) {
      if (auto name = leading_exception(content)) {
        e_line_exception = std::string(*name);
      }
      if (!comparison) {
        comparison = parse_comparison(content);
      }
    }
  }

  if (import_header) {
    f.exception_type = *import_header;
  } else if (location) {
    f.exception_type = location->exception;
  } else if (e_line_exception) {
    f.exception_type = *e_line_exception;
  }
  if (location) {
    f.location = location->location;
  }
  if (comparison && last_segment(f.exception_type) == "AssertionError") {
    f.expected = comparison->expected;
    f.actual = comparison->actual;
  }
  f.excerpt = join_tail(lines, kExcerptLines);
  return f;
}

struct SummaryEntry {
  std::string test_name;
  std::string message;
};

// "FAILED test_x.py::TestA::test_b - msg" -> {"TestA.test_b", "msg"}
SummaryEntry parse_summary_entry(std::string_view rest) {
  std::string_view nodeid = rest;
  std::string_view message;
  if (const auto dash = rest.find(" - "); dash != std::string_view::npos) {
    nodeid = rest.substr(0, dash);
    message = rest.substr(dash + 3);
  }
  nodeid = trim(nodeid);
  SummaryEntry entry;
  const auto sep = nodeid.find("::");
  if (sep == std::string_view::npos) {
    entry.test_name = std::string(kCollectionTest);
  } else {
    entry.test_name = text::replace_all(std::string(nodeid.substr(sep + 2)), "::", ".");
  }
  entry.message = std::string(trim(message));
  return entry;
}

ParsedFailure failure_from_message(std::string test_name, std::string_view message) {
  ParsedFailure f;
  f.test_name = std::move(test_name);
  message = trim(message);
  if (auto name = leading_exception(message)) {
    f.exception_type = std::string(*name);
  } else if (starts_with(message, "assert ")) {
    f.exception_type = "AssertionError";
  }
  std::optional<Comparison> comparison;
  if (f.exception_type.empty() || f.exception_type == "AssertionError") {
    comparison = parse_comparison(message);
    if (!comparison) {
      comparison = parse_expected_got(message);
    }
    if (comparison) {
      f.exception_type = "AssertionError";
    }
  }
  if (comparison) {
    f.expected = std::move(comparison->expected);
    f.actual = std::move(comparison->actual);
  }
  f.excerpt = std::string(message);
  return f;
}

// "3 failed, 1 passed in 0.79s", optionally framed by '='.
struct Tally {
  bool seen = false;
  bool reports_failure = false;
};

void scan_tally(std::string_view line, Tally& tally) {
  line = trim(line);
  if (auto framed = section_title(line)) {
    line = *framed;
  }
  if (line.empty() || line.size() > 200 || line.find(" in ") == std::string_view::npos ||
      !ends_with(line, "s")) {
    return;
  }
  const bool numeric_start = line.front() >= '0' && line.front() <= '9';
  if (!numeric_start && !starts_with(line, "no tests ran")) {
    return;
  }
  for (const auto word : {" passed", " failed", " error", " skipped", " deselected", " xfailed",
                          " xpassed", " warning", "no tests ran"}) {
    if (line.find(word) != std::string_view::npos) {
      tally.seen = true;
      if (std::string_view(word) == " failed" || std::string_view(word) == " error") {
        tally.reports_failure = true;
      }
    }
  }
}

}  // namespace

std::vector<ParsedFailure> parse_log(std::string_view raw_log) {
  if (trim(raw_log).empty()) {
    return {};
  }

  const auto raw_lines = text::split_lines(raw_log);
  std::vector<std::string_view> lines;
  lines.reserve(raw_lines.size());
  for (const auto l : raw_lines) {
    lines.push_back(chomp(l));
  }

  std::vector<ParsedFailure> blocks;
  std::vector<SummaryEntry> summary;
  std::vector<ParsedFailure> generic;
  bool recognized = false;
  Tally tally;

  enum class Section { None, Failures, Errors, Summary, Other };
  Section section = Section::None;
  std::optional<std::string_view> block_name;
  std::vector<std::string_view> block_lines;
  auto flush_block = [&] {
    if (block_name) {
      blocks.push_back(parse_block(*block_name, block_lines));
    }
    block_name.reset();
    block_lines.clear();
  };

  for (const auto line : lines) {
    scan_tally(line, tally);
    if (auto title = section_title(line)) {
      flush_block();
      recognized = true;
      if (*title == "FAILURES") {
        section = Section::Failures;
      } else if (*title == "ERRORS") {
        section = Section::Errors;
      } else if (*title == "short test summary info") {
        section = Section::Summary;
      } else {
        section = Section::Other;
      }
      continue;
    }
    if (section == Section::Failures || section == Section::Errors) {
      if (auto title = block_title(line)) {
        flush_block();
        block_name = *title;
        continue;
      }
      if (block_name) {
        block_lines.push_back(line);
      }
      continue;
    }

    const auto trimmed = trim(line);
    if (starts_with(trimmed, "FAILED ") || starts_with(trimmed, "ERROR ")) {
      const auto rest = trimmed.substr(trimmed.find(' ') + 1);
      // "ERROR: file or directory not found" is a usage message, not a node.
      if (!starts_with(trimmed, "ERROR:") && !rest.empty()) {
        summary.push_back(parse_summary_entry(rest));
        recognized = true;
      }
      continue;
    }
    if (starts_with(trimmed, "PASSED ") || starts_with(trimmed, "PASS ") ||
        starts_with(trimmed, "XFAIL ") || starts_with(trimmed, "SKIPPED ")) {
      recognized = true;
      continue;
    }
    if (starts_with(trimmed, "FAIL ")) {
      recognized = true;
      auto rest = trim(trimmed.substr(5));
      std::string_view name = rest;
      std::string_view message;
      if (const auto colon = rest.find(':'); colon != std::string_view::npos) {
        name = trim(rest.substr(0, colon));
        message = trim(rest.substr(colon + 1));
      }
      if (!name.empty()) {
        generic.push_back(failure_from_message(std::string(name), message));
      }
    }
  }
  flush_block();
  recognized = recognized || tally.seen;

  std::vector<ParsedFailure> out = std::move(blocks);
  std::vector<bool> matched(out.size(), false);
  for (auto& entry : summary) {
    bool merged = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!matched[i] && out[i].test_name == entry.test_name) {
        matched[i] = true;
        merged = true;
        if (out[i].exception_type.empty()) {
          auto from_summary = failure_from_message(entry.test_name, entry.message);
          out[i].exception_type = std::move(from_summary.exception_type);
          if (!out[i].expected && from_summary.expected) {
            out[i].expected = std::move(from_summary.expected);
            out[i].actual = std::move(from_summary.actual);
          }
        }
        break;
      }
    }
    if (!merged) {
      out.push_back(failure_from_message(std::move(entry.test_name), entry.message));
      matched.push_back(true);
    }
  }
  for (auto& g : generic) {
    out.push_back(std::move(g));
  }

  for (auto& f : out) {
    if (f.test_name.empty()) {
      f.test_name = std::string(kUnparsedTest);
    }
  }
  if (!out.empty()) {
    return out;
  }
  if (recognized && !tally.reports_failure) {
    return {};
  }

  ParsedFailure unparsed;
  unparsed.test_name = std::string(kUnparsedTest);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (auto name = leading_exception(*it)) {
      unparsed.exception_type = std::string(*name);
      break;
    }
  }
  unparsed.excerpt = join_tail(lines, kUnparsedTailLines);
  return {unparsed};
}

}  // namespace safedit::fal
