#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace safedit::text {

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
std::string_view trim_right(std::string_view s);

/// Splits on '\n'; a trailing '\r' is kept on each line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Counts occurrences of needle, overlapping matches included.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Last n lines of s, joined with '\n'.
std::string tail_lines(std::string_view s, std::size_t n);

bool is_identifier(std::string_view s);

/// True iff offset does not fall inside a UTF-8 multi-byte sequence.
bool is_utf8_boundary(std::string_view s, std::size_t offset);

/// Replaces {{name}} placeholders in one pass over the template; inserted
/// values are never rescanned. Unknown placeholders are left as-is.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string_view, std::string_view>>& values);

}  // namespace safedit::text
