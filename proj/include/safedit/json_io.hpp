#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace safedit::json_io {

/// dump() that replaces invalid UTF-8 instead of throwing. Output ends
/// with a newline when indent >= 0.
std::string dump(const nlohmann::json& doc, int indent = 2);

/// Writes via a sibling temp file and rename.
void write_atomic(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Throws std::runtime_error naming the file on read or parse failure.
nlohmann::json read_file(const std::filesystem::path& path);

}  // namespace safedit::json_io
