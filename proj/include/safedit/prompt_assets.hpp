#pragma once

#include <string_view>

namespace safedit::prompts {

/// Bumped whenever a template under assets/prompts/ changes; recorded in
/// cassettes so stale fixtures are easy to spot.
inline constexpr int kTemplateVersion = 1;

/// Template text by file stem (e.g. "planner_system"). Throws
/// std::out_of_range for unknown names.
std::string_view asset(std::string_view name);

}  // namespace safedit::prompts
