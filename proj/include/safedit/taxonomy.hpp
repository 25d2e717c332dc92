#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/corpus.hpp"
#include "safedit/orchestrator.hpp"
#include "safedit/provider.hpp"
#include "safedit/structured.hpp"

namespace safedit::taxonomy {

enum class TaxonomyCategory { IH, IG, RE, CM };

inline constexpr TaxonomyCategory kAllCategories[] = {TaxonomyCategory::IH, TaxonomyCategory::IG,
                                                      TaxonomyCategory::RE, TaxonomyCategory::CM};

std::string_view to_string(TaxonomyCategory c);
std::optional<TaxonomyCategory> parse_category(std::string_view s);

struct TaxonomyLabel {
  TaxonomyCategory category = TaxonomyCategory::IG;
  double confidence = 0.0;  // [0, 1]
  std::string justification;

  friend bool operator==(const TaxonomyLabel&, const TaxonomyLabel&) = default;
};

nlohmann::json to_json(const TaxonomyLabel& label);
TaxonomyLabel label_from_json(const nlohmann::json& doc);

/// Schema check of one raw model reply; needs no provider.
structured::Validation<TaxonomyLabel> validate_label_response(std::string_view reply);

/// Durations and memory addresses are masked so prompts for identical
/// failures are identical.
std::string normalize_log(std::string_view log);

/// Requires trace.verdict == fail (std::invalid_argument otherwise).
provider::ChatRequest build_taxonomy_prompt(const orchestrator::TaskTrace& trace,
                                            const corpus::EditTask& task,
                                            const planner::RequestOptions& options = {});

/// label is empty for an unclassified failure: the reply was invalid twice.
struct TaxonomyResult {
  std::optional<TaxonomyLabel> label;
  std::vector<structured::Exchange> exchanges;

  bool unclassified() const { return !label.has_value(); }
};

TaxonomyResult classify_failure(const orchestrator::TaskTrace& trace, const corpus::EditTask& task,
                                provider::Provider& provider,
                                const planner::RequestOptions& options = {});

nlohmann::json to_json(const TaxonomyResult& result);

}  // namespace safedit::taxonomy
