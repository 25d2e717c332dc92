#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/corpus.hpp"
#include "safedit/provider.hpp"
#include "safedit/structured.hpp"

namespace safedit::planner {

struct EditPlan {
  std::vector<std::string> observed_elements;
  std::string edit_intent;
  std::string target_description;
  std::vector<std::string> required_changes;
  std::vector<std::string> constraints;

  friend bool operator==(const EditPlan&, const EditPlan&) = default;
};

nlohmann::json to_json(const EditPlan& plan);
/// Strict: all five keys with the right JSON types, nothing else required.
EditPlan plan_from_json(const nlohmann::json& doc);

struct RequestOptions {
  std::string model_id = provider::kDefaultModel;
  double temperature = provider::kDefaultTemperature;
  int max_output_tokens = provider::kDefaultMaxOutputTokens;
};

/// The planner sees the instruction and the visible code only, never the
/// test suite.
provider::ChatRequest build_planner_prompt(const corpus::EditTask& task,
                                           const corpus::VisibleCode& visible,
                                           const RequestOptions& options = {});

/// Empty means valid.
std::vector<std::string> validate_plan(const EditPlan& plan, const corpus::VisibleCode& visible);

/// Parses and validates one reply.
structured::Validation<EditPlan> parse_plan_reply(std::string_view reply,
                                                  const corpus::VisibleCode& visible);

class PlanFailure : public std::runtime_error {
 public:
  explicit PlanFailure(std::vector<structured::Exchange> exchanges);
  const std::vector<structured::Exchange>& exchanges() const noexcept { return exchanges_; }

 private:
  std::vector<structured::Exchange> exchanges_;
};

struct PlanResult {
  EditPlan plan;
  std::vector<structured::Exchange> exchanges;
};

/// One corrective re-ask on an invalid reply; a second invalid reply throws
/// PlanFailure.
PlanResult plan(const corpus::EditTask& task, const corpus::VisibleCode& visible,
                provider::Provider& provider, const RequestOptions& options = {});

}  // namespace safedit::planner
