#include "safedit/planner.hpp"

#include "safedit/prompt_assets.hpp"
#include "safedit/text.hpp"

namespace safedit::planner {

using nlohmann::json;
using corpus::VisibilityVariant;

namespace {

constexpr std::string_view kFence = "```";

std::vector<std::string> string_list(const json& doc, const char* key, std::vector<std::string>& errors) {
  std::vector<std::string> out;
  const auto it = doc.find(key);
  if (it == doc.end()) {
    errors.push_back(std::string("missing field \"") + key + "\"");
    return out;
  }
  if (!it->is_array()) {
    errors.push_back(std::string("field \"") + key + "\" must be an array of strings");
    return out;
  }
  for (const auto& item : *it) {
    if (!item.is_string()) {
      errors.push_back(std::string("field \"") + key + "\" must contain only strings");
      return {};
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::string string_field(const json& doc, const char* key, std::vector<std::string>& errors) {
  const auto it = doc.find(key);
  if (it == doc.end()) {
    errors.push_back(std::string("missing field \"") + key + "\"");
    return {};
  }
  if (!it->is_string()) {
    errors.push_back(std::string("field \"") + key + "\" must be a string");
    return {};
  }
  return it->get<std::string>();
}

EditPlan decode(const json& doc, std::vector<std::string>& errors) {
  EditPlan plan;
  if (!doc.is_object()) {
    errors.push_back("reply must be a JSON object with the five plan fields");
    return plan;
  }
  plan.observed_elements = string_list(doc, "observed_elements", errors);
  plan.edit_intent = string_field(doc, "edit_intent", errors);
  plan.target_description = string_field(doc, "target_description", errors);
  plan.required_changes = string_list(doc, "required_changes", errors);
  plan.constraints = string_list(doc, "constraints", errors);
  return plan;
}

}  // namespace

json to_json(const EditPlan& plan) {
  return {{"observed_elements", plan.observed_elements},
          {"edit_intent", plan.edit_intent},
          {"target_description", plan.target_description},
          {"required_changes", plan.required_changes},
          {"constraints", plan.constraints}};
}

EditPlan plan_from_json(const json& doc) {
  std::vector<std::string> errors;
  auto plan = decode(doc, errors);
  if (!errors.empty()) {
    throw std::invalid_argument("malformed plan: " + text::join(errors, "; "));
  }
  return plan;
}

provider::ChatRequest build_planner_prompt(const corpus::EditTask& task,
                                           const corpus::VisibleCode& visible,
                                           const RequestOptions& options) {
  const bool code_only = visible.variant == VisibilityVariant::CodeOnly;
  std::string legend;
  if (!code_only) {
    legend += std::string(prompts::asset("legend_highlight")) + "\n";
  }
  if (visible.variant == VisibilityVariant::HighlightCursor) {
    legend += std::string(prompts::asset("legend_cursor")) + "\n";
  }

  provider::ChatRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.max_output_tokens = options.max_output_tokens;
  request.messages.push_back(
      {provider::Role::System,
       text::render_template(prompts::asset("planner_system"),
                             {{"observed_scope", code_only ? "the visible code" : "the highlighted region"}})});
  request.messages.push_back(
      {provider::Role::User,
       text::render_template(prompts::asset("planner_user"),
                             {{"instruction_language", task.instruction_language},
                              {"instruction", task.instruction},
                              {"legend", legend},
                              {"code_language", task.code_language},
                              {"visible_code", visible.text}})});
  return request;
}

std::vector<std::string> validate_plan(const EditPlan& plan, const corpus::VisibleCode& visible) {
  std::vector<std::string> violations;
  const auto region = corpus::visible_region(visible);
  for (const auto& element : plan.observed_elements) {
    if (element.empty()) {
      violations.push_back("observed element is empty");
    } else if (region.find(element) == std::string::npos) {
      violations.push_back(element + " not verbatim in the visible code");
    }
  }
  auto check_fence = [&](std::string_view field, std::string_view value) {
    if (value.find(kFence) != std::string_view::npos) {
      violations.push_back("code fence in " + std::string(field));
    }
  };
  for (const auto& s : plan.observed_elements) check_fence("observed_elements", s);
  check_fence("edit_intent", plan.edit_intent);
  check_fence("target_description", plan.target_description);
  for (const auto& s : plan.required_changes) check_fence("required_changes", s);
  for (const auto& s : plan.constraints) check_fence("constraints", s);
  if (plan.required_changes.empty()) {
    violations.push_back("required_changes is empty");
  }
  return violations;
}

structured::Validation<EditPlan> parse_plan_reply(std::string_view reply,
                                                  const corpus::VisibleCode& visible) {
  auto parsed = structured::parse_json_reply(reply);
  if (auto* error = std::get_if<std::string>(&parsed)) {
    return std::vector<std::string>{*error};
  }
  std::vector<std::string> errors;
  auto plan = decode(std::get<json>(parsed), errors);
  if (!errors.empty()) {
    return errors;
  }
  errors = validate_plan(plan, visible);
  if (!errors.empty()) {
    return errors;
  }
  return plan;
}

PlanFailure::PlanFailure(std::vector<structured::Exchange> exchanges)
    : std::runtime_error("planner produced no valid plan after one corrective re-ask"),
      exchanges_(std::move(exchanges)) {}

PlanResult plan(const corpus::EditTask& task, const corpus::VisibleCode& visible,
                provider::Provider& provider, const RequestOptions& options) {
  const auto request = build_planner_prompt(task, visible, options);
  auto outcome = structured::request_with_reask<EditPlan>(
      provider, request, [&](std::string_view reply) { return parse_plan_reply(reply, visible); });
  if (!outcome.value) {
    throw PlanFailure(std::move(outcome.exchanges));
  }
  return {std::move(*outcome.value), std::move(outcome.exchanges)};
}

}  // namespace safedit::planner
