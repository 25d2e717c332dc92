#include "safedit/taxonomy.hpp"

#include <cmath>
#include <regex>

#include "safedit/prompt_assets.hpp"
#include "safedit/text.hpp"

namespace safedit::taxonomy {

using nlohmann::json;

namespace {

constexpr std::string_view kPlanUnavailable = "PLAN UNAVAILABLE";
constexpr std::string_view kNoEditedCode = "EDITED CODE UNAVAILABLE";
constexpr std::string_view kNoLog = "NO TEST LOG";

struct Evidence {
  std::string edited_code;
  std::string log;
};

// The last attempt's code and failure output.
Evidence last_evidence(const orchestrator::TaskTrace& trace) {
  Evidence ev{std::string(kNoEditedCode), std::string(kNoLog)};
  if (trace.iterations.empty()) {
    if (trace.plan_error) {
      ev.log = *trace.plan_error;
    }
    return ev;
  }
  const auto& last = trace.iterations.back();
  if (last.edited_code) {
    ev.edited_code = *last.edited_code;
  }
  if (last.run) {
    ev.log = normalize_log(last.run->raw_log);
  } else if (last.apply_error) {
    ev.log = *last.apply_error;
  } else if (last.edit_error) {
    ev.log = *last.edit_error;
  }
  return ev;
}

}  // namespace

std::string_view to_string(TaxonomyCategory c) {
  switch (c) {
    case TaxonomyCategory::IH:
      return "IH";
    case TaxonomyCategory::IG:
      return "IG";
    case TaxonomyCategory::RE:
      return "RE";
    case TaxonomyCategory::CM:
      return "CM";
  }
  return "IG";
}

std::optional<TaxonomyCategory> parse_category(std::string_view s) {
  for (const auto c : kAllCategories) {
    if (to_string(c) == s) {
      return c;
    }
  }
  return std::nullopt;
}

json to_json(const TaxonomyLabel& label) {
  return {{"category", to_string(label.category)},
          {"confidence", label.confidence},
          {"justification", label.justification}};
}

TaxonomyLabel label_from_json(const json& doc) {
  auto result = validate_label_response(doc.dump());
  if (auto* errors = std::get_if<std::vector<std::string>>(&result)) {
    throw std::invalid_argument("malformed taxonomy label: " + text::join(*errors, "; "));
  }
  return std::get<TaxonomyLabel>(result);
}

structured::Validation<TaxonomyLabel> validate_label_response(std::string_view reply) {
  auto parsed = structured::parse_json_reply(reply);
  if (auto* error = std::get_if<std::string>(&parsed)) {
    return std::vector<std::string>{*error};
  }
  const auto& doc = std::get<json>(parsed);
  if (!doc.is_object()) {
    return std::vector<std::string>{"reply must be a JSON object with category, confidence and justification"};
  }
  std::vector<std::string> errors;
  TaxonomyLabel label;
  const auto category = doc.find("category");
  if (category == doc.end() || !category->is_string()) {
    errors.push_back("\"category\" must be one of IH, IG, RE, CM");
  } else if (auto c = parse_category(category->get<std::string>())) {
    label.category = *c;
  } else {
    errors.push_back("unknown category \"" + category->get<std::string>() + "\"; use IH, IG, RE or CM");
  }
  const auto confidence = doc.find("confidence");
  if (confidence == doc.end() || !confidence->is_number()) {
    errors.push_back("\"confidence\" must be a number between 0 and 1");
  } else {
    label.confidence = confidence->get<double>();
    if (!std::isfinite(label.confidence) || label.confidence < 0.0 || label.confidence > 1.0) {
      errors.push_back("\"confidence\" " + confidence->dump() + " is outside [0, 1]");
    }
  }
  const auto justification = doc.find("justification");
  if (justification == doc.end() || !justification->is_string()) {
    errors.push_back("\"justification\" must be a string");
  } else {
    label.justification = justification->get<std::string>();
    if (text::trim(label.justification).empty()) {
      errors.push_back("\"justification\" is empty");
    }
  }
  if (!errors.empty()) {
    return errors;
  }
  return label;
}

std::string normalize_log(std::string_view log) {
  static const std::regex kDuration(R"(\bin [0-9]+(\.[0-9]+)?s\b)");
  static const std::regex kAddress(R"(0x[0-9a-fA-F]+)");
  std::string out(log);
  out = std::regex_replace(out, kDuration, "in <duration>");
  out = std::regex_replace(out, kAddress, "0x<addr>");
  return out;
}

provider::ChatRequest build_taxonomy_prompt(const orchestrator::TaskTrace& trace,
                                            const corpus::EditTask& task,
                                            const planner::RequestOptions& options) {
  if (trace.verdict != orchestrator::Verdict::Fail) {
    throw std::invalid_argument("only failed traces can be classified (" + trace.task_id + ")");
  }
  const auto ev = last_evidence(trace);
  const auto plan = trace.plan ? planner::to_json(*trace.plan).dump(2) : std::string(kPlanUnavailable);
  provider::ChatRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.max_output_tokens = options.max_output_tokens;
  request.messages.push_back({provider::Role::System, std::string(prompts::asset("taxonomy_system"))});
  request.messages.push_back(
      {provider::Role::User, text::render_template(prompts::asset("taxonomy_user"),
                                                   {{"instruction", task.instruction},
                                                    {"original_code", task.original_code},
                                                    {"edited_code", ev.edited_code},
                                                    {"test_log", ev.log},
                                                    {"plan", plan}})});
  return request;
}

TaxonomyResult classify_failure(const orchestrator::TaskTrace& trace, const corpus::EditTask& task,
                                provider::Provider& provider, const planner::RequestOptions& options) {
  const auto request = build_taxonomy_prompt(trace, task, options);
  auto outcome = structured::request_with_reask<TaxonomyLabel>(provider, request, validate_label_response);
  return {std::move(outcome.value), std::move(outcome.exchanges)};
}

json to_json(const TaxonomyResult& result) {
  json exchanges = json::array();
  for (const auto& e : result.exchanges) {
    exchanges.push_back(structured::to_json(e));
  }
  return {{"label", result.label ? to_json(*result.label) : json(nullptr)},
          {"unclassified", result.unclassified()},
          {"exchanges", exchanges}};
}

}  // namespace safedit::taxonomy
