#include "safedit/editor.hpp"

#include <algorithm>

#include "safedit/prompt_assets.hpp"
#include "safedit/text.hpp"

namespace safedit::editor {

using nlohmann::json;

namespace {

// Finds the unique occurrence of needle; overlapping matches count.
std::size_t find_unique(std::string_view haystack, std::string_view needle, std::size_t index) {
  const auto first = haystack.find(needle);
  if (first == std::string_view::npos) {
    throw AnchorNotFound(index);
  }
  const auto count = text::count_occurrences(haystack, needle);
  if (count > 1) {
    throw AmbiguousAnchor(index, count);
  }
  return first;
}

constexpr std::size_t kInserted = static_cast<std::size_t>(-1);

// origin[i] is the input offset of output byte i, or kInserted. Changed
// regions are the gaps between consecutive surviving bytes.
void changed_ranges(const std::vector<std::size_t>& origin, std::size_t input_size,
                    std::vector<Range>& in_ranges, std::vector<Range>& out_ranges) {
  std::size_t prev_in = 0;
  std::size_t prev_out = 0;
  auto close = [&](std::size_t in_pos, std::size_t out_pos) {
    if (in_pos != prev_in || out_pos != prev_out) {
      in_ranges.push_back({prev_in, in_pos});
      out_ranges.push_back({prev_out, out_pos});
    }
  };
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (origin[i] == kInserted) {
      continue;
    }
    close(origin[i], i);
    prev_in = origin[i] + 1;
    prev_out = i + 1;
  }
  close(input_size, origin.size());
}

std::vector<std::string> decode_fragments(const json& doc, std::vector<EditFragment>& out) {
  const json* list = &doc;
  if (doc.is_object() && doc.contains("fragments")) {
    list = &doc["fragments"];
  }
  if (!list->is_array()) {
    return {"reply must be a JSON array of {\"anchor\", \"replacement\"} objects"};
  }
  if (list->empty()) {
    return {"reply contains no fragments"};
  }
  std::vector<std::string> errors;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& item = (*list)[i];
    const auto where = "fragment " + std::to_string(i);
    if (!item.is_object()) {
      errors.push_back(where + " is not an object");
      continue;
    }
    const auto anchor = item.find("anchor");
    const auto replacement = item.find("replacement");
    if (anchor == item.end() || !anchor->is_string()) {
      errors.push_back(where + ": \"anchor\" must be a string");
    } else if (anchor->get_ref<const std::string&>().empty()) {
      errors.push_back(where + ": \"anchor\" is empty");
    }
    if (replacement == item.end() || !replacement->is_string()) {
      errors.push_back(where + ": \"replacement\" must be a string");
    }
    if (errors.empty()) {
      out.push_back({anchor->get<std::string>(), replacement->get<std::string>()});
    }
  }
  return errors;
}

}  // namespace

AnchorNotFound::AnchorNotFound(std::size_t index)
    : ApplyError("fragment " + std::to_string(index) + ": anchor not found in the code", index) {}

AmbiguousAnchor::AmbiguousAnchor(std::size_t index, std::size_t count)
    : ApplyError("fragment " + std::to_string(index) + ": anchor matches " + std::to_string(count) +
                     " times; it must match exactly once",
                 index),
      count_(count) {}

json to_json(const EditFragment& f) { return {{"anchor", f.anchor}, {"replacement", f.replacement}}; }

EditFragment fragment_from_json(const json& doc) {
  return {doc.at("anchor").get<std::string>(), doc.at("replacement").get<std::string>()};
}

EditedCode apply_fragments(std::string_view code, std::span<const EditFragment> fragments) {
  EditedCode result;
  result.text = std::string(code);
  std::vector<std::size_t> origin(code.size());
  for (std::size_t i = 0; i < origin.size(); ++i) {
    origin[i] = i;
  }
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    if (f.anchor.empty()) {
      throw AnchorNotFound(i);
    }
    const auto pos = find_unique(result.text, f.anchor, i);
    const Range before{pos, pos + f.anchor.size()};
    result.text.replace(pos, f.anchor.size(), f.replacement);
    result.applied.push_back({i, before, {pos, pos + f.replacement.size()}});
    const auto at = origin.erase(origin.begin() + static_cast<std::ptrdiff_t>(before.start),
                                 origin.begin() + static_cast<std::ptrdiff_t>(before.end));
    origin.insert(at, f.replacement.size(), kInserted);
  }
  changed_ranges(origin, code.size(), result.input_ranges, result.output_ranges);
  return result;
}

bool is_full_file(std::string_view code, std::span<const EditFragment> fragments) {
  return fragments.size() == 1 && fragments[0].anchor == code;
}

provider::ChatRequest build_editor_prompt(const planner::EditPlan& plan, std::string_view code,
                                          std::span<const fal::FeedbackReport> feedback,
                                          const planner::RequestOptions& options) {
  std::string feedback_section;
  if (!feedback.empty()) {
    const auto rendered = fal::render_feedback(feedback);
    feedback_section = text::render_template(prompts::asset("editor_feedback"),
                                             {{"feedback", text::trim_right(rendered)}});
  }
  provider::ChatRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.max_output_tokens = options.max_output_tokens;
  request.messages.push_back({provider::Role::System, std::string(prompts::asset("editor_system"))});
  const auto plan_text = planner::to_json(plan).dump(2);
  request.messages.push_back(
      {provider::Role::User,
       text::render_template(prompts::asset("editor_user"),
                             {{"plan", plan_text}, {"code", code}, {"feedback_section", feedback_section}})});
  return request;
}

structured::Validation<std::vector<EditFragment>> parse_fragments_reply(std::string_view reply) {
  auto parsed = structured::parse_json_reply(reply);
  if (auto* error = std::get_if<std::string>(&parsed)) {
    return std::vector<std::string>{*error};
  }
  std::vector<EditFragment> fragments;
  auto errors = decode_fragments(std::get<json>(parsed), fragments);
  if (!errors.empty()) {
    return errors;
  }
  return fragments;
}

EditFailure::EditFailure(std::vector<structured::Exchange> exchanges)
    : std::runtime_error("editor produced no valid fragments after one corrective re-ask"),
      exchanges_(std::move(exchanges)) {}

EditResult edit(const planner::EditPlan& plan, std::string_view code, provider::Provider& provider,
                std::span<const fal::FeedbackReport> feedback, const planner::RequestOptions& options) {
  const auto request = build_editor_prompt(plan, code, feedback, options);
  auto outcome = structured::request_with_reask<std::vector<EditFragment>>(
      provider, request, [](std::string_view reply) { return parse_fragments_reply(reply); });
  if (!outcome.value) {
    throw EditFailure(std::move(outcome.exchanges));
  }
  return {std::move(*outcome.value), std::move(outcome.exchanges)};
}

}  // namespace safedit::editor
