#include "safedit/structured.hpp"

#include "safedit/prompt_assets.hpp"
#include "safedit/text.hpp"

namespace safedit::structured {

using nlohmann::json;

namespace {

// Strips one ```lang ... ``` wrapper spanning the whole reply.
std::string_view unfence(std::string_view reply) {
  auto body = text::trim(reply);
  if (body.size() < 6 || body.substr(0, 3) != "```" || body.substr(body.size() - 3) != "```") {
    return body;
  }
  const auto first_nl = body.find('\n');
  if (first_nl == std::string_view::npos) {
    return body;
  }
  body = body.substr(first_nl + 1, body.size() - 3 - (first_nl + 1));
  return text::trim(body);
}

}  // namespace

std::variant<json, std::string> parse_json_reply(std::string_view text) {
  const auto body = unfence(text);
  if (body.empty()) {
    return std::string("reply is empty; expected a JSON document");
  }
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    return std::string("reply is not valid JSON: ") + e.what();
  }
}

json to_json(const Exchange& e) {
  return {{"fingerprint", e.fingerprint}, {"response", e.response}, {"errors", e.errors}};
}

Exchange exchange_from_json(const json& doc) {
  return Exchange{doc.at("fingerprint").get<std::string>(), doc.at("response").get<std::string>(),
                  doc.value("errors", std::vector<std::string>{})};
}

provider::ChatRequest with_reask(provider::ChatRequest request, std::string_view rejected,
                                 const std::vector<std::string>& errors) {
  std::string listed;
  for (const auto& e : errors) {
    listed += "- " + e + "\n";
  }
  const auto message = text::render_template(
      prompts::asset("reask"),
      {{"errors", text::trim_right(listed)}, {"response", rejected}});
  request.messages.push_back({provider::Role::User, message});
  return request;
}

}  // namespace safedit::structured
