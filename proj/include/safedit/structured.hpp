#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/provider.hpp"

namespace safedit::structured {

/// Parses a model reply as JSON. A reply wrapped in a single Markdown fence
/// is unwrapped first; otherwise the text must be the JSON document itself
/// (surrounding whitespace allowed).
std::variant<nlohmann::json, std::string> parse_json_reply(std::string_view text);

/// One model call made while obtaining a structured reply.
struct Exchange {
  std::string fingerprint;
  std::string response;
  std::vector<std::string> errors;  // empty when the reply was accepted
};

nlohmann::json to_json(const Exchange& e);
Exchange exchange_from_json(const nlohmann::json& doc);

template <class T>
struct Outcome {
  std::optional<T> value;
  std::vector<Exchange> exchanges;

  const std::vector<std::string>& last_errors() const { return exchanges.back().errors; }
};

template <class T>
using Validation = std::variant<T, std::vector<std::string>>;

/// The request extended with a corrective user turn quoting the rejected
/// reply and the validator's complaints.
provider::ChatRequest with_reask(provider::ChatRequest request, std::string_view rejected,
                                 const std::vector<std::string>& errors);

/// Asks once; on a rejected reply, re-asks once with the validation errors
/// quoted. A second rejection leaves value empty. Provider exceptions
/// propagate untouched.
template <class T, class Validator>
Outcome<T> request_with_reask(provider::Provider& provider, const provider::ChatRequest& request,
                              Validator&& validate) {
  Outcome<T> outcome;
  auto current = request;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto response = provider.complete(current);
    Validation<T> result = validate(std::string_view(response.text));
    Exchange exchange{provider::fingerprint(current), response.text, {}};
    if (auto* value = std::get_if<T>(&result)) {
      outcome.exchanges.push_back(std::move(exchange));
      outcome.value = std::move(*value);
      return outcome;
    }
    exchange.errors = std::get<std::vector<std::string>>(std::move(result));
    if (exchange.errors.empty()) {
      exchange.errors.push_back("reply rejected");
    }
    outcome.exchanges.push_back(exchange);
    current = with_reask(request, response.text, exchange.errors);
  }
  return outcome;
}

}  // namespace safedit::structured
