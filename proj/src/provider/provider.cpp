#include "safedit/provider.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "safedit/json_io.hpp"

namespace safedit::provider {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view role_name(Role role) { return role == Role::System ? "system" : "user"; }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0F];
  }
  return out;
}

}  // namespace

void validate(const ChatRequest& request) {
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw std::invalid_argument("temperature must be within [0, 2]");
  }
  if (request.messages.empty()) {
    throw std::invalid_argument("chat request has no messages");
  }
  if (request.messages.front().role != Role::System) {
    throw std::invalid_argument("first chat message must have the system role");
  }
  if (request.max_output_tokens <= 0) {
    throw std::invalid_argument("max_output_tokens must be positive");
  }
}

json canonical_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  return {{"messages", std::move(messages)},
          {"model_id", request.model_id},
          {"temperature", request.temperature}};
}

std::string fingerprint(const ChatRequest& request) {
  return sha256_hex(json_io::dump(canonical_json(request), -1));
}

// ---------------------------------------------------------------------------
// Cassette

Cassette Cassette::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open cassette " + path.string());
  }
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed cassette " + path.string() + ": " + e.what());
  }
}

Cassette Cassette::from_json(const json& doc) {
  const int version = doc.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported cassette format_version " + std::to_string(version));
  }
  Cassette cassette;
  for (const auto& item : doc.at("interactions")) {
    CassetteEntry entry;
    entry.fingerprint = item.at("fingerprint").get<std::string>();
    entry.request = item.value("request", json::object());
    entry.response_text = item.at("response").at("text").get<std::string>();
    cassette.entries_.push_back(std::move(entry));
  }
  return cassette;
}

json Cassette::to_json() const {
  json interactions = json::array();
  for (const auto& e : entries_) {
    interactions.push_back({{"fingerprint", e.fingerprint},
                            {"request", e.request},
                            {"response", {{"text", e.response_text}}}});
  }
  return {{"format_version", kFormatVersion}, {"interactions", std::move(interactions)}};
}

void Cassette::save(const fs::path& path) const {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  json_io::write_atomic(path, to_json());
}

const CassetteEntry* Cassette::find(const std::string& fingerprint) const {
  for (const auto& e : entries_) {
    if (e.fingerprint == fingerprint) {
      return &e;
    }
  }
  return nullptr;
}

bool Cassette::append(CassetteEntry entry) {
  if (find(entry.fingerprint) != nullptr) {
    return false;
  }
  entries_.push_back(std::move(entry));
  return true;
}

// ---------------------------------------------------------------------------
// Replay / record

ChatResponse ReplayProvider::complete(const ChatRequest& request) {
  validate(request);
  calls_.fetch_add(1);
  const auto fp = fingerprint(request);
  const auto* entry = cassette_.find(fp);
  if (entry == nullptr) {
    throw ReplayMiss(fp);
  }
  return ChatResponse{entry->response_text, std::nullopt, std::chrono::milliseconds{0}};
}

RecordingProvider::RecordingProvider(Provider& inner, fs::path cassette_path)
    : inner_(inner), path_(std::move(cassette_path)) {
  if (fs::exists(path_)) {
    cassette_ = Cassette::load(path_);
  }
}

ChatResponse RecordingProvider::complete(const ChatRequest& request) {
  auto response = inner_.complete(request);
  CassetteEntry entry{fingerprint(request), canonical_json(request), response.text};
  std::lock_guard lock(mutex_);
  if (cassette_.append(std::move(entry))) {
    cassette_.save(path_);
  }
  return response;
}

// ---------------------------------------------------------------------------
// Live HTTP backend

HttpConfig http_config_from_env() {
  HttpConfig config;
  if (const char* endpoint = std::getenv("SAFEDIT_ENDPOINT"); endpoint && *endpoint) {
    config.endpoint = endpoint;
  }
  if (const char* key = std::getenv("SAFEDIT_API_KEY"); key && *key) {
    config.api_key = key;
  }
  return config;
}

HttpProvider::HttpProvider(HttpConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("endpoint must be an absolute http(s) URL: " + config_.endpoint);
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  origin_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.max_attempts < 1) {
    config_.max_attempts = 1;
  }
}

ChatResponse HttpProvider::attempt(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  const json body = {{"model", request.model_id},
                     {"messages", std::move(messages)},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_output_tokens}};

  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_, headers, json_io::dump(body, -1), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  if (!res) {
    throw ProviderError("transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint, true);
  }
  if (res->status != 200) {
    throw ProviderError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint + ": " +
                            res->body.substr(0, 500),
                        false);
  }

  ChatResponse out;
  out.provider_latency = latency;
  try {
    const auto doc = json::parse(res->body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const auto& usage = doc["usage"];
      out.usage = TokenUsage{usage.value("prompt_tokens", 0), usage.value("completion_tokens", 0)};
    }
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed chat-completions envelope: ") + e.what(), false);
  }
  return out;
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
  validate(request);
  auto backoff = config_.initial_backoff;
  for (int attempt_no = 1;; ++attempt_no) {
    try {
      return attempt(request);
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt_no >= config_.max_attempts) {
        throw;
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace safedit::provider
