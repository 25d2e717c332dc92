#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace safedit::provider {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr int kDefaultMaxOutputTokens = 4096;
inline constexpr const char* kDefaultModel = "gpt-4.1";

enum class Role { System, User };

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = kDefaultTemperature;
  std::string model_id = kDefaultModel;
  int max_output_tokens = kDefaultMaxOutputTokens;
};

/// Throws std::invalid_argument unless temperature is in [0, 2], the message
/// list is non-empty and starts with the system message.
void validate(const ChatRequest& request);

/// Messages, temperature and model id; the fingerprint is computed over
/// this document's compact dump.
nlohmann::json canonical_json(const ChatRequest& request);

/// Hex SHA-256 of the canonical request.
std::string fingerprint(const ChatRequest& request);

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<TokenUsage> usage;
  std::chrono::milliseconds provider_latency{0};
};

class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// The request was not recorded; usually a prompt template drifted.
class ReplayMiss : public ProviderError {
 public:
  explicit ReplayMiss(std::string fingerprint)
      : ProviderError("replay miss: no cassette entry for fingerprint " + fingerprint, false),
        fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct CassetteEntry {
  std::string fingerprint;
  nlohmann::json request;  // canonical form, kept for review
  std::string response_text;
};

class Cassette {
 public:
  static constexpr int kFormatVersion = 1;

  static Cassette load(const std::filesystem::path& path);
  static Cassette from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// Writes atomically (temp file + rename).
  void save(const std::filesystem::path& path) const;

  const CassetteEntry* find(const std::string& fingerprint) const;
  /// Appends unless an entry with the same fingerprint exists; returns
  /// whether it was added.
  bool append(CassetteEntry entry);

  const std::vector<CassetteEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<CassetteEntry> entries_;
};

/// Serves recorded responses by exact fingerprint; never touches the network.
class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(Cassette cassette) : cassette_(std::move(cassette)) {}
  ChatResponse complete(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Cassette cassette_;
  std::atomic<std::size_t> calls_{0};
};

/// Forwards to another provider and appends every exchange to a cassette
/// file, saving after each call. Safe to share between threads.
class RecordingProvider final : public Provider {
 public:
  RecordingProvider(Provider& inner, std::filesystem::path cassette_path);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  Provider& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
  Cassette cassette_;
};

struct HttpConfig {
  /// Full URL of an OpenAI-compatible chat-completions endpoint.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
};

/// Reads SAFEDIT_ENDPOINT and SAFEDIT_API_KEY over the defaults.
HttpConfig http_config_from_env();

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpConfig config);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  ChatResponse attempt(const ChatRequest& request) const;

  HttpConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace safedit::provider
