#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmtbench/jsonl.hpp"

namespace cmtbench {

struct ChatRequest {
  std::string model_id;
  std::optional<std::string> system_prompt;
  std::string user_prompt;
  double temperature = 0.7;
  std::optional<std::int64_t> seed;
  std::optional<int> max_output;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

// Throws std::invalid_argument if the user prompt is empty or the
// temperature lies outside [0, 2].
void validate_request(const ChatRequest& request);

struct ChatResponse {
  std::string text;
  std::optional<std::int64_t> prompt_token_count;
  std::optional<std::int64_t> output_token_count;
  std::chrono::milliseconds latency{0};
};

// Canonical serialization of the fields that identify a request: model id,
// system prompt, user prompt, temperature and seed, in that fixed order.
std::string canonical_request(const ChatRequest& request);

struct RequestDigest {
  std::string hex;  // 64 lower-case hex characters

  std::string_view prefix(std::size_t n = 12) const {
    return std::string_view(hex).substr(0, n);
  }
  friend auto operator<=>(const RequestDigest&, const RequestDigest&) = default;
};

RequestDigest digest_request(const ChatRequest& request);

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    Connection,
    HttpStatus,
    Timeout,
    MissingContent,
    ReplayMiss,
    NoScriptMatch,
    StoreIo,
  };

  BackendError(Kind kind, const std::string& message, int http_status = 0)
      : std::runtime_error(message), kind_(kind), http_status_(http_status) {}

  Kind kind() const { return kind_; }
  int http_status() const { return http_status_; }

  // Connection errors, timeouts, 429 and 5xx statuses.
  bool retryable() const;

 private:
  Kind kind_;
  int http_status_;
};

std::string_view to_string(BackendError::Kind kind);

// A chat-completion provider. Implementations are safe for concurrent
// complete() calls.
class Backend {
 public:
  virtual ~Backend() = default;

  // Returns the reply or throws BackendError.
  virtual ChatResponse complete(const ChatRequest& request) = 0;

  // Short identity used in run manifests, e.g. "ollama:http://localhost:11434".
  virtual std::string describe() const = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubled after each failure
  // Replaceable for tests.
  std::function<void(std::chrono::milliseconds)> sleep;

  void pause(std::chrono::milliseconds delay) const;
};

// Runs attempt(), retrying retryable BackendErrors with exponential backoff.
// Non-retryable errors (replay miss, 4xx other than 429) surface immediately.
ChatResponse complete_with_retry(const RetryPolicy& policy,
                                 const std::function<ChatResponse()>& attempt);

enum class WireProtocol { Ollama, OpenAI };

std::string_view to_string(WireProtocol protocol);
WireProtocol parse_wire_protocol(std::string_view text);

struct EndpointConfig {
  WireProtocol protocol = WireProtocol::Ollama;
  std::string base_url = "http://localhost:11434";
  std::optional<std::string> api_key;
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
};

// Request body for the endpoint's chat API. Exposed for wire-format tests.
std::string build_chat_body(WireProtocol protocol, const ChatRequest& request);

// Extracts the reply from a response body; throws BackendError(MissingContent).
ChatResponse parse_chat_body(WireProtocol protocol, std::string_view body);

// HTTP backend for Ollama-style /api/chat or OpenAI-compatible
// /v1/chat/completions endpoints. Retries per the endpoint's policy.
std::unique_ptr<Backend> make_http_backend(EndpointConfig config);

// Digest-keyed response store on top of an append-only JSONL file. Each entry
// records the digest, the canonical request, the reply text and token counts.
class ReplayStore {
 public:
  // Loads existing entries (a missing file is an empty store). Throws
  // BackendError(StoreIo) on unreadable or corrupt files.
  explicit ReplayStore(std::filesystem::path path);

  std::optional<ChatResponse> find(const RequestDigest& digest) const;
  void append(const ChatRequest& request, const ChatResponse& response);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void open_writer();

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<RequestDigest, ChatResponse> entries_;
  std::unique_ptr<JsonlAppender> writer_;
};

// Answers only from the store; a miss throws BackendError(ReplayMiss) naming
// the digest.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::shared_ptr<ReplayStore> store, std::string descriptor = "replay");

  ChatResponse complete(const ChatRequest& request) override;
  std::string describe() const override { return descriptor_; }

 private:
  std::shared_ptr<ReplayStore> store_;
  std::string descriptor_;
};

// Serves hits from the store and forwards misses to the wrapped backend,
// appending each new reply to the store.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> live, std::shared_ptr<ReplayStore> store);

  ChatResponse complete(const ChatRequest& request) override;
  std::string describe() const override { return live_->describe(); }

  std::size_t forwarded() const { return forwarded_.load(); }

 private:
  std::shared_ptr<Backend> live_;
  std::shared_ptr<ReplayStore> store_;
  std::atomic<std::size_t> forwarded_{0};
};

// Opens a store file and wraps a live backend for recording.
std::unique_ptr<Backend> record(std::shared_ptr<Backend> live, const std::filesystem::path& store);

// Counts calls passing through to the wrapped backend.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  ChatResponse complete(const ChatRequest& request) override {
    calls_.fetch_add(1);
    return inner_->complete(request);
  }
  std::string describe() const override { return inner_->describe(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace cmtbench
