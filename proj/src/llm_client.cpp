#include "cmtbench/llm_client.hpp"

#include <thread>

#include <nlohmann/json.hpp>

#include "cmtbench/digest.hpp"

namespace cmtbench {

using nlohmann::json;

void validate_request(const ChatRequest& request) {
  if (request.user_prompt.empty()) throw std::invalid_argument("user prompt must not be empty");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw std::invalid_argument("temperature must lie in [0, 2]");
  }
}

std::string canonical_request(const ChatRequest& request) {
  json form = json::array();
  form.push_back("cmtbench.request.v1");
  form.push_back(request.model_id);
  form.push_back(request.system_prompt ? json(*request.system_prompt) : json(nullptr));
  form.push_back(request.user_prompt);
  form.push_back(request.temperature);
  form.push_back(request.seed ? json(*request.seed) : json(nullptr));
  return form.dump();
}

RequestDigest digest_request(const ChatRequest& request) {
  return RequestDigest{sha256_hex(canonical_request(request))};
}

bool BackendError::retryable() const {
  switch (kind_) {
    case Kind::Connection:
    case Kind::Timeout:
      return true;
    case Kind::HttpStatus:
      return http_status_ == 429 || http_status_ >= 500;
    default:
      return false;
  }
}

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::Connection: return "connection";
    case BackendError::Kind::HttpStatus: return "http-status";
    case BackendError::Kind::Timeout: return "timeout";
    case BackendError::Kind::MissingContent: return "missing-content";
    case BackendError::Kind::ReplayMiss: return "replay-miss";
    case BackendError::Kind::NoScriptMatch: return "no-script-match";
    case BackendError::Kind::StoreIo: return "store-io";
  }
  return "?";
}

void RetryPolicy::pause(std::chrono::milliseconds delay) const {
  if (sleep) {
    sleep(delay);
  } else {
    std::this_thread::sleep_for(delay);
  }
}

ChatResponse complete_with_retry(const RetryPolicy& policy,
                                 const std::function<ChatResponse()>& attempt) {
  auto delay = policy.initial_backoff;
  for (int n = 1;; ++n) {
    try {
      return attempt();
    } catch (const BackendError& e) {
      if (!e.retryable() || n >= policy.max_attempts) throw;
    }
    policy.pause(delay);
    delay *= 2;
  }
}

// ---------------------------------------------------------------------------
// Replay store

namespace {

json response_entry(const ChatRequest& request, const RequestDigest& digest,
                    const ChatResponse& response) {
  json entry;
  entry["digest"] = digest.hex;
  entry["request"] = json::parse(canonical_request(request));
  entry["text"] = response.text;
  entry["prompt_tokens"] =
      response.prompt_token_count ? json(*response.prompt_token_count) : json(nullptr);
  entry["output_tokens"] =
      response.output_token_count ? json(*response.output_token_count) : json(nullptr);
  entry["latency_ms"] = response.latency.count();
  return entry;
}

std::optional<std::int64_t> optional_int(const json& entry, const char* key) {
  auto it = entry.find(key);
  if (it == entry.end() || it->is_null()) return std::nullopt;
  return it->get<std::int64_t>();
}

}  // namespace

ReplayStore::ReplayStore(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec)) return;
  try {
    for (const json& entry : read_jsonl(path_)) {
      ChatResponse response;
      response.text = entry.at("text").get<std::string>();
      response.prompt_token_count = optional_int(entry, "prompt_tokens");
      response.output_token_count = optional_int(entry, "output_tokens");
      response.latency = std::chrono::milliseconds(entry.value("latency_ms", 0));
      entries_.emplace(RequestDigest{entry.at("digest").get<std::string>()}, std::move(response));
    }
  } catch (const StoreError& e) {
    throw BackendError(BackendError::Kind::StoreIo, e.what());
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::StoreIo,
                       path_.string() + ": malformed store entry: " + e.what());
  }
}

std::optional<ChatResponse> ReplayStore::find(const RequestDigest& digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayStore::append(const ChatRequest& request, const ChatResponse& response) {
  const RequestDigest digest = digest_request(request);
  std::lock_guard lock(mutex_);
  try {
    if (!writer_) writer_ = std::make_unique<JsonlAppender>(path_);
    writer_->append(response_entry(request, digest, response));
  } catch (const StoreError& e) {
    throw BackendError(BackendError::Kind::StoreIo, e.what());
  }
  entries_.emplace(digest, response);
}

std::size_t ReplayStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<ReplayStore> store, std::string descriptor)
    : store_(std::move(store)), descriptor_(std::move(descriptor)) {}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  validate_request(request);
  const RequestDigest digest = digest_request(request);
  if (auto hit = store_->find(digest)) return *hit;
  throw BackendError(BackendError::Kind::ReplayMiss,
                     "replay miss: no stored response for request digest " + digest.hex);
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> live,
                                   std::shared_ptr<ReplayStore> store)
    : live_(std::move(live)), store_(std::move(store)) {}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
  validate_request(request);
  const RequestDigest digest = digest_request(request);
  if (auto hit = store_->find(digest)) return *hit;
  forwarded_.fetch_add(1);
  ChatResponse response = live_->complete(request);
  store_->append(request, response);
  return response;
}

std::unique_ptr<Backend> record(std::shared_ptr<Backend> live,
                                const std::filesystem::path& store) {
  return std::make_unique<RecordingBackend>(std::move(live),
                                            std::make_shared<ReplayStore>(store));
}

}  // namespace cmtbench
