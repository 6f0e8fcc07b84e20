#include <chrono>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cmtbench/llm_client.hpp"

namespace cmtbench {

using nlohmann::json;

std::string_view to_string(WireProtocol protocol) {
  return protocol == WireProtocol::OpenAI ? "openai" : "ollama";
}

WireProtocol parse_wire_protocol(std::string_view text) {
  if (text == "ollama") return WireProtocol::Ollama;
  if (text == "openai") return WireProtocol::OpenAI;
  throw std::invalid_argument("unknown API style '" + std::string(text) +
                              "' (expected ollama or openai)");
}

std::string build_chat_body(WireProtocol protocol, const ChatRequest& request) {
  json messages = json::array();
  if (request.system_prompt) {
    messages.push_back({{"role", "system"}, {"content", *request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});

  json body;
  body["model"] = request.model_id;
  body["messages"] = std::move(messages);
  if (protocol == WireProtocol::Ollama) {
    body["stream"] = false;
    json options;
    options["temperature"] = request.temperature;
    if (request.seed) options["seed"] = *request.seed;
    if (request.max_output) options["num_predict"] = *request.max_output;
    body["options"] = std::move(options);
  } else {
    body["temperature"] = request.temperature;
    if (request.seed) body["seed"] = *request.seed;
    if (request.max_output) body["max_tokens"] = *request.max_output;
  }
  return body.dump();
}

namespace {

std::optional<std::int64_t> count_field(const json& object, const char* key) {
  if (!object.is_object()) return std::nullopt;
  auto it = object.find(key);
  if (it == object.end() || !it->is_number_integer()) return std::nullopt;
  return it->get<std::int64_t>();
}

BackendError missing(std::string_view detail) {
  return BackendError(BackendError::Kind::MissingContent,
                      "response missing content: " + std::string(detail));
}

}  // namespace

ChatResponse parse_chat_body(WireProtocol protocol, std::string_view body) {
  json root = json::parse(body, nullptr, false);
  if (root.is_discarded() || !root.is_object()) throw missing("body is not a JSON object");

  ChatResponse response;
  const json* message = nullptr;
  if (protocol == WireProtocol::Ollama) {
    auto it = root.find("message");
    if (it != root.end()) message = &*it;
    response.prompt_token_count = count_field(root, "prompt_eval_count");
    response.output_token_count = count_field(root, "eval_count");
  } else {
    auto choices = root.find("choices");
    if (choices == root.end() || !choices->is_array() || choices->empty()) {
      throw missing("no choices");
    }
    auto it = (*choices)[0].find("message");
    if (it != (*choices)[0].end()) message = &*it;
    if (auto usage = root.find("usage"); usage != root.end()) {
      response.prompt_token_count = count_field(*usage, "prompt_tokens");
      response.output_token_count = count_field(*usage, "completion_tokens");
    }
  }
  if (message == nullptr || !message->is_object()) throw missing("no message");
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) throw missing("no message content");
  response.text = content->get<std::string>();
  return response;
}

namespace {

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(EndpointConfig config) : config_(std::move(config)) {
    std::string url = config_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    const auto scheme_end = url.find("://");
    const auto path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
      origin_ = url;
    } else {
      origin_ = url.substr(0, path_start);
      path_prefix_ = url.substr(path_start);
    }
    endpoint_ = path_prefix_ + (config_.protocol == WireProtocol::Ollama ? "/api/chat"
                                                                         : "/v1/chat/completions");
  }

  ChatResponse complete(const ChatRequest& request) override {
    validate_request(request);
    return complete_with_retry(config_.retry, [&] { return attempt(request); });
  }

  std::string describe() const override {
    return std::string(to_string(config_.protocol)) + ":" + config_.base_url;
  }

 private:
  ChatResponse attempt(const ChatRequest& request) const {
    httplib::Client client(origin_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (config_.api_key && !config_.api_key->empty()) {
      headers.emplace("Authorization", "Bearer " + *config_.api_key);
    }

    const auto started = std::chrono::steady_clock::now();
    auto result =
        client.Post(endpoint_, headers, build_chat_body(config_.protocol, request),
                    "application/json");
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!result) {
      const auto error = result.error();
      const std::string what = describe() + ": " + httplib::to_string(error);
      if (error == httplib::Error::Read || error == httplib::Error::Write ||
          error == httplib::Error::ConnectionTimeout) {
        throw BackendError(BackendError::Kind::Timeout, what);
      }
      throw BackendError(BackendError::Kind::Connection, what);
    }
    if (result->status < 200 || result->status >= 300) {
      throw BackendError(BackendError::Kind::HttpStatus,
                         "HTTP " + std::to_string(result->status) + " from " + endpoint_ + ": " +
                             result->body.substr(0, 300),
                         result->status);
    }
    ChatResponse response = parse_chat_body(config_.protocol, result->body);
    response.latency = elapsed;
    return response;
  }

  EndpointConfig config_;
  std::string origin_;
  std::string path_prefix_;
  std::string endpoint_;
};

}  // namespace

std::unique_ptr<Backend> make_http_backend(EndpointConfig config) {
  return std::make_unique<HttpBackend>(std::move(config));
}

}  // namespace cmtbench
