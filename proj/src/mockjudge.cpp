#include "cmtbench/mockjudge.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cmtbench {

using nlohmann::json;

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0;
  std::size_t star = std::string_view::npos, resume = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      resume = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++resume;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

Script parse_script(std::string_view document) {
  json root = json::parse(document, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw std::invalid_argument("script must be a JSON object");
  }
  for (const auto& [key, unused] : root.items()) {
    if (key != "rules" && key != "fallback") {
      throw std::invalid_argument("unknown script key '" + key + "'");
    }
  }
  Script script;
  if (auto rules = root.find("rules"); rules != root.end()) {
    if (!rules->is_array()) throw std::invalid_argument("script 'rules' must be an array");
    for (std::size_t i = 0; i < rules->size(); ++i) {
      const json& item = (*rules)[i];
      const std::string where = "rules[" + std::to_string(i) + "]";
      if (!item.is_object() || !item.contains("reply") || !item["reply"].is_string()) {
        throw std::invalid_argument(where + " needs a string 'reply'");
      }
      for (const auto& [key, unused] : item.items()) {
        if (key != "match" && key != "reply") {
          throw std::invalid_argument(where + ": unknown key '" + key + "'");
        }
      }
      ScriptRule rule;
      rule.reply = item["reply"].get<std::string>();
      if (auto match = item.find("match"); match != item.end()) {
        if (!match->is_object()) throw std::invalid_argument(where + ".match must be an object");
        for (const auto& [key, unused] : match->items()) {
          if (key != "model_pattern" && key != "prompt_contains") {
            throw std::invalid_argument(where + ".match: unknown key '" + key + "'");
          }
        }
        if (auto it = match->find("model_pattern"); it != match->end()) {
          if (!it->is_string()) throw std::invalid_argument(where + ".match.model_pattern");
          rule.model_pattern = it->get<std::string>();
        }
        if (auto it = match->find("prompt_contains"); it != match->end()) {
          if (!it->is_string()) throw std::invalid_argument(where + ".match.prompt_contains");
          rule.prompt_contains = it->get<std::string>();
        }
      }
      script.rules.push_back(std::move(rule));
    }
  }
  if (auto fallback = root.find("fallback"); fallback != root.end() && !fallback->is_null()) {
    if (!fallback->is_string()) throw std::invalid_argument("script 'fallback' must be a string");
    script.fallback = fallback->get<std::string>();
  }
  return script;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read script " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_script(buffer.str());
}

namespace {

bool matches(const ScriptRule& rule, const ChatRequest& request) {
  if (rule.model_pattern && !glob_match(*rule.model_pattern, request.model_id)) return false;
  if (rule.prompt_contains) {
    const bool in_system =
        request.system_prompt &&
        request.system_prompt->find(*rule.prompt_contains) != std::string::npos;
    if (!in_system && request.user_prompt.find(*rule.prompt_contains) == std::string::npos) {
      return false;
    }
  }
  return true;
}

std::string expand(std::string reply, const ChatRequest& request) {
  static constexpr std::string_view kModel = "{{model}}";
  for (auto pos = reply.find(kModel); pos != std::string::npos;
       pos = reply.find(kModel, pos + request.model_id.size())) {
    reply.replace(pos, kModel.size(), request.model_id);
  }
  return reply;
}

}  // namespace

ScriptedBackend::ScriptedBackend(Script script, std::string descriptor)
    : script_(std::move(script)),
      descriptor_(std::move(descriptor)),
      rule_calls_(std::make_unique<std::atomic<std::size_t>[]>(script_.rules.size())) {}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  total_calls_.fetch_add(1);
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    if (matches(script_.rules[i], request)) {
      rule_calls_[i].fetch_add(1);
      return ChatResponse{expand(script_.rules[i].reply, request), std::nullopt, std::nullopt, {}};
    }
  }
  if (script_.fallback) {
    fallback_calls_.fetch_add(1);
    return ChatResponse{expand(*script_.fallback, request), std::nullopt, std::nullopt, {}};
  }
  throw BackendError(BackendError::Kind::NoScriptMatch,
                     "no script rule matches request for model '" + request.model_id + "'");
}

std::size_t ScriptedBackend::rule_calls(std::size_t rule_index) const {
  return rule_index < script_.rules.size() ? rule_calls_[rule_index].load() : 0;
}

std::shared_ptr<ScriptedBackend> scripted_backend(Script script, std::string descriptor) {
  if (script.rules.empty() && !script.fallback) {
    throw std::invalid_argument("script needs at least one rule or a fallback reply");
  }
  return std::make_shared<ScriptedBackend>(std::move(script), std::move(descriptor));
}

}  // namespace cmtbench
