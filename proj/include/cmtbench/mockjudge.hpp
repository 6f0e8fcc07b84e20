#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmtbench/llm_client.hpp"

namespace cmtbench {

// One scripted rule. All present predicates must hold for the rule to match.
struct ScriptRule {
  // Glob over the model id ('*' any run, '?' one character).
  std::optional<std::string> model_pattern;
  // Substring of the system prompt or the user prompt.
  std::optional<std::string> prompt_contains;
  // Reply text. "{{model}}" expands to the request's model id.
  std::string reply;
};

struct Script {
  std::vector<ScriptRule> rules;
  std::optional<std::string> fallback;
};

bool glob_match(std::string_view pattern, std::string_view text);

// Script document: {"rules": [{"match": {"model_pattern"?, "prompt_contains"?},
// "reply": text}], "fallback"?: text}. Unknown keys are rejected. Throws
// std::invalid_argument.
Script parse_script(std::string_view document);
Script load_script(const std::filesystem::path& path);

// Deterministic backend answering from a Script, first matching rule wins.
// Call counters are updated atomically.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(Script script, std::string descriptor = "scripted");

  ChatResponse complete(const ChatRequest& request) override;
  std::string describe() const override { return descriptor_; }

  std::size_t rule_calls(std::size_t rule_index) const;
  std::size_t fallback_calls() const { return fallback_calls_.load(); }
  std::size_t total_calls() const { return total_calls_.load(); }
  const Script& script() const { return script_; }

 private:
  Script script_;
  std::string descriptor_;
  std::unique_ptr<std::atomic<std::size_t>[]> rule_calls_;
  std::atomic<std::size_t> fallback_calls_{0};
  std::atomic<std::size_t> total_calls_{0};
};

// Throws std::invalid_argument when the script has neither rules nor fallback.
std::shared_ptr<ScriptedBackend> scripted_backend(Script script,
                                                  std::string descriptor = "scripted");

}  // namespace cmtbench
