#include "cmtbench/prompting.hpp"

#include <stdexcept>

#include "cmt_system_prompt_asset.hpp"

namespace cmtbench {

std::string_view to_string(PromptingMode mode) {
  return mode == PromptingMode::CMT ? "cmt" : "baseline";
}

PromptingMode parse_prompting_mode(std::string_view text) {
  if (text == "cmt" || text == "CMT") return PromptingMode::CMT;
  if (text == "baseline" || text == "Baseline") return PromptingMode::Baseline;
  throw std::invalid_argument("unknown prompting mode '" + std::string(text) + "'");
}

const std::string& build_cmt_system_prompt() {
  static const std::string prompt(reinterpret_cast<const char*>(detail::kCmtSystemPrompt),
                                  detail::kCmtSystemPromptSize);
  return prompt;
}

ModelSpec make_model_spec(std::string_view base_model_id, std::string_view display_base,
                          PromptingMode mode, double baseline_temperature) {
  if (base_model_id.empty()) throw std::invalid_argument("model id must not be empty");
  ModelSpec spec;
  spec.base_model_id = std::string(base_model_id);
  spec.display_base = display_base.empty() ? spec.base_model_id : std::string(display_base);
  spec.mode = mode;
  if (mode == PromptingMode::CMT) {
    spec.temperature = kCmtTemperature;
    spec.system_prompt = build_cmt_system_prompt();
    spec.display_name = "CMT-" + spec.display_base;
  } else {
    spec.temperature = baseline_temperature;
    spec.display_name = spec.display_base;
  }
  validate_model_spec(spec);
  return spec;
}

void validate_model_spec(const ModelSpec& spec) {
  if (spec.base_model_id.empty()) throw std::invalid_argument("model id must not be empty");
  if (!(spec.temperature >= 0.0 && spec.temperature <= 2.0)) {
    throw std::invalid_argument("temperature must lie in [0, 2]");
  }
  if (spec.mode == PromptingMode::CMT) {
    if (spec.system_prompt != build_cmt_system_prompt()) {
      throw std::invalid_argument(spec.display_name + ": CMT spec must carry the CMT system prompt");
    }
    if (spec.temperature != kCmtTemperature) {
      throw std::invalid_argument(spec.display_name + ": CMT spec must use temperature 0.7");
    }
    if (spec.display_name != "CMT-" + spec.display_base) {
      throw std::invalid_argument("CMT display name must be \"CMT-\" + base display name");
    }
  } else if (spec.system_prompt) {
    throw std::invalid_argument(spec.display_name + ": baseline spec must not have a system prompt");
  }
}

std::string render_cmt_modelfile(std::optional<std::string_view> from_model) {
  std::string out = "PARAMETER temperature 0.7\n\nSYSTEM \"\"\"";
  out += build_cmt_system_prompt();
  out += "\"\"\"\n";
  if (from_model) {
    out += "\nFROM ";
    out += *from_model;
    out += "\n";
  }
  return out;
}

}  // namespace cmtbench
