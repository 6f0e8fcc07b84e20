#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cmtbench {

enum class PromptingMode { Baseline, CMT };

std::string_view to_string(PromptingMode mode);
PromptingMode parse_prompting_mode(std::string_view text);

// Sampling temperature of the CMT configuration.
inline constexpr double kCmtTemperature = 0.7;

struct ModelSpec {
  std::string base_model_id;  // endpoint model tag, e.g. "llama3.2:3b"
  std::string display_base;   // e.g. "Llama3.2"
  PromptingMode mode = PromptingMode::Baseline;
  double temperature = kCmtTemperature;
  std::optional<std::string> system_prompt;
  std::string display_name;  // "Llama3.2" or "CMT-Llama3.2"

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// The CMT system message followed by the three worked source/target mapping
// examples. Byte-identical on every call.
const std::string& build_cmt_system_prompt();

// CMT mode always uses kCmtTemperature and the CMT system prompt. Baseline
// mode carries no system prompt and uses baseline_temperature.
// Throws std::invalid_argument on an empty model id or a temperature
// outside [0, 2].
ModelSpec make_model_spec(std::string_view base_model_id, std::string_view display_base,
                          PromptingMode mode, double baseline_temperature = kCmtTemperature);

// Throws std::invalid_argument naming the first violated invariant.
void validate_model_spec(const ModelSpec& spec);

// Provider Modelfile rendering of the CMT configuration: the temperature
// PARAMETER line, then a SYSTEM block holding build_cmt_system_prompt().
// A FROM line is appended when from_model is given.
std::string render_cmt_modelfile(std::optional<std::string_view> from_model = std::nullopt);

}  // namespace cmtbench
