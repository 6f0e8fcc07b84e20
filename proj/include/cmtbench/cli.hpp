#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmtbench/corpus.hpp"
#include "cmtbench/llm_client.hpp"
#include "cmtbench/prompting.hpp"

namespace cmtbench {

// Process exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;  // validation or judgment failures
inline constexpr int kExitIo = 2;        // I/O or configuration errors

enum class BackendMode { Live, Record, Replay, Scripted };

std::string_view to_string(BackendMode mode);
BackendMode parse_backend_mode(std::string_view text);

struct ModelPairConfig {
  std::string model_id;      // endpoint tag, e.g. "phi3:3.8b"
  std::string display_name;  // e.g. "Phi3"; the CMT twin is "CMT-" + this

  friend bool operator==(const ModelPairConfig&, const ModelPairConfig&) = default;
};

struct Config {
  WireProtocol protocol = WireProtocol::Ollama;
  std::string api_base = "http://localhost:11434";
  std::optional<std::string> api_key;
  std::optional<std::string> judge_api_base;      // defaults to api_base
  std::optional<WireProtocol> judge_protocol;     // defaults to protocol
  std::filesystem::path corpus;                   // empty: bundled seed corpus
  std::vector<ModelPairConfig> pairs;
  std::string judge_model = "llama3.3:70b";
  double judge_temperature = 0.0;
  double baseline_temperature = kCmtTemperature;
  int parallelism = 2;
  bool blind = false;
  std::uint64_t blind_seed = 0;
  BackendMode mode = BackendMode::Live;
  std::filesystem::path store;   // record/replay store
  std::filesystem::path script;  // scripted mode
  std::filesystem::path output_dir = "out";
  std::optional<std::int64_t> seed;
  int repeats = 1;
  int timeout_s = 300;
  std::optional<int> max_output;
  std::optional<std::size_t> limit;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Named profiles. "standard" holds the four baseline/CMT model pairs and the 70B
// judge; "none" leaves the config untouched. Throws ConfigError otherwise.
void apply_profile(Config& config, std::string_view profile);

// Overlays the keys present in a config document. Unknown keys and ill-typed
// values throw ConfigError.
void apply_config_json(Config& config, const nlohmann::json& document);
void apply_config_file(Config& config, const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const char* name)>;
std::optional<std::string> process_env(const char* name);

// CMTBENCH_API_BASE and CMTBENCH_API_KEY.
void apply_environment(Config& config, const EnvLookup& env);

// "model" or "model=Display Name".
ModelPairConfig parse_pair(std::string_view text);

// Throws ConfigError naming the first problem. Pipeline commands need a
// non-empty pair list and the store or script their mode requires.
void validate_config(const Config& config, bool needs_pairs);

// Command-line overrides; unset fields leave lower-precedence settings alone.
struct ConfigOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> profile;
  std::optional<std::string> protocol;
  std::optional<std::string> api_base;
  std::optional<std::string> api_key;
  std::optional<std::string> judge_api_base;
  std::optional<std::string> judge_protocol;
  std::optional<std::string> corpus;
  std::vector<std::string> pairs;
  std::optional<std::string> judge_model;
  std::optional<double> judge_temperature;
  std::optional<double> baseline_temperature;
  std::optional<int> parallelism;
  bool blind = false;
  std::optional<std::uint64_t> blind_seed;
  std::optional<std::string> mode;
  std::optional<std::string> store;
  std::optional<std::string> script;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> seed;
  std::optional<int> repeats;
  std::optional<int> timeout_s;
  std::optional<int> max_output;
  std::optional<std::size_t> limit;
};

// Defaults < profile < config file (--config or CMTBENCH_CONFIG) < environment
// < overrides. The profile comes from the overrides, else the file, else "standard".
Config resolve_config(const ConfigOverrides& overrides, const EnvLookup& env);

struct Backends {
  std::shared_ptr<Backend> candidate;
  std::shared_ptr<Backend> judge;
};

// Builds candidate and judge backends for the configured mode. Record and
// replay share one store; scripted mode answers both from one script.
Backends make_backends(const Config& config);

Corpus configured_corpus(const Config& config);

int cmd_validate(const std::optional<std::filesystem::path>& corpus_path, std::ostream& out,
                 std::ostream& err);
int cmd_seed_corpus(const std::filesystem::path& path, std::ostream& out, std::ostream& err);
// Writes to `path`, or to `out` when path is empty.
int cmd_export_modelfile(PromptingMode mode, const std::optional<std::string>& from_model,
                         const std::filesystem::path& path, std::ostream& out,
                         std::ostream& err);

// Pipeline commands. `backends` replaces the configured ones when given.
int cmd_run(const Config& config, std::ostream& out, std::ostream& err,
            std::optional<Backends> backends = std::nullopt);
int cmd_judge(const Config& config, std::ostream& out, std::ostream& err,
              std::optional<Backends> backends = std::nullopt);
int cmd_report(const Config& config, std::ostream& out, std::ostream& err);
int cmd_all(const Config& config, std::ostream& out, std::ostream& err,
            std::optional<Backends> backends = std::nullopt);

// Full command-line entry point: parses args (argv[0] included), resolves
// configuration with precedence flags > environment > config file > profile,
// and dispatches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);

}  // namespace cmtbench
