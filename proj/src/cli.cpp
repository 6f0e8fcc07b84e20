#include "cmtbench/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cmtbench/analysis.hpp"
#include "cmtbench/digest.hpp"
#include "cmtbench/jsonl.hpp"
#include "cmtbench/judge.hpp"
#include "cmtbench/mockjudge.hpp"
#include "cmtbench/runner.hpp"

namespace cmtbench {

using nlohmann::json;

std::string_view to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::Live: return "live";
    case BackendMode::Record: return "record";
    case BackendMode::Replay: return "replay";
    case BackendMode::Scripted: return "scripted";
  }
  return "live";
}

BackendMode parse_backend_mode(std::string_view text) {
  for (BackendMode m : {BackendMode::Live, BackendMode::Record, BackendMode::Replay,
                        BackendMode::Scripted}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected live, record, replay or scripted)");
}

void apply_profile(Config& config, std::string_view profile) {
  if (profile == "none") return;
  if (profile != "standard") throw ConfigError("unknown profile '" + std::string(profile) + "'");
  config.pairs = {{"llama3.2:3b", "Llama3.2"},
                  {"phi3:3.8b", "Phi3"},
                  {"gemma2:2b", "Gemma2"},
                  {"mistral:7b", "Mistral"}};
  config.judge_model = "llama3.3:70b";
}

namespace {

template <typename T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

WireProtocol protocol_from(const std::string& text) {
  try {
    return parse_wire_protocol(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw StoreError("cannot write " + path.string());
}

}  // namespace

void apply_config_json(Config& config, const json& document) {
  if (!document.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& [key, value] : document.items()) {
    if (key == "profile") {
      // Resolved before the document is applied.
    } else if (key == "protocol") {
      config.protocol = protocol_from(get_as<std::string>(value, key));
    } else if (key == "api_base") {
      config.api_base = get_as<std::string>(value, key);
    } else if (key == "api_key") {
      config.api_key = get_as<std::string>(value, key);
    } else if (key == "judge_api_base") {
      config.judge_api_base = get_as<std::string>(value, key);
    } else if (key == "judge_protocol") {
      config.judge_protocol = protocol_from(get_as<std::string>(value, key));
    } else if (key == "corpus") {
      config.corpus = get_as<std::string>(value, key);
    } else if (key == "pairs") {
      if (!value.is_array()) throw ConfigError("config key 'pairs' must be an array");
      config.pairs.clear();
      for (const json& p : value) {
        if (!p.is_object() || !p.contains("model")) {
          throw ConfigError("each pair needs a \"model\" and an optional \"display\"");
        }
        ModelPairConfig pair;
        pair.model_id = get_as<std::string>(p.at("model"), "pairs.model");
        pair.display_name = p.contains("display")
                                ? get_as<std::string>(p.at("display"), "pairs.display")
                                : pair.model_id;
        config.pairs.push_back(std::move(pair));
      }
    } else if (key == "judge_model") {
      config.judge_model = get_as<std::string>(value, key);
    } else if (key == "judge_temperature") {
      config.judge_temperature = get_as<double>(value, key);
    } else if (key == "baseline_temperature") {
      config.baseline_temperature = get_as<double>(value, key);
    } else if (key == "parallelism") {
      config.parallelism = get_as<int>(value, key);
    } else if (key == "blind") {
      config.blind = get_as<bool>(value, key);
    } else if (key == "blind_seed") {
      config.blind_seed = get_as<std::uint64_t>(value, key);
    } else if (key == "mode") {
      config.mode = parse_backend_mode(get_as<std::string>(value, key));
    } else if (key == "store") {
      config.store = get_as<std::string>(value, key);
    } else if (key == "script") {
      config.script = get_as<std::string>(value, key);
    } else if (key == "output_dir") {
      config.output_dir = get_as<std::string>(value, key);
    } else if (key == "seed") {
      if (value.is_null()) config.seed.reset();
      else config.seed = get_as<std::int64_t>(value, key);
    } else if (key == "repeats") {
      config.repeats = get_as<int>(value, key);
    } else if (key == "timeout_s") {
      config.timeout_s = get_as<int>(value, key);
    } else if (key == "max_output") {
      if (value.is_null()) config.max_output.reset();
      else config.max_output = get_as<int>(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void apply_config_file(Config& config, const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    apply_config_json(config, document);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::optional<std::string> process_env(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

void apply_environment(Config& config, const EnvLookup& env) {
  if (auto base = env("CMTBENCH_API_BASE")) config.api_base = *base;
  if (auto key = env("CMTBENCH_API_KEY")) config.api_key = *key;
}

ModelPairConfig parse_pair(std::string_view text) {
  const auto eq = text.find('=');
  ModelPairConfig pair;
  pair.model_id = std::string(text.substr(0, eq));
  pair.display_name = eq == std::string_view::npos ? pair.model_id : std::string(text.substr(eq + 1));
  if (pair.model_id.empty() || pair.display_name.empty()) {
    throw ConfigError("bad pair '" + std::string(text) + "' (expected model or model=Display)");
  }
  return pair;
}

void validate_config(const Config& config, bool needs_pairs) {
  if (needs_pairs && config.pairs.empty()) throw ConfigError("no model pairs configured");
  std::vector<std::string> names;
  for (const ModelPairConfig& p : config.pairs) {
    if (p.model_id.empty() || p.display_name.empty()) {
      throw ConfigError("model pairs need a model id and a display name");
    }
    if (std::find(names.begin(), names.end(), p.display_name) != names.end()) {
      throw ConfigError("duplicate model pair display name '" + p.display_name + "'");
    }
    names.push_back(p.display_name);
  }
  if (config.judge_model.empty()) throw ConfigError("judge model must not be empty");
  if (config.parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (config.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (config.timeout_s < 1) throw ConfigError("timeout must be at least 1 second");
  if (config.judge_temperature < 0.0 || config.judge_temperature > 2.0) {
    throw ConfigError("judge temperature must lie in [0, 2]");
  }
  if (config.baseline_temperature < 0.0 || config.baseline_temperature > 2.0) {
    throw ConfigError("baseline temperature must lie in [0, 2]");
  }
  if ((config.mode == BackendMode::Record || config.mode == BackendMode::Replay) &&
      config.store.empty()) {
    throw ConfigError(std::string(to_string(config.mode)) + " mode needs a store path");
  }
  if (config.mode == BackendMode::Scripted && config.script.empty()) {
    throw ConfigError("scripted mode needs a script path");
  }
}

namespace {

// Manifest identity of the candidate backend. Record and replay share the
// live descriptor so a recorded run can be replayed under the same manifest.
std::string backend_descriptor(const Config& config) {
  if (config.mode == BackendMode::Scripted) {
    return "scripted:" + sha256_hex(read_file(config.script)).substr(0, 12);
  }
  return std::string(to_string(config.protocol)) + ":" + config.api_base;
}

EndpointConfig endpoint(const Config& config, bool judge) {
  EndpointConfig e;
  e.protocol = judge ? config.judge_protocol.value_or(config.protocol) : config.protocol;
  e.base_url = judge ? config.judge_api_base.value_or(config.api_base) : config.api_base;
  e.api_key = config.api_key;
  e.timeout = std::chrono::seconds(config.timeout_s);
  return e;
}

std::string endpoint_descriptor(const EndpointConfig& e) {
  return std::string(to_string(e.protocol)) + ":" + e.base_url;
}

}  // namespace

Backends make_backends(const Config& config) {
  switch (config.mode) {
    case BackendMode::Live:
      return {std::shared_ptr<Backend>(make_http_backend(endpoint(config, false))),
              std::shared_ptr<Backend>(make_http_backend(endpoint(config, true)))};
    case BackendMode::Record: {
      auto store = std::make_shared<ReplayStore>(config.store);
      return {std::make_shared<RecordingBackend>(
                  std::shared_ptr<Backend>(make_http_backend(endpoint(config, false))), store),
              std::make_shared<RecordingBackend>(
                  std::shared_ptr<Backend>(make_http_backend(endpoint(config, true))), store)};
    }
    case BackendMode::Replay: {
      auto store = std::make_shared<ReplayStore>(config.store);
      return {std::make_shared<ReplayBackend>(store, endpoint_descriptor(endpoint(config, false))),
              std::make_shared<ReplayBackend>(store, endpoint_descriptor(endpoint(config, true)))};
    }
    case BackendMode::Scripted: {
      std::string text = read_file(config.script);
      try {
        auto backend =
            scripted_backend(parse_script(text), "scripted:" + sha256_hex(text).substr(0, 12));
        return {backend, backend};
      } catch (const std::invalid_argument& e) {
        throw ConfigError(config.script.string() + ": " + e.what());
      }
    }
  }
  throw ConfigError("unknown backend mode");
}

Corpus configured_corpus(const Config& config) {
  if (config.corpus.empty()) return seed_corpus();
  return load_corpus(config.corpus);
}

namespace {

void print_corpus_error(const CorpusError& e, std::ostream& err) {
  if (e.diagnostics().empty()) err << "error: " << e.what() << "\n";
  for (const Diagnostic& d : e.diagnostics()) err << "error: " << d.to_string() << "\n";
}

// Maps exceptions to the exit-code contract.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const CorpusError& e) {
    print_corpus_error(e, err);
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const StoreError& e) {
    err << "store error: " << e.what() << "\n";
  } catch (const RunError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const BackendError& e) {
    err << "backend error (" << to_string(e.kind()) << "): " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitIo;
}

struct PairSpecs {
  ModelSpec baseline;
  ModelSpec cmt;
};

PairSpecs specs_for(const ModelPairConfig& pair, const Config& config) {
  return {make_model_spec(pair.model_id, pair.display_name, PromptingMode::Baseline,
                          config.baseline_temperature),
          make_model_spec(pair.model_id, pair.display_name, PromptingMode::CMT)};
}

RunOptions run_options(const Config& config, const std::string& descriptor) {
  RunOptions options;
  options.output_dir = config.output_dir;
  options.parallelism = config.parallelism;
  options.seed = config.seed;
  options.repeats = config.repeats;
  options.max_output = config.max_output;
  options.limit = config.limit;
  options.backend_descriptor = descriptor;
  return options;
}

JudgeConfig judge_config(const Config& config) {
  JudgeConfig j;
  j.model_id = config.judge_model;
  j.temperature = config.judge_temperature;
  j.seed = config.seed;
  j.max_output = config.max_output;
  j.blinding = {config.blind, config.blind_seed};
  return j;
}

RunReport existing_run(const Config& config, const Corpus& corpus, const ModelPairConfig& pair,
                       const std::string& descriptor) {
  const PairSpecs specs = specs_for(pair, config);
  const RunOptions options = run_options(config, descriptor);
  return load_run_report(
      corpus, make_run_manifest(corpus, specs.baseline, specs.cmt, descriptor, options),
      config.output_dir);
}

std::size_t run_stage(const Config& config, const Corpus& corpus, Backend& backend,
                      const std::string& descriptor, std::ostream& out, std::ostream& err) {
  std::size_t failed = 0;
  for (const ModelPairConfig& pair : config.pairs) {
    const PairSpecs specs = specs_for(pair, config);
    RunReport report =
        run_benchmark(corpus, specs.baseline, specs.cmt, backend, run_options(config, descriptor));
    out << "run " << pair.display_name << ": " << report.results.size() << " pairs, "
        << report.executed << " new, " << report.failed << " failed -> "
        << report.log_path.string() << "\n";
    for (const PairResult& r : report.results) {
      if (r.status == RecordStatus::Failed) {
        err << "  " << pair.display_name << " " << r.task_id << "#" << r.sample << ": " << r.error
            << "\n";
      }
    }
    failed += report.failed;
  }
  return failed;
}

std::size_t judge_stage(const Config& config, const Corpus& corpus, Backend& backend,
                        const std::string& descriptor, std::ostream& out, std::ostream& err) {
  std::size_t failed = 0;
  for (const ModelPairConfig& pair : config.pairs) {
    const RunReport run = existing_run(config, corpus, pair, descriptor);
    JudgeOptions options;
    options.output_dir = config.output_dir;
    options.parallelism = config.parallelism;
    options.limit = config.limit;
    JudgeReport report = run_judging(corpus, run, judge_config(config), backend, options);
    out << "judge " << pair.display_name << ": " << report.records.size() << " judgments, "
        << report.executed << " new, " << report.failed << " failed -> "
        << report.log_path.string() << "\n";
    for (const JudgmentRecord& r : report.records) {
      if (r.status == RecordStatus::Failed) {
        err << "  " << pair.display_name << " " << r.task_id << "#" << r.sample << ": " << r.error
            << "\n";
      }
    }
    failed += report.failed;
  }
  return failed;
}

std::size_t report_stage(const Config& config, const Corpus& corpus,
                         const std::string& descriptor, std::ostream& out) {
  std::vector<JudgmentRecord> records;
  const JudgeConfig judge = judge_config(config);
  for (const ModelPairConfig& pair : config.pairs) {
    const RunReport run = existing_run(config, corpus, pair, descriptor);
    const auto path =
        judgments_log_path(config.output_dir, judge_manifest_digest(run.manifest_digest, judge));
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      throw RunError("no judgments log " + path.string() + " for " + pair.display_name +
                     "; run the judge first");
    }
    JudgmentsLog log = read_judgments_log(path);
    for (JudgmentRecord& r : log.records) records.push_back(std::move(r));
  }
  const std::vector<CategorySummary> summaries = aggregate(records, corpus);
  if (summaries.empty()) throw RunError("nothing to report: no judgments recorded");
  emit_report(summaries, ReportFormat::Csv, config.output_dir / "summary.csv");
  emit_report(summaries, ReportFormat::Json, config.output_dir / "summary.json");
  const auto charts = emit_charts(summaries, config.output_dir);
  out << "report: " << summaries.size() << " rows -> "
      << (config.output_dir / "summary.csv").string() << ", " << charts.size() << " charts\n";
  std::size_t failed = 0;
  for (const CategorySummary& s : summaries) failed += s.n_failed;
  return failed;
}

}  // namespace

int cmd_validate(const std::optional<std::filesystem::path>& corpus_path, std::ostream& out,
                 std::ostream& err) {
  try {
    const Corpus corpus = corpus_path ? load_corpus(*corpus_path) : seed_corpus();
    for (const Diagnostic& d : lint_corpus(corpus)) err << "warning: " << d.to_string() << "\n";
    out << (corpus_path ? corpus_path->string() : std::string("bundled seed corpus")) << ": "
        << corpus.size() << " tasks, valid\n";
    return kExitOk;
  } catch (const CorpusError& e) {
    print_corpus_error(e, err);
    const bool io = e.kind() == CorpusError::Kind::FileNotFound || e.kind() == CorpusError::Kind::Io;
    return io ? kExitIo : kExitFailures;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_seed_corpus(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    write_file(path, serialize_corpus(seed_corpus()));
    out << "wrote " << seed_corpus().size() << " tasks to " << path.string() << "\n";
    return kExitOk;
  });
}

int cmd_export_modelfile(PromptingMode mode, const std::optional<std::string>& from_model,
                         const std::filesystem::path& path, std::ostream& out,
                         std::ostream& err) {
  if (mode != PromptingMode::CMT) {
    err << "config error: only the cmt configuration has a Modelfile; baseline models run "
           "without a system prompt\n";
    return kExitIo;
  }
  return guarded(err, [&] {
    std::optional<std::string_view> from;
    if (from_model) from = *from_model;
    const std::string modelfile = render_cmt_modelfile(from);
    if (path.empty()) {
      out << modelfile;
    } else {
      write_file(path, modelfile);
    }
    return kExitOk;
  });
}

int cmd_run(const Config& config, std::ostream& out, std::ostream& err,
            std::optional<Backends> backends) {
  return guarded(err, [&] {
    validate_config(config, true);
    const Corpus corpus = configured_corpus(config);
    if (!backends) backends = make_backends(config);
    const std::size_t failed =
        run_stage(config, corpus, *backends->candidate, backends->candidate->describe(), out, err);
    return failed == 0 ? kExitOk : kExitFailures;
  });
}

int cmd_judge(const Config& config, std::ostream& out, std::ostream& err,
              std::optional<Backends> backends) {
  return guarded(err, [&] {
    validate_config(config, true);
    const Corpus corpus = configured_corpus(config);
    if (!backends) backends = make_backends(config);
    const std::size_t failed =
        judge_stage(config, corpus, *backends->judge, backends->candidate->describe(), out, err);
    return failed == 0 ? kExitOk : kExitFailures;
  });
}

int cmd_report(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate_config(config, true);
    const Corpus corpus = configured_corpus(config);
    const std::size_t failed = report_stage(config, corpus, backend_descriptor(config), out);
    if (failed > 0) err << failed << " failed judgments excluded from the means\n";
    return failed == 0 ? kExitOk : kExitFailures;
  });
}

int cmd_all(const Config& config, std::ostream& out, std::ostream& err,
            std::optional<Backends> backends) {
  return guarded(err, [&] {
    validate_config(config, true);
    const Corpus corpus = configured_corpus(config);
    if (!backends) backends = make_backends(config);
    const std::string descriptor = backends->candidate->describe();
    const std::size_t run_failed =
        run_stage(config, corpus, *backends->candidate, descriptor, out, err);
    const std::size_t judge_failed =
        judge_stage(config, corpus, *backends->judge, descriptor, out, err);
    report_stage(config, corpus, descriptor, out);
    if (run_failed + judge_failed > 0) {
      err << "completed with failures: " << run_failed << " candidate pairs, " << judge_failed
          << " judgments (failed pairs included); rerun to retry\n";
      return kExitFailures;
    }
    return kExitOk;
  });
}

namespace {


void add_pipeline_options(CLI::App& cmd, ConfigOverrides& f) {
  cmd.add_option("-c,--config", f.config_path, "Config file (JSON); also CMTBENCH_CONFIG");
  cmd.add_option("--profile", f.profile, "Base profile: standard (default) or none");
  cmd.add_option("--protocol", f.protocol, "Endpoint protocol: ollama or openai");
  cmd.add_option("--api-base", f.api_base, "Endpoint base URL; also CMTBENCH_API_BASE");
  cmd.add_option("--api-key", f.api_key, "Bearer token; also CMTBENCH_API_KEY");
  cmd.add_option("--judge-api-base", f.judge_api_base, "Judge endpoint base URL");
  cmd.add_option("--judge-protocol", f.judge_protocol, "Judge endpoint protocol");
  cmd.add_option("--corpus", f.corpus, "Corpus file (default: bundled seed corpus)");
  cmd.add_option("--pair", f.pairs, "Model pair as model=Display; repeatable");
  cmd.add_option("--judge-model", f.judge_model, "Judge model id");
  cmd.add_option("--judge-temperature", f.judge_temperature, "Judge sampling temperature");
  cmd.add_option("--baseline-temperature", f.baseline_temperature,
                 "Baseline sampling temperature");
  cmd.add_option("-j,--parallelism", f.parallelism, "Concurrent requests");
  cmd.add_flag("--blind", f.blind, "Hide system identities from the judge");
  cmd.add_option("--blind-seed", f.blind_seed, "Seed for blinded presentation order");
  cmd.add_option("--mode", f.mode, "Backend mode: live, record, replay or scripted");
  cmd.add_option("--store", f.store, "Replay store for record/replay modes");
  cmd.add_option("--script", f.script, "Script file for scripted mode");
  cmd.add_option("-o,--output", f.output_dir, "Output directory");
  cmd.add_option("--seed", f.seed, "Sampling seed");
  cmd.add_option("--repeats", f.repeats, "Samples per task");
  cmd.add_option("--timeout", f.timeout_s, "Request timeout in seconds");
  cmd.add_option("--max-output", f.max_output, "Maximum output tokens per reply");
  cmd.add_option("--limit", f.limit, "Stop after this many new units (partial run)");
}

}  // namespace

Config resolve_config(const ConfigOverrides& f, const EnvLookup& env) {
  Config config;
  std::optional<std::filesystem::path> file;
  if (f.config_path) file = *f.config_path;
  else if (auto path = env("CMTBENCH_CONFIG")) file = *path;

  json document;
  if (file) {
    const std::string text = read_file(*file);
    try {
      document = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  std::string profile = "standard";
  if (document.is_object() && document.contains("profile")) {
    profile = get_as<std::string>(document.at("profile"), "profile");
  }
  if (f.profile) profile = *f.profile;
  apply_profile(config, profile);
  if (file) {
    try {
      apply_config_json(config, document);
    } catch (const ConfigError& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  apply_environment(config, env);

  if (f.protocol) config.protocol = protocol_from(*f.protocol);
  if (f.api_base) config.api_base = *f.api_base;
  if (f.api_key) config.api_key = *f.api_key;
  if (f.judge_api_base) config.judge_api_base = *f.judge_api_base;
  if (f.judge_protocol) config.judge_protocol = protocol_from(*f.judge_protocol);
  if (f.corpus) config.corpus = *f.corpus;
  if (!f.pairs.empty()) {
    config.pairs.clear();
    for (const std::string& p : f.pairs) config.pairs.push_back(parse_pair(p));
  }
  if (f.judge_model) config.judge_model = *f.judge_model;
  if (f.judge_temperature) config.judge_temperature = *f.judge_temperature;
  if (f.baseline_temperature) config.baseline_temperature = *f.baseline_temperature;
  if (f.parallelism) config.parallelism = *f.parallelism;
  if (f.blind) config.blind = true;
  if (f.blind_seed) config.blind_seed = *f.blind_seed;
  if (f.mode) config.mode = parse_backend_mode(*f.mode);
  if (f.store) config.store = *f.store;
  if (f.script) config.script = *f.script;
  if (f.output_dir) config.output_dir = *f.output_dir;
  if (f.seed) config.seed = *f.seed;
  if (f.repeats) config.repeats = *f.repeats;
  if (f.timeout_s) config.timeout_s = *f.timeout_s;
  if (f.max_output) config.max_output = *f.max_output;
  if (f.limit) config.limit = *f.limit;
  return config;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
  CLI::App app{"Benchmark harness comparing baseline and CMT-prompted language models"};
  app.require_subcommand(1);
  app.name("cmtbench");
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  std::optional<std::string> validate_path;
  auto* validate = app.add_subcommand("validate", "Check a corpus file (default: bundled)");
  validate->add_option("corpus", validate_path, "Corpus file");

  std::string seed_path;
  auto* seed_cmd = app.add_subcommand("seed-corpus", "Write the bundled seed corpus to a file");
  seed_cmd->add_option("path", seed_path, "Destination file")->required();

  std::string export_mode = "cmt";
  std::optional<std::string> export_from;
  std::string export_path;
  auto* export_cmd =
      app.add_subcommand("export-modelfile", "Print the CMT configuration as a Modelfile");
  export_cmd->add_option("--mode", export_mode, "Prompting mode (only cmt has a Modelfile)");
  export_cmd->add_option("--from", export_from, "Append a FROM line for this base model");
  export_cmd->add_option("-o,--output", export_path, "Destination file (default: stdout)");

  ConfigOverrides flags;
  auto* run = app.add_subcommand("run", "Collect baseline and CMT responses");
  auto* judge = app.add_subcommand("judge", "Judge collected response pairs");
  auto* report = app.add_subcommand("report", "Aggregate judgments into CSV, JSON and charts");
  auto* all = app.add_subcommand("all", "run, judge and report in one go");
  for (CLI::App* cmd : {run, judge, report, all}) add_pipeline_options(*cmd, flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitIo;
  }

  if (*validate) {
    return cmd_validate(validate_path ? std::optional<std::filesystem::path>(*validate_path)
                                      : std::nullopt,
                        out, err);
  }
  if (*seed_cmd) return cmd_seed_corpus(seed_path, out, err);
  if (*export_cmd) {
    PromptingMode mode;
    try {
      mode = parse_prompting_mode(export_mode);
    } catch (const std::exception& e) {
      err << "config error: " << e.what() << "\n";
      return kExitIo;
    }
    return cmd_export_modelfile(mode, export_from, export_path, out, err);
  }

  Config config;
  if (int code = guarded(err, [&] {
        config = resolve_config(flags, env);
        return kExitOk;
      });
      code != kExitOk) {
    return code;
  }
  if (*run) return cmd_run(config, out, err);
  if (*judge) return cmd_judge(config, out, err);
  if (*report) return cmd_report(config, out, err);
  return cmd_all(config, out, err);
}

}  // namespace cmtbench
