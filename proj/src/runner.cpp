#include "cmtbench/runner.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "cmtbench/digest.hpp"
#include "cmtbench/jsonl.hpp"

namespace cmtbench {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(RecordStatus status) {
  return status == RecordStatus::Ok ? "ok" : "failed";
}

namespace {

RecordStatus parse_status(const std::string& text) {
  if (text == "ok") return RecordStatus::Ok;
  if (text == "failed") return RecordStatus::Failed;
  throw std::invalid_argument("unknown status '" + text + "'");
}

ordered_json spec_json(const ModelSpec& spec) {
  ordered_json out;
  out["base_model_id"] = spec.base_model_id;
  out["display_base"] = spec.display_base;
  out["display_name"] = spec.display_name;
  out["mode"] = std::string(to_string(spec.mode));
  out["temperature"] = spec.temperature;
  out["system_prompt_sha256"] =
      spec.system_prompt ? ordered_json(sha256_hex(*spec.system_prompt)) : ordered_json(nullptr);
  return out;
}

ModelSpec spec_from_json(const json& value) {
  ModelSpec spec;
  spec.base_model_id = value.at("base_model_id").get<std::string>();
  spec.display_base = value.at("display_base").get<std::string>();
  spec.display_name = value.at("display_name").get<std::string>();
  spec.mode = parse_prompting_mode(value.at("mode").get<std::string>());
  spec.temperature = value.at("temperature").get<double>();
  const json& prompt_sha = value.at("system_prompt_sha256");
  if (!prompt_sha.is_null()) {
    if (prompt_sha.get<std::string>() != sha256_hex(build_cmt_system_prompt())) {
      throw RunError("results log was produced with a different CMT system prompt");
    }
    spec.system_prompt = build_cmt_system_prompt();
  }
  return spec;
}

ordered_json digest_fields(const RunManifest& m) {
  ordered_json out;
  out["corpus_digest"] = m.corpus_digest;
  out["baseline"] = spec_json(m.baseline);
  out["cmt"] = spec_json(m.cmt);
  out["backend"] = m.backend;
  out["seed"] = m.seed ? ordered_json(*m.seed) : ordered_json(nullptr);
  out["repeats"] = m.repeats;
  return out;
}

json response_json(const ChatResponse& r) {
  json out;
  out["text"] = r.text;
  out["prompt_tokens"] = r.prompt_token_count ? json(*r.prompt_token_count) : json(nullptr);
  out["output_tokens"] = r.output_token_count ? json(*r.output_token_count) : json(nullptr);
  out["latency_ms"] = r.latency.count();
  return out;
}

ChatResponse response_from_json(const json& value) {
  ChatResponse r;
  r.text = value.at("text").get<std::string>();
  if (const json& p = value.at("prompt_tokens"); !p.is_null()) r.prompt_token_count = p.get<std::int64_t>();
  if (const json& o = value.at("output_tokens"); !o.is_null()) r.output_token_count = o.get<std::int64_t>();
  r.latency = std::chrono::milliseconds(value.value("latency_ms", 0));
  return r;
}

using UnitKey = std::pair<std::string, int>;

}  // namespace

json to_json(const RunManifest& manifest) {
  ordered_json out;
  out["type"] = "manifest";
  out["digest"] = run_manifest_digest(manifest).hex;
  const ordered_json fields = digest_fields(manifest);
  for (const auto& [key, value] : fields.items()) out[key] = value;
  out["parallelism"] = manifest.parallelism;
  return json::parse(out.dump());
}

RunManifest run_manifest_from_json(const json& value) {
  RunManifest m;
  m.corpus_digest = value.at("corpus_digest").get<std::string>();
  m.baseline = spec_from_json(value.at("baseline"));
  m.cmt = spec_from_json(value.at("cmt"));
  m.backend = value.at("backend").get<std::string>();
  if (const json& s = value.at("seed"); !s.is_null()) m.seed = s.get<std::int64_t>();
  m.repeats = value.at("repeats").get<int>();
  m.parallelism = value.value("parallelism", 2);
  return m;
}

RequestDigest run_manifest_digest(const RunManifest& manifest) {
  return RequestDigest{sha256_hex(digest_fields(manifest).dump())};
}

json to_json(const PairResult& r) {
  json out;
  out["type"] = "pair";
  out["task_id"] = r.task_id;
  out["sample"] = r.sample;
  out["status"] = std::string(to_string(r.status));
  out["error"] = r.error;
  out["baseline_spec"] = r.baseline_spec_name;
  out["cmt_spec"] = r.cmt_spec_name;
  out["baseline"] = response_json(r.baseline);
  out["cmt"] = response_json(r.cmt);
  out["started_at"] = r.started_at;
  out["finished_at"] = r.finished_at;
  return out;
}

PairResult pair_result_from_json(const json& value) {
  PairResult r;
  r.task_id = value.at("task_id").get<std::string>();
  r.sample = value.value("sample", 0);
  r.status = parse_status(value.at("status").get<std::string>());
  r.error = value.value("error", "");
  r.baseline_spec_name = value.at("baseline_spec").get<std::string>();
  r.cmt_spec_name = value.at("cmt_spec").get<std::string>();
  r.baseline = response_from_json(value.at("baseline"));
  r.cmt = response_from_json(value.at("cmt"));
  r.started_at = value.value("started_at", "");
  r.finished_at = value.value("finished_at", "");
  if (r.status == RecordStatus::Ok && (r.baseline.text.empty() || r.cmt.text.empty())) {
    throw std::invalid_argument("task '" + r.task_id + "': ok record with an empty response");
  }
  return r;
}

std::string model_pair_name(const RunManifest& manifest) { return manifest.baseline.display_name; }

ChatRequest make_candidate_request(const ModelSpec& spec, const Task& task,
                                   std::optional<std::int64_t> seed,
                                   std::optional<int> max_output) {
  ChatRequest request;
  request.model_id = spec.base_model_id;
  request.user_prompt = task.prompt_text;
  request.temperature = spec.temperature;
  request.seed = seed;
  request.max_output = max_output;
  if (spec.mode == PromptingMode::CMT) {
    request.system_prompt = build_cmt_system_prompt();
  } else if (spec.system_prompt) {
    throw std::logic_error("baseline spec '" + spec.display_name + "' carries a system prompt");
  }
  return request;
}

std::optional<std::int64_t> sample_seed(std::optional<std::int64_t> base, int repeats, int sample) {
  if (base) return *base + sample;
  if (repeats > 1) return sample;
  return std::nullopt;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[40];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%S", &utc);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buffer, static_cast<int>(millis));
  return out;
}

std::filesystem::path results_log_path(const std::filesystem::path& dir,
                                       const RequestDigest& manifest_digest) {
  return dir / ("results-" + std::string(manifest_digest.prefix()) + ".jsonl");
}

ResultsLog read_results_log(const std::filesystem::path& path) {
  const auto records = read_jsonl(path);
  if (records.empty() || records.front().value("type", "") != "manifest") {
    throw RunError(path.string() + ": first record is not a run manifest");
  }
  ResultsLog log;
  try {
    log.manifest = run_manifest_from_json(records.front());
    log.manifest_digest = run_manifest_digest(log.manifest);
    if (records.front().at("digest").get<std::string>() != log.manifest_digest.hex) {
      throw RunError(path.string() + ": manifest digest does not match its content");
    }
    std::map<UnitKey, std::size_t> index;
    for (std::size_t i = 1; i < records.size(); ++i) {
      if (records[i].value("type", "") != "pair") continue;
      PairResult r = pair_result_from_json(records[i]);
      UnitKey key{r.task_id, r.sample};
      if (auto it = index.find(key); it != index.end()) {
        log.results[it->second] = std::move(r);
      } else {
        index.emplace(std::move(key), log.results.size());
        log.results.push_back(std::move(r));
      }
    }
  } catch (const json::exception& e) {
    throw StoreError(path.string() + ": malformed record: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw StoreError(path.string() + ": " + e.what());
  }
  return log;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

RunManifest make_run_manifest(const Corpus& corpus, const ModelSpec& baseline,
                              const ModelSpec& cmt, std::string backend_descriptor,
                              const RunOptions& options) {
  RunManifest manifest;
  manifest.corpus_digest = corpus_digest(corpus);
  manifest.baseline = baseline;
  manifest.cmt = cmt;
  manifest.backend = std::move(backend_descriptor);
  manifest.seed = options.seed;
  manifest.repeats = options.repeats;
  manifest.parallelism = options.parallelism;
  return manifest;
}

RunReport load_run_report(const Corpus& corpus, const RunManifest& manifest,
                          const std::filesystem::path& output_dir) {
  RunReport report;
  report.manifest = manifest;
  report.manifest_digest = run_manifest_digest(manifest);
  report.log_path = results_log_path(output_dir, report.manifest_digest);
  std::error_code ec;
  if (!std::filesystem::exists(report.log_path, ec)) {
    throw RunError("no results log " + report.log_path.string() + " for " +
                   model_pair_name(manifest) + "; run the benchmark first");
  }
  ResultsLog log = read_results_log(report.log_path);
  if (log.manifest_digest != report.manifest_digest) {
    throw RunError(report.log_path.string() + " belongs to a different run configuration");
  }
  std::map<UnitKey, PairResult> by_key;
  for (PairResult& r : log.results) {
    UnitKey key{r.task_id, r.sample};
    by_key.insert_or_assign(std::move(key), std::move(r));
  }
  for (const Task& task : corpus) {
    for (int s = 0; s < manifest.repeats; ++s) {
      auto it = by_key.find({task.id, s});
      if (it == by_key.end()) continue;
      if (it->second.status == RecordStatus::Failed) ++report.failed;
      report.results.push_back(it->second);
    }
  }
  return report;
}

RunReport run_benchmark(const Corpus& corpus, const ModelSpec& baseline, const ModelSpec& cmt,
                        Backend& backend, const RunOptions& options) {
  validate_model_spec(baseline);
  validate_model_spec(cmt);
  if (baseline.mode != PromptingMode::Baseline || cmt.mode != PromptingMode::CMT) {
    throw std::invalid_argument("run_benchmark needs a baseline spec and a CMT spec");
  }
  if (options.repeats < 1) throw std::invalid_argument("repeats must be at least 1");

  RunReport report;
  report.manifest = make_run_manifest(corpus, baseline, cmt,
                                      options.backend_descriptor.value_or(backend.describe()),
                                      options);
  const RunManifest& manifest = report.manifest;
  report.manifest_digest = run_manifest_digest(manifest);
  report.log_path = results_log_path(options.output_dir, report.manifest_digest);

  std::map<UnitKey, PairResult> done;
  std::error_code ec;
  if (std::filesystem::exists(report.log_path, ec)) {
    repair_jsonl_tail(report.log_path);
    if (std::filesystem::file_size(report.log_path) > 0) {
      ResultsLog existing = read_results_log(report.log_path);
      if (existing.manifest_digest != report.manifest_digest) {
        throw RunError(report.log_path.string() + " belongs to a different run configuration");
      }
      for (PairResult& r : existing.results) {
        UnitKey key{r.task_id, r.sample};
        done.insert_or_assign(std::move(key), std::move(r));
      }
    }
  }

  JsonlAppender log(report.log_path);
  if (std::filesystem::file_size(report.log_path) == 0) log.append(to_json(manifest));

  struct Unit {
    const Task* task;
    int sample;
  };
  std::vector<Unit> pending;
  for (const Task& task : corpus) {
    for (int s = 0; s < options.repeats; ++s) {
      auto it = done.find({task.id, s});
      if (it == done.end() || it->second.status != RecordStatus::Ok) pending.push_back({&task, s});
    }
  }
  if (options.limit && pending.size() > *options.limit) pending.resize(*options.limit);

  std::mutex results_mutex;
  parallel_for(pending.size(), options.parallelism, [&](std::size_t i) {
    const Unit& unit = pending[i];
    PairResult r;
    r.task_id = unit.task->id;
    r.sample = unit.sample;
    r.baseline_spec_name = baseline.display_name;
    r.cmt_spec_name = cmt.display_name;
    r.started_at = options.clock();
    const auto seed = sample_seed(options.seed, options.repeats, unit.sample);
    try {
      r.baseline = backend.complete(make_candidate_request(baseline, *unit.task, seed,
                                                           options.max_output));
      if (r.baseline.text.empty()) throw BackendError(BackendError::Kind::MissingContent,
                                                      baseline.display_name + " returned empty text");
      r.cmt = backend.complete(make_candidate_request(cmt, *unit.task, seed, options.max_output));
      if (r.cmt.text.empty()) throw BackendError(BackendError::Kind::MissingContent,
                                                 cmt.display_name + " returned empty text");
    } catch (const BackendError& e) {
      if (e.kind() == BackendError::Kind::StoreIo) throw;
      r.status = RecordStatus::Failed;
      r.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    r.finished_at = options.clock();
    log.append(to_json(r));
    if (options.on_result) options.on_result(r);
    std::lock_guard lock(results_mutex);
    done.insert_or_assign(UnitKey{r.task_id, r.sample}, std::move(r));
  });
  report.executed = pending.size();

  for (const Task& task : corpus) {
    for (int s = 0; s < options.repeats; ++s) {
      auto it = done.find({task.id, s});
      if (it == done.end()) continue;
      if (it->second.status == RecordStatus::Failed) ++report.failed;
      report.results.push_back(it->second);
    }
  }
  return report;
}

}  // namespace cmtbench
