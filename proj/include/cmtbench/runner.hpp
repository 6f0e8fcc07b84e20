#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmtbench/corpus.hpp"
#include "cmtbench/llm_client.hpp"
#include "cmtbench/prompting.hpp"

namespace cmtbench {

enum class RecordStatus { Ok, Failed };

std::string_view to_string(RecordStatus status);

// Baseline and CMT responses to one task (one sample of it).
struct PairResult {
  std::string task_id;
  int sample = 0;
  RecordStatus status = RecordStatus::Ok;
  std::string error;  // set when status is Failed
  ChatResponse baseline;
  ChatResponse cmt;
  std::string baseline_spec_name;
  std::string cmt_spec_name;
  std::string started_at;  // ISO-8601 UTC
  std::string finished_at;
};

// Everything that determines the results of a run. Written as the first
// line of the results log before any request is issued.
struct RunManifest {
  std::string corpus_digest;
  ModelSpec baseline;
  ModelSpec cmt;
  std::string backend;
  std::optional<std::int64_t> seed;
  int repeats = 1;
  int parallelism = 2;  // recorded, but excluded from the digest
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest run_manifest_from_json(const nlohmann::json& value);

// Digest over every manifest field except parallelism.
RequestDigest run_manifest_digest(const RunManifest& manifest);

nlohmann::json to_json(const PairResult& result);
PairResult pair_result_from_json(const nlohmann::json& value);

// Model pair label used in reports: the baseline's display name.
std::string model_pair_name(const RunManifest& manifest);

// Thrown when an existing results log belongs to a different configuration.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request seam between a task and a model configuration. The user prompt is
// the task prompt verbatim; only CMT specs carry a system prompt.
ChatRequest make_candidate_request(const ModelSpec& spec, const Task& task,
                                   std::optional<std::int64_t> seed,
                                   std::optional<int> max_output = std::nullopt);

// Seed used for a given sample: base + sample when a base seed is set,
// the sample index when repeating without one, otherwise none.
std::optional<std::int64_t> sample_seed(std::optional<std::int64_t> base, int repeats, int sample);

std::string iso8601_now();

struct RunOptions {
  std::filesystem::path output_dir = ".";
  int parallelism = 2;
  std::optional<std::int64_t> seed;
  int repeats = 1;
  std::optional<int> max_output;
  // Stop after starting this many new (task, sample) units. Used for partial
  // runs; a later call resumes where this one stopped.
  std::optional<std::size_t> limit;
  // Overrides backend.describe() in the manifest.
  std::optional<std::string> backend_descriptor;
  std::function<std::string()> clock = iso8601_now;
  std::function<void(const PairResult&)> on_result;
};

struct RunReport {
  RunManifest manifest;
  RequestDigest manifest_digest;
  std::filesystem::path log_path;
  // Latest record per (task, sample), in corpus order.
  std::vector<PairResult> results;
  std::size_t executed = 0;  // units run by this call
  std::size_t failed = 0;    // failed units among results
};

std::filesystem::path results_log_path(const std::filesystem::path& dir,
                                       const RequestDigest& manifest_digest);

struct ResultsLog {
  RunManifest manifest;
  RequestDigest manifest_digest;
  std::vector<PairResult> results;  // latest record per (task, sample), file order
};

// Throws StoreError on corruption, RunError if the manifest line is missing
// or its digest does not match its content.
ResultsLog read_results_log(const std::filesystem::path& path);

RunManifest make_run_manifest(const Corpus& corpus, const ModelSpec& baseline,
                              const ModelSpec& cmt, std::string backend_descriptor,
                              const RunOptions& options);

// Reads the results log of a configuration without running anything.
// Throws RunError when the log does not exist.
RunReport load_run_report(const Corpus& corpus, const RunManifest& manifest,
                          const std::filesystem::path& output_dir);

// Runs every (task, sample) not already completed in the results log for
// this configuration. Failed units are recorded and retried on the next call.
RunReport run_benchmark(const Corpus& corpus, const ModelSpec& baseline, const ModelSpec& cmt,
                        Backend& backend, const RunOptions& options);

// Runs fn(i) for i in [0, count) on up to `workers` threads. fn must be
// thread-safe; exceptions escaping fn are rethrown after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace cmtbench
