#include <map>
#include <mutex>
#include <set>

#include "cmtbench/digest.hpp"
#include "cmtbench/judge.hpp"

namespace cmtbench {

using nlohmann::json;
using nlohmann::ordered_json;

json to_json(const JudgmentRecord& record) {
  json out;
  out["type"] = "judgment";
  out["model_pair"] = record.model_pair;
  out["task_id"] = record.task_id;
  out["sample"] = record.sample;
  out["status"] = std::string(to_string(record.status));
  out["error"] = record.error;
  out["attempts"] = record.attempts;
  out["blinded"] = record.presentation.blinded;
  out["presentation_order"] = std::string(to_string(record.presentation.order));
  if (record.judgment) {
    const Judgment& j = *record.judgment;
    out["judge_model_id"] = j.judge_model_id;
    out["verdict"] = std::string(to_string(j.verdict));
    json scores = json::array();
    for (const CriterionScore& s : j.criterion_scores) {
      scores.push_back({{"criterion", s.criterion_name},
                        {"baseline", s.baseline_score},
                        {"cmt", s.cmt_score},
                        {"rationale", s.rationale}});
    }
    out["criterion_scores"] = std::move(scores);
  }
  out["raw_text"] = record.raw_text;
  return out;
}

JudgmentRecord judgment_record_from_json(const json& value) {
  JudgmentRecord r;
  try {
    r.model_pair = value.at("model_pair").get<std::string>();
    r.task_id = value.at("task_id").get<std::string>();
    r.sample = value.value("sample", 0);
    const std::string status = value.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw std::invalid_argument("bad status " + status);
    r.status = status == "ok" ? RecordStatus::Ok : RecordStatus::Failed;
    r.error = value.value("error", "");
    r.attempts = value.value("attempts", 0);
    r.raw_text = value.value("raw_text", "");
    r.presentation.blinded = value.value("blinded", false);
    r.presentation.order =
        parse_presentation(value.value("presentation_order", std::string("baseline_first")));
    if (r.status == RecordStatus::Ok) {
      Judgment j;
      j.task_id = r.task_id;
      j.sample = r.sample;
      j.judge_model_id = value.at("judge_model_id").get<std::string>();
      j.verdict = parse_verdict(value.at("verdict").get<std::string>());
      j.raw_text = r.raw_text;
      j.blinded = r.presentation.blinded;
      j.presentation_order = r.presentation.order;
      std::set<std::string> names;
      for (const json& s : value.at("criterion_scores")) {
        CriterionScore cs{s.at("criterion").get<std::string>(), s.at("baseline").get<int>(),
                          s.at("cmt").get<int>(), s.value("rationale", "")};
        if (cs.baseline_score < 1 || cs.baseline_score > 5 || cs.cmt_score < 1 ||
            cs.cmt_score > 5) {
          throw std::invalid_argument("score outside 1..5 for '" + cs.criterion_name + "'");
        }
        if (!names.insert(cs.criterion_name).second) {
          throw std::invalid_argument("criterion '" + cs.criterion_name + "' scored twice");
        }
        j.criterion_scores.push_back(std::move(cs));
      }
      if (j.criterion_scores.size() != kCriteriaPerTask) {
        throw std::invalid_argument("expected 3 criterion scores");
      }
      r.judgment = std::move(j);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed judgment record: ") + e.what());
  }
  return r;
}

JudgmentRecord judge_pair(const JudgeConfig& config, const Task& task, const PairResult& pair,
                          Backend& backend, std::string_view model_pair, JsonlAppender* log) {
  JudgmentRecord record;
  record.model_pair = std::string(model_pair);
  record.task_id = task.id;
  record.sample = pair.sample;
  record.presentation = choose_presentation(config.blinding, task.id, pair.sample);

  auto finish = [&]() -> JudgmentRecord {
    if (log) log->append(to_json(record));
    return record;
  };

  if (pair.status != RecordStatus::Ok) {
    record.status = RecordStatus::Failed;
    record.error = "pair failed: " + pair.error;
    return finish();
  }

  ChatRequest request;
  request.model_id = config.model_id;
  request.user_prompt = render_judge_prompt(task, pair, record.presentation);
  request.temperature = config.temperature;
  request.seed = config.seed;
  request.max_output = config.max_output;

  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) request.user_prompt += kFormatReminder;
    try {
      ++record.attempts;
      record.raw_text = backend.complete(request).text;
    } catch (const BackendError& e) {
      if (e.kind() == BackendError::Kind::StoreIo) throw;
      record.status = RecordStatus::Failed;
      record.error = std::string(to_string(e.kind())) + ": " + e.what();
      return finish();
    }
    ParseResult parsed = parse_judgment(record.raw_text, task, record.presentation);
    if (auto* judgment = std::get_if<Judgment>(&parsed)) {
      judgment->sample = pair.sample;
      judgment->judge_model_id = config.model_id;
      validate_judgment(*judgment, task);
      record.status = RecordStatus::Ok;
      record.error.clear();
      record.judgment = std::move(*judgment);
      return finish();
    }
    const ParseError& error = std::get<ParseError>(parsed);
    record.status = RecordStatus::Failed;
    record.error = "parse error (" + std::string(to_string(error.kind)) + "): " + error.message;
  }
  return finish();
}

RequestDigest judge_manifest_digest(const RequestDigest& results_manifest,
                                    const JudgeConfig& config) {
  ordered_json fields;
  fields["results_manifest"] = results_manifest.hex;
  fields["judge_model"] = config.model_id;
  fields["temperature"] = config.temperature;
  fields["seed"] = config.seed ? ordered_json(*config.seed) : ordered_json(nullptr);
  fields["blinded"] = config.blinding.enabled;
  fields["blind_seed"] = config.blinding.enabled ? ordered_json(config.blinding.seed)
                                                 : ordered_json(nullptr);
  return RequestDigest{sha256_hex(fields.dump())};
}

std::filesystem::path judgments_log_path(const std::filesystem::path& dir,
                                         const RequestDigest& judge_manifest) {
  return dir / ("judgments-" + std::string(judge_manifest.prefix()) + ".jsonl");
}

JudgmentsLog read_judgments_log(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path);
  if (lines.empty() || lines.front().value("type", "") != "judge_manifest") {
    throw RunError(path.string() + ": first record is not a judge manifest");
  }
  JudgmentsLog log;
  log.manifest = lines.front();
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].value("type", "") != "judgment") continue;
    JudgmentRecord r;
    try {
      r = judgment_record_from_json(lines[i]);
    } catch (const std::invalid_argument& e) {
      throw StoreError(path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
    std::pair<std::string, int> key{r.task_id, r.sample};
    if (auto it = index.find(key); it != index.end()) {
      log.records[it->second] = std::move(r);
    } else {
      index.emplace(std::move(key), log.records.size());
      log.records.push_back(std::move(r));
    }
  }
  return log;
}

JudgeReport run_judging(const Corpus& corpus, const RunReport& run, const JudgeConfig& config,
                        Backend& backend, const JudgeOptions& options) {
  if (config.model_id.empty()) throw std::invalid_argument("judge model id must not be empty");
  const std::string pair_name = model_pair_name(run.manifest);
  const RequestDigest digest = judge_manifest_digest(run.manifest_digest, config);

  JudgeReport report;
  report.log_path = judgments_log_path(options.output_dir, digest);

  using Key = std::pair<std::string, int>;
  std::map<Key, JudgmentRecord> done;
  std::error_code ec;
  if (std::filesystem::exists(report.log_path, ec)) {
    repair_jsonl_tail(report.log_path);
    if (std::filesystem::file_size(report.log_path) > 0) {
      JudgmentsLog existing = read_judgments_log(report.log_path);
      if (existing.manifest.value("digest", "") != digest.hex) {
        throw RunError(report.log_path.string() + " belongs to a different judge configuration");
      }
      for (JudgmentRecord& r : existing.records) {
        Key key{r.task_id, r.sample};
        done.insert_or_assign(std::move(key), std::move(r));
      }
    }
  }

  JsonlAppender log(report.log_path);
  if (std::filesystem::file_size(report.log_path) == 0) {
    json manifest;
    manifest["type"] = "judge_manifest";
    manifest["digest"] = digest.hex;
    manifest["results_manifest"] = run.manifest_digest.hex;
    manifest["model_pair"] = pair_name;
    manifest["judge_model"] = config.model_id;
    manifest["temperature"] = config.temperature;
    manifest["seed"] = config.seed ? json(*config.seed) : json(nullptr);
    manifest["blinded"] = config.blinding.enabled;
    manifest["blind_seed"] = config.blinding.seed;
    log.append(manifest);
  }

  std::map<std::string, const Task*> tasks;
  for (const Task& t : corpus) tasks.emplace(t.id, &t);

  std::vector<const PairResult*> pending;
  for (const PairResult& pair : run.results) {
    if (!tasks.contains(pair.task_id)) {
      throw std::invalid_argument("result for unknown task '" + pair.task_id + "'");
    }
    auto it = done.find({pair.task_id, pair.sample});
    if (it != done.end()) {
      if (it->second.status == RecordStatus::Ok) continue;
      // A failed pair that is already recorded as such needs no new record.
      if (pair.status != RecordStatus::Ok && it->second.error == "pair failed: " + pair.error) {
        continue;
      }
    }
    pending.push_back(&pair);
  }
  if (options.limit && pending.size() > *options.limit) pending.resize(*options.limit);

  std::mutex mutex;
  parallel_for(pending.size(), options.parallelism, [&](std::size_t i) {
    const PairResult& pair = *pending[i];
    JudgmentRecord r = judge_pair(config, *tasks.at(pair.task_id), pair, backend, pair_name, &log);
    if (options.on_record) options.on_record(r);
    std::lock_guard lock(mutex);
    done.insert_or_assign(Key{r.task_id, r.sample}, std::move(r));
  });
  report.executed = pending.size();

  for (const PairResult& pair : run.results) {
    auto it = done.find({pair.task_id, pair.sample});
    if (it == done.end()) continue;
    if (it->second.status != RecordStatus::Ok) ++report.failed;
    report.records.push_back(it->second);
  }
  return report;
}

}  // namespace cmtbench
