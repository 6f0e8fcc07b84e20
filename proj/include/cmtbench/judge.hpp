#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmtbench/corpus.hpp"
#include "cmtbench/jsonl.hpp"
#include "cmtbench/llm_client.hpp"
#include "cmtbench/runner.hpp"

namespace cmtbench {

enum class Verdict { BaselineBetter, CMTBetter, Tie };

std::string_view to_string(Verdict verdict);  // "baseline", "cmt", "tie"
Verdict parse_verdict(std::string_view text);

// Which response the judge saw first. Unblinded prompts always show the
// baseline first, under its own label.
enum class Presentation { BaselineFirst, CmtFirst };

std::string_view to_string(Presentation order);
Presentation parse_presentation(std::string_view text);

struct BlindingOptions {
  bool enabled = false;
  std::uint64_t seed = 0;
};

struct BlindingRecord {
  bool blinded = false;
  Presentation order = Presentation::BaselineFirst;

  friend bool operator==(const BlindingRecord&, const BlindingRecord&) = default;
};

// Deterministic per (seed, task, sample): the same options always yield the
// same presentation, so blinded runs stay reproducible and resumable.
BlindingRecord choose_presentation(const BlindingOptions& options, std::string_view task_id,
                                   int sample);

// Maps scores/verdicts between presented positions (A = first shown) and
// identities. Applying to_presented after to_identities is the identity.
struct ScorePair {
  int baseline = 0;
  int cmt = 0;
  friend bool operator==(const ScorePair&, const ScorePair&) = default;
};
std::pair<int, int> to_presented(const ScorePair& scores, Presentation order);
ScorePair to_identities(int first_score, int second_score, Presentation order);

struct CriterionScore {
  std::string criterion_name;
  int baseline_score = 0;  // 1..5
  int cmt_score = 0;       // 1..5
  std::string rationale;

  friend bool operator==(const CriterionScore&, const CriterionScore&) = default;
};

struct Judgment {
  std::string task_id;
  int sample = 0;
  std::vector<CriterionScore> criterion_scores;  // task criteria order
  Verdict verdict = Verdict::Tie;  // as stated by the judge, never derived from scores
  std::string judge_model_id;
  std::string raw_text;
  bool blinded = false;
  Presentation presentation_order = Presentation::BaselineFirst;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

// Throws std::invalid_argument if the judgment does not score each of the
// task's criteria exactly once with values in 1..5.
void validate_judgment(const Judgment& judgment, const Task& task);

// The evaluator prompt: task description, both responses, the task's three
// criteria and the three scoring instructions, followed by a machine-readable
// output-format section. Blinded prompts label the responses "Response A" and
// "Response B" in presentation order and never name either system.
std::string render_judge_prompt(const Task& task, const PairResult& pair,
                                 const BlindingRecord& presentation);

// Appended to the prompt when a reply could not be parsed.
inline constexpr std::string_view kFormatReminder =
    "\n\nRespond only in the specified format: three CRITERION lines followed by one VERDICT "
    "line.";

struct ParseError {
  enum class Kind { Empty, OutOfRange, MissingCriterion, MissingVerdict };
  Kind kind = Kind::Empty;
  std::string message;
  std::string raw_text;
};

std::string_view to_string(ParseError::Kind kind);

using ParseResult = std::variant<Judgment, ParseError>;

// Total over arbitrary text. Tries the strict CRITERION/VERDICT block first,
// then a lenient scan for labelled score pairs and verdict keywords. Scores
// given by position are mapped back to identities when blinded. The result
// has task_id set and judge_model_id empty.
ParseResult parse_judgment(std::string_view raw, const Task& task,
                           const BlindingRecord& presentation);

// Strict-format rendering of a judgment, the inverse of parse_judgment.
std::string format_judgment(const Judgment& judgment, const Task& task);

struct JudgeConfig {
  std::string model_id;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  std::optional<int> max_output;
  BlindingOptions blinding;
};

// One judged (or failed) pair, as stored in the judgments log and consumed by
// aggregation.
struct JudgmentRecord {
  std::string model_pair;
  std::string task_id;
  int sample = 0;
  RecordStatus status = RecordStatus::Ok;
  std::optional<Judgment> judgment;  // set iff status is Ok
  std::string error;
  std::string raw_text;  // last judge reply, kept for failed records too
  int attempts = 0;      // judge calls made
  BlindingRecord presentation;
};

nlohmann::json to_json(const JudgmentRecord& record);
// Validates Judgment invariants on read; throws std::invalid_argument.
JudgmentRecord judgment_record_from_json(const nlohmann::json& value);

// Renders, calls the judge, parses; on a parse failure asks once more with
// kFormatReminder appended. Backend errors and persistent parse failures are
// returned as Failed records. Appends the record to `log` when given.
JudgmentRecord judge_pair(const JudgeConfig& config, const Task& task, const PairResult& pair,
                          Backend& backend, std::string_view model_pair,
                          JsonlAppender* log = nullptr);

struct JudgeOptions {
  std::filesystem::path output_dir = ".";
  int parallelism = 2;
  std::optional<std::size_t> limit;
  std::function<void(const JudgmentRecord&)> on_record;
};

struct JudgeReport {
  std::filesystem::path log_path;
  std::vector<JudgmentRecord> records;  // corpus order; includes failed pairs
  std::size_t executed = 0;
  std::size_t failed = 0;
};

RequestDigest judge_manifest_digest(const RequestDigest& results_manifest,
                                    const JudgeConfig& config);

std::filesystem::path judgments_log_path(const std::filesystem::path& dir,
                                         const RequestDigest& judge_manifest);

struct JudgmentsLog {
  nlohmann::json manifest;
  std::vector<JudgmentRecord> records;  // latest per (task, sample)
};

JudgmentsLog read_judgments_log(const std::filesystem::path& path);

// Judges every successful pair of a run that has no successful judgment yet.
// Failed pairs become Failed records without a judge call.
JudgeReport run_judging(const Corpus& corpus, const RunReport& run, const JudgeConfig& config,
                        Backend& backend, const JudgeOptions& options);

}  // namespace cmtbench
