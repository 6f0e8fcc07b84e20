// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include "aggregation_oracle.hpp"
#include "cmtbench/analysis.hpp"
#include "cmtbench/cli.hpp"
#include "cmtbench/judge.hpp"
#include "cmtbench/mockjudge.hpp"
#include "cmtbench/prompting.hpp"
#include "judge_cases.hpp"
#include "support.hpp"

using namespace cmtbench;
using namespace testsupport;

namespace {

// Thrown by expect(); the message becomes the FAIL detail.
struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

struct Skip {
  std::string why;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path only_file(const std::filesystem::path& dir, const std::string& prefix) {
  std::vector<std::filesystem::path> hits;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().filename().string().rfind(prefix, 0) == 0) hits.push_back(entry.path());
  }
  expect(hits.size() == 1, "expected one " + prefix + "* file in " + dir.string() + ", found " +
                               std::to_string(hits.size()));
  return hits[0];
}

Config scripted_config(const std::filesystem::path& output_dir) {
  Config config;
  config.pairs = {{"llama3.2:3b", "Llama3.2"}};
  config.mode = BackendMode::Scripted;
  config.script = source_dir() / "configs/scripts/constant-judge.json";
  config.output_dir = output_dir;
  return config;
}

std::string criterion1() {
  const auto start = Clock::now();
  const std::string golden = slurp(test_dir() / "golden/cmt_system_prompt.txt");
  expect(!golden.empty(), "golden file missing");
  expect(build_cmt_system_prompt() == golden, "system prompt differs from golden file");
  for (const char* needle :
       {"- Source Domain: The concrete or physical experience from which we draw metaphorical "
        "expressions.\n",
        "- Target Domain: The abstract concept we aim to understand through the source domain.\n",
        "1. Time is money:\n   - Source Domain: Money (a valuable resource)\n   - Target Domain: "
        "Time\n",
        "2. He has a heart of stone:\n   - Source Domain: Stone (hard and unfeeling)\n   - "
        "Target Domain: A person's heart (emotions)\n",
        "3. The world is a stage:\n   - Source Domain: Stage (platform for performances)\n   - "
        "Target Domain: The world/life\n"}) {
    expect(golden.find(needle) != std::string::npos,
           std::string("golden file lacks: ") + needle);
  }
  const Task task = fixture_task();
  const std::string prompt =
      render_judge_prompt(task, fixture_pair(task.id), {false, Presentation::BaselineFirst});
  for (const char* line :
       {"1. For each criterion, assign a score from 1 (poor) to 5 (excellent).\n",
        "2. Provide a short rationale for each score to justify your evaluation.\n",
        "3. Conclude which response is better overall (Baseline or CMT) or indicate a tie.\n"}) {
    expect(prompt.find(line) != std::string::npos, std::string("judge prompt lacks: ") + line);
  }
  const double t = seconds_since(start);
  expect(t < 1.0, "took " + std::to_string(t) + " s");
  return std::to_string(t) + " s";
}

std::string criterion2() {
  TempDir dir;
  const Config config = scripted_config(dir / "out");
  const auto start = Clock::now();
  Backends first = make_backends(config);
  std::ostringstream out, err;
  expect(cmd_all(config, out, err, first) == kExitOk, "first run failed: " + err.str());
  const double t = seconds_since(start);
  expect(t < 5.0, "took " + std::to_string(t) + " s");
  expect(seed_corpus().size() == 12, "seed corpus is not 12 tasks");
  const auto& calls_first = dynamic_cast<ScriptedBackend&>(*first.candidate);
  expect(calls_first.total_calls() == 36, "first run made " +
                                              std::to_string(calls_first.total_calls()) +
                                              " calls, expected 36");
  only_file(dir / "out", "results-");
  only_file(dir / "out", "judgments-");
  const std::string csv = slurp(dir / "out/summary.csv");
  expect(!csv.empty(), "no summary.csv");
  std::vector<std::string> charts;
  for (Category c : kAllCategories) {
    charts.push_back(slurp(dir / ("out/chart-" + std::string(to_string(c)) + ".svg")));
    expect(!charts.back().empty(), "missing chart for " + std::string(to_string(c)));
  }

  Backends second = make_backends(config);
  std::ostringstream out2, err2;
  expect(cmd_all(config, out2, err2, second) == kExitOk, "second run failed: " + err2.str());
  const auto& calls_second = dynamic_cast<ScriptedBackend&>(*second.candidate);
  expect(calls_second.total_calls() == 0,
         "second run made " + std::to_string(calls_second.total_calls()) + " calls");
  expect(slurp(dir / "out/summary.csv") == csv, "CSV changed on rerun");
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "out/chart-" + std::string(to_string(kAllCategories[i])) + ".svg";
    expect(slurp(dir / name) == charts[i], name + " changed on rerun");
  }
  return std::to_string(t) + " s, 36 then 0 calls";
}

std::string criterion3() {
  std::mt19937_64 rng(1234);
  const Corpus& corpus = seed_corpus();
  std::size_t judgments = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto records = random_records(rng, corpus, 200);
    judgments += records.size();
    const std::string diff =
        compare_summaries(aggregate(records, corpus), brute_force_aggregate(records, corpus));
    expect(diff.empty(), "set " + std::to_string(round) + ": " + diff);
  }
  auto records = random_records(rng, corpus, 200);
  while (records.size() < 150) records = random_records(rng, corpus, 200);
  const auto expected = aggregate(records, corpus);
  for (int i = 0; i < 100; ++i) {
    std::shuffle(records.begin(), records.end(), rng);
    expect(aggregate(records, corpus) == expected, "shuffle " + std::to_string(i) + " differs");
  }
  return "1000 sets, " + std::to_string(judgments) + " judgments, 100 shuffles";
}

std::string criterion4() {
  const Task task = fixture_task();
  std::mt19937_64 rng(4242);
  const BlindingRecord presentations[] = {kOpen, kBlindBaselineFirst, kBlindCmtFirst};
  std::size_t parsed = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string input = fuzz_input(rng);
    ParseResult r;
    try {
      r = parse_judgment(input, task, presentations[i % 3]);
    } catch (const std::exception& e) {
      throw Failure{"fuzz input " + std::to_string(i) + " threw: " + e.what()};
    }
    if (const auto* j = std::get_if<Judgment>(&r)) {
      ++parsed;
      validate_judgment(*j, task);
    } else {
      expect(std::get<ParseError>(r).raw_text == input, "ParseError lost the raw text");
    }
  }
  for (int i = 0; i < 1000; ++i) {
    Judgment j = random_judgment(rng);
    const std::string text = format_judgment(j, task);
    const ParseResult r = parse_judgment(text, task, {j.blinded, j.presentation_order});
    expect(std::holds_alternative<Judgment>(r), "round trip " + std::to_string(i) + " failed");
    j.raw_text = text;
    expect(std::get<Judgment>(r) == j, "round trip " + std::to_string(i) + " not identity");
  }
  const auto cases = curated_parse_cases();
  expect(cases.size() >= 20, "fewer than 20 curated cases");
  for (const ParseCase& c : cases) {
    const ParseResult r = parse_judgment(c.reply, task, c.presentation);
    if (c.error) {
      const auto* e = std::get_if<ParseError>(&r);
      expect(e != nullptr && e->kind == *c.error, "curated '" + c.name + "': wrong outcome");
      continue;
    }
    const auto* j = std::get_if<Judgment>(&r);
    expect(j != nullptr, "curated '" + c.name + "': did not parse");
    expect(j->verdict == c.verdict, "curated '" + c.name + "': wrong verdict");
    for (std::size_t k = 0; k < 3; ++k) {
      expect(j->criterion_scores[k].baseline_score == c.scores[k].first &&
                 j->criterion_scores[k].cmt_score == c.scores[k].second,
             "curated '" + c.name + "': wrong scores");
    }
  }
  return "10000 fuzzed (" + std::to_string(parsed) + " parsed), 1000 round trips, " +
         std::to_string(cases.size()) + " curated";
}

std::string criterion5() {
  TempDir dir;
  spit(dir / "corpus.json", serialize_corpus(bulk_corpus(100)));
  // The first-presented response always scores higher and wins.
  const nlohmann::json script = {
      {"rules",
       {{{"match", {{"prompt_contains", "expert evaluator"}}},
         {"reply",
          "CRITERION 1 | 5 | 2 | first is better\nCRITERION 2 | 4 | 1 | first is better\n"
          "CRITERION 3 | 5 | 3 | first is better\nVERDICT: A"}}}},
      {"fallback", "a candidate answer"}};
  spit(dir / "first-wins.json", script.dump());

  Config config = scripted_config(dir / "out");
  config.corpus = dir / "corpus.json";
  config.script = dir / "first-wins.json";
  config.blind = true;
  config.blind_seed = 2718;
  std::ostringstream out, err;
  expect(cmd_all(config, out, err) == kExitOk, "run failed: " + err.str());

  // Presentation log: the judgments file as written by the run.
  const JudgmentsLog log = read_judgments_log(only_file(dir / "out", "judgments-"));
  expect(log.records.size() == 100, "expected 100 judgments");
  int baseline_first = 0, cmt_first = 0;
  for (const JudgmentRecord& r : log.records) {
    expect(r.status == RecordStatus::Ok, r.task_id + " failed: " + r.error);
    expect(r.presentation.blinded, r.task_id + " not blinded");
    const BlindingRecord expected = choose_presentation({true, 2718}, r.task_id, r.sample);
    expect(r.presentation.order == expected.order, r.task_id + ": order differs from the seed");
    const bool bf = r.presentation.order == Presentation::BaselineFirst;
    (bf ? baseline_first : cmt_first)++;
    const Judgment& j = *r.judgment;
    expect(j.verdict == (bf ? Verdict::BaselineBetter : Verdict::CMTBetter),
           r.task_id + ": verdict not de-blinded");
    expect(j.criterion_scores[0].baseline_score == (bf ? 5 : 2) &&
               j.criterion_scores[0].cmt_score == (bf ? 2 : 5),
           r.task_id + ": scores not de-blinded");
  }
  expect(baseline_first > 0 && cmt_first > 0, "presentation orders are not randomized");

  std::size_t wins_baseline = 0, wins_cmt = 0, ties = 0;
  for (const CategorySummary& s : aggregate(log.records, load_corpus(config.corpus))) {
    wins_baseline += s.wins_baseline;
    wins_cmt += s.wins_cmt;
    ties += s.ties;
  }
  expect(wins_baseline == std::size_t(baseline_first) && wins_cmt == std::size_t(cmt_first) &&
             ties == 0,
         "wins " + std::to_string(wins_baseline) + "/" + std::to_string(wins_cmt) +
             " vs orders " + std::to_string(baseline_first) + "/" + std::to_string(cmt_first));
  return "baseline first " + std::to_string(baseline_first) + " = baseline wins, cmt first " +
         std::to_string(cmt_first) + " = cmt wins";
}

std::string criterion6() {
  std::string detail;
  const std::pair<int, std::size_t> shapes[] = {{100, 4}, {12, 1}, {7, 3}};
  for (const auto& [n, p] : shapes) {
    TempDir dir;
    spit(dir / "corpus.json", serialize_corpus(bulk_corpus(n)));
    Config config = scripted_config(dir / "out");
    apply_profile(config, "standard");
    config.pairs.resize(p);
    config.corpus = dir / "corpus.json";
    config.parallelism = 8;
    Backends backends = make_backends(config);
    const auto& counter = dynamic_cast<ScriptedBackend&>(*backends.candidate);
    std::ostringstream out, err;
    expect(cmd_all(config, out, err, backends) == kExitOk, "run failed: " + err.str());
    // Rule 0 answers the judge; rule 1 (CMT prompt) and the fallback answer candidates.
    const std::size_t candidate = counter.rule_calls(1) + counter.fallback_calls();
    const std::size_t judge = counter.rule_calls(0);
    const std::size_t want_candidate = 2 * std::size_t(n) * p, want_judge = std::size_t(n) * p;
    expect(candidate == want_candidate && judge == want_judge,
           "N=" + std::to_string(n) + " P=" + std::to_string(p) + ": " +
               std::to_string(candidate) + " + " + std::to_string(judge));
    if (detail.empty()) {
      detail = "N=" + std::to_string(n) + " P=" + std::to_string(p) + ": " +
               std::to_string(candidate) + " + " + std::to_string(judge);
    }
  }
  return detail;
}

// CMTBENCH_LIVE_URL enables this; CMTBENCH_LIVE_MODEL, CMTBENCH_LIVE_JUDGE,
// CMTBENCH_LIVE_PROTOCOL and CMTBENCH_LIVE_JUDGE_URL are optional.
std::string criterion7() {
  const auto url = process_env("CMTBENCH_LIVE_URL");
  if (!url) throw Skip{"set CMTBENCH_LIVE_URL to run"};
  TempDir dir;
  spit(dir / "corpus.json", serialize_corpus(Corpus{seed_corpus()[0]}));
  Config config;
  config.api_base = *url;
  if (auto protocol = process_env("CMTBENCH_LIVE_PROTOCOL")) {
    config.protocol = parse_wire_protocol(*protocol);
  }
  config.judge_api_base = process_env("CMTBENCH_LIVE_JUDGE_URL");
  config.api_key = process_env("CMTBENCH_API_KEY");
  const std::string model = process_env("CMTBENCH_LIVE_MODEL").value_or("llama3.2:3b");
  config.pairs = {{model, "Live"}};
  config.judge_model = process_env("CMTBENCH_LIVE_JUDGE").value_or(model);
  config.corpus = dir / "corpus.json";
  config.output_dir = dir / "out";
  config.parallelism = 1;
  std::ostringstream out, err;
  const int code = cmd_all(config, out, err);
  expect(code == kExitOk, "exit " + std::to_string(code) + ": " + err.str());
  const JudgmentsLog log = read_judgments_log(only_file(dir / "out", "judgments-"));
  expect(log.records.size() == 1 && log.records[0].judgment, "no parsed judgment");
  return "verdict " + std::string(to_string(log.records[0].judgment->verdict));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<std::string()>> criteria[] = {
      {"1 prompt fidelity", criterion1},
      {"2 deterministic end-to-end replay", criterion2},
      {"3 aggregation oracle equivalence", criterion3},
      {"4 parser totality and round trip", criterion4},
      {"5 blinding correctness", criterion5},
      {"6 request-count accounting", criterion6},
      {"7 live smoke", criterion7},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    try {
      const std::string detail = check();
      std::cout << "PASS " << name << " (" << detail << ")\n";
    } catch (const Skip& s) {
      std::cout << "SKIP " << name << " (" << s.why << ")\n";
    } catch (const Failure& f) {
      ++failures;
      std::cout << "FAIL " << name << ": " << f.what << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL " << name << ": exception: " << e.what() << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}
