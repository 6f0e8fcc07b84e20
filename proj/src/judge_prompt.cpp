#include <stdexcept>

#include "cmtbench/digest.hpp"
#include "cmtbench/judge.hpp"

namespace cmtbench {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::BaselineBetter: return "baseline";
    case Verdict::CMTBetter: return "cmt";
    case Verdict::Tie: return "tie";
  }
  return "?";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "baseline") return Verdict::BaselineBetter;
  if (text == "cmt") return Verdict::CMTBetter;
  if (text == "tie") return Verdict::Tie;
  throw std::invalid_argument("unknown verdict '" + std::string(text) + "'");
}

std::string_view to_string(Presentation order) {
  return order == Presentation::BaselineFirst ? "baseline_first" : "cmt_first";
}

Presentation parse_presentation(std::string_view text) {
  if (text == "baseline_first") return Presentation::BaselineFirst;
  if (text == "cmt_first") return Presentation::CmtFirst;
  throw std::invalid_argument("unknown presentation order '" + std::string(text) + "'");
}

BlindingRecord choose_presentation(const BlindingOptions& options, std::string_view task_id,
                                   int sample) {
  if (!options.enabled) return {};
  const std::string key = std::to_string(options.seed) + "\n" + std::string(task_id) + "\n" +
                          std::to_string(sample);
  const char nibble = sha256_hex(key).front();
  const int value = nibble <= '9' ? nibble - '0' : nibble - 'a' + 10;
  return {true, (value & 1) ? Presentation::CmtFirst : Presentation::BaselineFirst};
}

std::pair<int, int> to_presented(const ScorePair& scores, Presentation order) {
  if (order == Presentation::BaselineFirst) return {scores.baseline, scores.cmt};
  return {scores.cmt, scores.baseline};
}

ScorePair to_identities(int first_score, int second_score, Presentation order) {
  if (order == Presentation::BaselineFirst) return {first_score, second_score};
  return {second_score, first_score};
}

void validate_judgment(const Judgment& judgment, const Task& task) {
  if (judgment.criterion_scores.size() != task.criteria.size()) {
    throw std::invalid_argument("judgment for '" + task.id + "' has " +
                                std::to_string(judgment.criterion_scores.size()) +
                                " criterion scores, expected " +
                                std::to_string(task.criteria.size()));
  }
  for (const Criterion& c : task.criteria) {
    std::size_t hits = 0;
    for (const CriterionScore& s : judgment.criterion_scores) {
      if (s.criterion_name == c.name) ++hits;
    }
    if (hits != 1) {
      throw std::invalid_argument("judgment for '" + task.id + "' scores criterion '" + c.name +
                                  "' " + std::to_string(hits) + " times");
    }
  }
  for (const CriterionScore& s : judgment.criterion_scores) {
    if (s.baseline_score < 1 || s.baseline_score > 5 || s.cmt_score < 1 || s.cmt_score > 5) {
      throw std::invalid_argument("judgment for '" + task.id + "': score outside 1..5 for '" +
                                  s.criterion_name + "'");
    }
  }
}

std::string render_judge_prompt(const Task& task, const PairResult& pair,
                                const BlindingRecord& presentation) {
  const bool blind = presentation.blinded;
  const bool baseline_first = presentation.order == Presentation::BaselineFirst;
  const std::string& first_text = baseline_first ? pair.baseline.text : pair.cmt.text;
  const std::string& second_text = baseline_first ? pair.cmt.text : pair.baseline.text;

  std::string out;
  if (blind) {
    out += "You are an expert evaluator. Your task is to assess two responses (Response A vs. "
           "Response B) based on specific evaluation criteria. Provide scores and a rationale for "
           "each criterion.\n\n";
  } else {
    out += "You are an expert evaluator. Your task is to assess two responses (Baseline vs. CMT) "
           "based on specific evaluation criteria. Provide scores and a rationale for each "
           "criterion.\n\n";
  }
  out += "Task Description:\n" + task.prompt_text + "\n\n";
  if (blind) {
    out += "Response A:\n" + first_text + "\n\n";
    out += "Response B:\n" + second_text + "\n\n";
  } else {
    out += "Baseline Model Response:\n" + pair.baseline.text + "\n\n";
    out += "CMT-prompted Model Response:\n" + pair.cmt.text + "\n\n";
  }
  out += "Evaluation Criteria:\n";
  for (const Criterion& c : task.criteria) out += "- " + c.name + "\n";
  out += "\nInstructions:\n";
  out += "1. For each criterion, assign a score from 1 (poor) to 5 (excellent).\n";
  out += "2. Provide a short rationale for each score to justify your evaluation.\n";
  if (blind) {
    out += "3. Conclude which response is better overall (Response A or Response B) or indicate "
           "a tie.\n";
  } else {
    out += "3. Conclude which response is better overall (Baseline or CMT) or indicate a tie.\n";
  }

  const std::string first_label = blind ? "Response A" : "Baseline";
  const std::string second_label = blind ? "Response B" : "CMT";
  out += "\nOutput format:\n";
  out += "End your reply with exactly the following lines: one CRITERION line per criterion, "
         "numbered in the order listed above, then one VERDICT line. Scores are whole numbers "
         "from 1 to 5.\n";
  for (std::size_t i = 1; i <= task.criteria.size(); ++i) {
    out += "CRITERION " + std::to_string(i) + " | <" + first_label + " score> | <" +
           second_label + " score> | <rationale>\n";
  }
  out += blind ? "VERDICT: A or B or TIE\n" : "VERDICT: BASELINE or CMT or TIE\n";
  return out;
}

std::string format_judgment(const Judgment& judgment, const Task& task) {
  std::string out;
  for (std::size_t i = 0; i < task.criteria.size(); ++i) {
    const CriterionScore* score = nullptr;
    for (const CriterionScore& s : judgment.criterion_scores) {
      if (s.criterion_name == task.criteria[i].name) score = &s;
    }
    if (score == nullptr) {
      throw std::invalid_argument("judgment lacks criterion '" + task.criteria[i].name + "'");
    }
    const auto [first, second] = to_presented({score->baseline_score, score->cmt_score},
                                              judgment.presentation_order);
    out += "CRITERION " + std::to_string(i + 1) + " | " + std::to_string(first) + " | " +
           std::to_string(second) + " | " + score->rationale + "\n";
  }
  std::string token;
  if (judgment.verdict == Verdict::Tie) {
    token = "TIE";
  } else if (!judgment.blinded) {
    token = judgment.verdict == Verdict::BaselineBetter ? "BASELINE" : "CMT";
  } else {
    const bool baseline_first = judgment.presentation_order == Presentation::BaselineFirst;
    const bool baseline_wins = judgment.verdict == Verdict::BaselineBetter;
    token = baseline_wins == baseline_first ? "A" : "B";
  }
  out += "VERDICT: " + token + "\n";
  return out;
}

}  // namespace cmtbench
