#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include "cmtbench/judge.hpp"

namespace cmtbench {

std::string_view to_string(ParseError::Kind kind) {
  switch (kind) {
    case ParseError::Kind::Empty: return "empty";
    case ParseError::Kind::OutOfRange: return "out-of-range";
    case ParseError::Kind::MissingCriterion: return "missing-criterion";
    case ParseError::Kind::MissingVerdict: return "missing-verdict";
  }
  return "?";
}

namespace {

// Positions in presentation order: 0 = first shown (baseline when unblinded).
enum class Slot { First, Second, Tie };

struct Collected {
  std::array<std::optional<int>, 2> scores;  // per slot
  std::string rationale;
  bool complete() const { return scores[0] && scores[1]; }
};

bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n'; }
bool is_alnum(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; }
bool is_digit(char ch) { return ch >= '0' && ch <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty() || s.size() > 12) return std::nullopt;
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool in_range(long long v) { return v >= 1 && v <= 5; }

bool word_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (text.compare(pos, word.size(), word) != 0) return false;
  if (pos > 0 && is_alnum(text[pos - 1])) return false;
  const std::size_t end = pos + word.size();
  return end >= text.size() || !is_alnum(text[end]);
}

std::size_t find_word(std::string_view text, std::string_view word, std::size_t from = 0) {
  for (std::size_t pos = text.find(word, from); pos != std::string_view::npos;
       pos = text.find(word, pos + 1)) {
    if (word_at(text, pos, word)) return pos;
  }
  return std::string_view::npos;
}

bool contains_word(std::string_view text, std::string_view word) {
  return find_word(text, word) != std::string_view::npos;
}

// ---------------------------------------------------------------------------
// Strict pass

struct StrictLine {
  int index;
  long long first;
  long long second;
  std::string rationale;
};

std::optional<StrictLine> strict_criterion(std::string_view line) {
  line = trim(line);
  static constexpr std::string_view kPrefix = "CRITERION";
  if (line.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  std::array<std::string_view, 4> parts;
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t bar = line.find('|', start);
    if (bar == std::string_view::npos) return std::nullopt;
    parts[i] = line.substr(start, bar - start);
    start = bar + 1;
  }
  parts[3] = line.substr(start);
  std::string_view head = trim(parts[0].substr(kPrefix.size()));
  if (parts[0].size() == kPrefix.size() || !is_space(parts[0][kPrefix.size()])) return std::nullopt;
  auto index = parse_int(head);
  auto first = parse_int(parts[1]);
  auto second = parse_int(parts[2]);
  if (!index || !first || !second) return std::nullopt;
  return StrictLine{static_cast<int>(*index), *first, *second, std::string(trim(parts[3]))};
}

std::optional<Slot> strict_verdict(std::string_view line, bool blinded) {
  line = trim(line);
  static constexpr std::string_view kPrefix = "VERDICT:";
  if (line.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  const std::string_view token = trim(line.substr(kPrefix.size()));
  if (token == "TIE") return Slot::Tie;
  if (blinded) {
    if (token == "A") return Slot::First;
    if (token == "B") return Slot::Second;
  } else {
    if (token == "BASELINE") return Slot::First;
    if (token == "CMT") return Slot::Second;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Lenient pass

struct Number {
  std::size_t pos;
  std::size_t end;
  long long value;
  bool fractional;  // "4.5"
};

std::vector<Number> numbers_in(std::string_view text) {
  std::vector<Number> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i]) || (i > 0 && is_alnum(text[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    // A denominator such as the 5 in "4/5" is not a score.
    std::size_t k = i;
    while (k > 0 && text[k - 1] == ' ') --k;
    const bool denominator = k > 0 && text[k - 1] == '/';
    bool fractional = false;
    std::size_t end = j;
    if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
      fractional = true;
      end = j + 1;
      while (end < text.size() && is_digit(text[end])) ++end;
    }
    if (!denominator && j - i <= 9) {
      long long value = 0;
      std::from_chars(text.data() + i, text.data() + j, value);
      out.push_back({i, end, value, fractional});
    }
    i = end;
  }
  return out;
}

// Skips a "/5"-style denominator directly after a number.
std::size_t skip_denominator(std::string_view text, std::size_t pos) {
  std::size_t p = pos;
  while (p < text.size() && text[p] == ' ') ++p;
  if (p < text.size() && text[p] == '/') {
    ++p;
    while (p < text.size() && text[p] == ' ') ++p;
    while (p < text.size() && is_digit(text[p])) ++p;
    return p;
  }
  return pos;
}

struct Label {
  std::size_t pos;
  std::size_t end;
  Slot slot;
};

std::vector<Label> labels_in(std::string_view text, bool blinded) {
  std::vector<Label> out;
  if (blinded) {
    for (std::size_t pos = find_word(text, "response"); pos != std::string_view::npos;
         pos = find_word(text, "response", pos + 1)) {
      std::size_t p = pos + 8;
      while (p < text.size() && text[p] == ' ') ++p;
      if (p < text.size() && (text[p] == 'a' || text[p] == 'b') &&
          (p + 1 >= text.size() || !is_alnum(text[p + 1]))) {
        out.push_back({pos, p + 1, text[p] == 'a' ? Slot::First : Slot::Second});
      }
    }
    // Bare "A:" / "B:".
    for (std::size_t p = 0; p < text.size(); ++p) {
      if ((text[p] == 'a' || text[p] == 'b') && (p == 0 || !is_alnum(text[p - 1]))) {
        std::size_t q = p + 1;
        while (q < text.size() && text[q] == ' ') ++q;
        if (q < text.size() && (text[q] == ':' || text[q] == '=')) {
          const bool inside_response = std::any_of(out.begin(), out.end(), [&](const Label& l) {
            return p >= l.pos && p < l.end;
          });
          if (!inside_response) out.push_back({p, p + 1, text[p] == 'a' ? Slot::First : Slot::Second});
        }
      }
    }
  } else {
    for (std::size_t pos = find_word(text, "baseline"); pos != std::string_view::npos;
         pos = find_word(text, "baseline", pos + 1)) {
      out.push_back({pos, pos + 8, Slot::First});
    }
    for (std::size_t pos = find_word(text, "cmt"); pos != std::string_view::npos;
         pos = find_word(text, "cmt", pos + 1)) {
      out.push_back({pos, pos + 3, Slot::Second});
    }
  }
  std::sort(out.begin(), out.end(), [](const Label& a, const Label& b) { return a.pos < b.pos; });
  return out;
}

struct LabelledScore {
  Slot slot;
  long long value;
  bool fractional;
};

std::vector<LabelledScore> labelled_scores(std::string_view text, bool blinded) {
  std::vector<LabelledScore> out;
  const auto labels = labels_in(text, blinded);
  const auto numbers = numbers_in(text);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t window_end =
        std::min({labels[i].end + 40, text.size(),
                  i + 1 < labels.size() ? labels[i + 1].pos : text.size()});
    for (const Number& n : numbers) {
      if (n.pos < labels[i].end) continue;
      if (n.pos >= window_end) break;
      out.push_back({labels[i].slot, n.value, n.fractional});
      break;
    }
  }
  return out;
}

std::optional<std::pair<Number, Number>> pipe_pair(std::string_view text) {
  if (std::count(text.begin(), text.end(), '|') < 2) return std::nullopt;
  std::vector<Number> cells;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t bar = text.find('|', start);
    if (bar == std::string_view::npos) bar = text.size();
    const std::string_view cell = trim(text.substr(start, bar - start));
    const auto nums = numbers_in(cell);
    if (nums.size() == 1 && nums[0].pos == 0 && skip_denominator(cell, nums[0].end) == cell.size()) {
      cells.push_back(nums[0]);
    }
    start = bar + 1;
  }
  if (cells.size() < 2) return std::nullopt;
  return std::make_pair(cells[0], cells[1]);
}

std::optional<std::pair<Number, Number>> generic_pair(std::string_view text) {
  const auto numbers = numbers_in(text);
  for (std::size_t i = 0; i + 1 < numbers.size(); ++i) {
    // "criterion 2" and list numbering are not scores.
    const std::size_t before = numbers[i].pos;
    if (before >= 10 && text.substr(before - 10, 10) == "criterion ") continue;
    const std::size_t skipped = std::min(skip_denominator(text, numbers[i].end), numbers[i + 1].pos);
    std::string_view between = trim(text.substr(skipped, numbers[i + 1].pos - skipped));
    while (!between.empty() && between.back() == '(') between.remove_suffix(1);
    between = trim(between);
    static constexpr std::array<std::string_view, 10> kJoiners = {
        ",", "and", "vs", "vs.", "versus", "to", "-", "/", ";", "&"};
    if (std::find(kJoiners.begin(), kJoiners.end(), between) != kJoiners.end()) {
      return std::make_pair(numbers[i], numbers[i + 1]);
    }
  }
  return std::nullopt;
}

std::string strip_markup(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (char ch : line) {
    if (ch == '*' || ch == '`' || ch == '#') continue;
    out.push_back(ch);
  }
  return out;
}

// Removes leading bullets and list numbering ("- ", "1. ", "2) ").
std::string_view strip_bullet(std::string_view s, int* list_number) {
  s = trim(s);
  while (!s.empty() && (s.front() == '-' || s.front() == '>' || s.front() == '+')) {
    s.remove_prefix(1);
    s = trim(s);
  }
  if (s.size() >= 2 && is_digit(s[0]) && (s[1] == '.' || s[1] == ')') &&
      (s.size() == 2 || s[2] == ' ')) {
    if (list_number) *list_number = s[0] - '0';
    s.remove_prefix(2);
  }
  return trim(s);
}

std::optional<Slot> lenient_verdict_line(std::string_view text, bool blinded) {
  static constexpr std::array<std::string_view, 9> kCue = {
      "verdict", "overall", "conclusion", "better", "superior", "winner", "wins", "prefer",
      "stronger"};
  const bool cued = std::any_of(kCue.begin(), kCue.end(),
                                [&](std::string_view w) { return text.find(w) != std::string_view::npos; });
  const bool tie_word = contains_word(text, "tie") || contains_word(text, "tied") ||
                        contains_word(text, "draw") || text.find("equally") != std::string_view::npos;
  if (!cued && !tie_word) return std::nullopt;

  if (const std::size_t v = text.find("verdict"); v != std::string_view::npos) {
    std::string_view rest = text.substr(v + 7);
    while (!rest.empty() && (rest.front() == ':' || rest.front() == ' ' || rest.front() == '-' ||
                             rest.front() == '=')) {
      rest.remove_prefix(1);
    }
    if (word_at(rest, 0, "tie")) return Slot::Tie;
    const auto labels = labels_in(rest, blinded);
    if (!labels.empty() && labels.front().pos == 0) return labels.front().slot;
    if (blinded && !rest.empty() && (rest[0] == 'a' || rest[0] == 'b') &&
        (rest.size() == 1 || !is_alnum(rest[1]))) {
      return rest[0] == 'a' ? Slot::First : Slot::Second;
    }
  }

  const auto labels = labels_in(text, blinded);
  bool has_first = false, has_second = false;
  for (const Label& l : labels) (l.slot == Slot::First ? has_first : has_second) = true;
  if (has_first != has_second && cued && !tie_word) {
    return has_first ? Slot::First : Slot::Second;
  }
  if (has_first && has_second) {
    static constexpr std::array<std::string_view, 5> kBetter = {"better", "superior", "stronger",
                                                                 "outperform", "wins"};
    std::size_t cue = std::string_view::npos;
    for (std::string_view w : kBetter) cue = std::min(cue, text.find(w));
    if (cue != std::string_view::npos) {
      const Label* before = nullptr;
      for (const Label& l : labels) {
        if (l.pos < cue) before = &l;
      }
      if (before) return before->slot;
    }
  }
  if (tie_word && !(has_first != has_second)) return Slot::Tie;
  return std::nullopt;
}

ParseError make_error(ParseError::Kind kind, std::string message, std::string_view raw) {
  return ParseError{kind, std::move(message), std::string(raw)};
}

Judgment assemble(const Task& task, const BlindingRecord& presentation,
                  const std::array<Collected, kCriteriaPerTask>& collected, Slot verdict,
                  std::string_view raw) {
  Judgment j;
  j.task_id = task.id;
  j.raw_text = std::string(raw);
  j.blinded = presentation.blinded;
  j.presentation_order = presentation.order;
  for (std::size_t i = 0; i < task.criteria.size(); ++i) {
    const ScorePair ids =
        to_identities(*collected[i].scores[0], *collected[i].scores[1], presentation.order);
    j.criterion_scores.push_back(
        {task.criteria[i].name, ids.baseline, ids.cmt, collected[i].rationale});
  }
  if (verdict == Slot::Tie) {
    j.verdict = Verdict::Tie;
  } else {
    const bool first = verdict == Slot::First;
    const bool baseline_first = presentation.order == Presentation::BaselineFirst;
    j.verdict = first == baseline_first ? Verdict::BaselineBetter : Verdict::CMTBetter;
  }
  return j;
}

std::optional<ParseResult> parse_strict(const std::vector<std::string_view>& lines,
                                        const Task& task, const BlindingRecord& presentation,
                                        std::string_view raw) {
  std::array<Collected, kCriteriaPerTask> collected;
  std::optional<Slot> verdict;
  for (std::string_view line : lines) {
    if (auto c = strict_criterion(line)) {
      if (c->index < 1 || c->index > static_cast<int>(task.criteria.size())) continue;
      if (!in_range(c->first) || !in_range(c->second)) {
        return make_error(ParseError::Kind::OutOfRange,
                          "criterion " + std::to_string(c->index) + " has a score outside 1..5",
                          raw);
      }
      Collected& slot = collected[c->index - 1];
      slot.scores = {static_cast<int>(c->first), static_cast<int>(c->second)};
      slot.rationale = c->rationale;
    } else if (auto v = strict_verdict(line, presentation.blinded)) {
      verdict = v;
    }
  }
  for (const Collected& c : collected) {
    if (!c.complete()) return std::nullopt;
  }
  if (!verdict) return std::nullopt;
  return assemble(task, presentation, collected, *verdict, raw);
}

ParseResult parse_lenient(const std::vector<std::string_view>& lines, const Task& task,
                          const BlindingRecord& presentation, std::string_view raw) {
  const bool blinded = presentation.blinded;
  const std::size_t n = task.criteria.size();
  std::vector<std::string> names;
  std::vector<std::string> first_words;
  for (const Criterion& c : task.criteria) {
    names.push_back(lower(c.name));
    const std::string& full = names.back();
    first_words.push_back(full.substr(0, full.find(' ')));
  }

  std::array<Collected, kCriteriaPerTask> collected;
  int current = -1;
  auto first_incomplete = [&]() -> int {
    for (std::size_t i = 0; i < n; ++i) {
      if (!collected[i].complete()) return static_cast<int>(i);
    }
    return -1;
  };
  auto target = [&]() -> int {
    if (current >= 0 && !collected[current].complete()) return current;
    return first_incomplete();
  };

  for (std::string_view raw_line : lines) {
    const std::string text = lower(strip_markup(raw_line));
    int list_number = 0;
    const std::string_view body = strip_bullet(text, &list_number);
    if (body.empty()) continue;

    // Which criterion does this line talk about?
    int mentioned = -1;
    for (std::size_t i = 0; i < n && mentioned < 0; ++i) {
      if (body.find(names[i]) != std::string_view::npos) mentioned = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < n && mentioned < 0; ++i) {
      const std::string key = "criterion " + std::to_string(i + 1);
      if (find_word(body, key) != std::string_view::npos) mentioned = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < n && mentioned < 0; ++i) {
      if (first_words[i].size() >= 5 && word_at(body, 0, first_words[i])) {
        mentioned = static_cast<int>(i);
      }
    }
    if (mentioned < 0 && list_number >= 1 && list_number <= static_cast<int>(n) &&
        body.find("score") == std::string_view::npos) {
      // Numbered heading such as "2. Coherence:" without a known name.
      const auto labelled = labelled_scores(body, blinded);
      if (!labelled.empty() || pipe_pair(body) || generic_pair(body)) mentioned = list_number - 1;
    }
    if (mentioned >= 0) current = mentioned;

    if ((body.rfind("rationale", 0) == 0 || body.rfind("justification", 0) == 0) && current >= 0) {
      const std::size_t colon = raw_line.find(':');
      if (colon != std::string_view::npos) {
        collected[current].rationale = std::string(trim(raw_line.substr(colon + 1)));
      }
      continue;
    }

    auto take = [&](Slot slot, long long value, bool fractional) -> std::optional<ParseError> {
      const int t = target();
      if (t < 0) return std::nullopt;
      if (fractional || !in_range(value)) {
        return make_error(ParseError::Kind::OutOfRange,
                          "score " + std::to_string(value) + (fractional ? " (non-integer)" : "") +
                              " outside 1..5 for criterion '" + task.criteria[t].name + "'",
                          raw);
      }
      auto& cell = collected[t].scores[slot == Slot::First ? 0 : 1];
      if (!cell) cell = static_cast<int>(value);
      if (collected[t].complete() && collected[t].rationale.empty()) {
        collected[t].rationale = std::string(trim(strip_markup(raw_line)));
      }
      return std::nullopt;
    };

    const auto labelled = labelled_scores(body, blinded);
    if (!labelled.empty()) {
      for (const LabelledScore& s : labelled) {
        if (auto err = take(s.slot, s.value, s.fractional)) return *err;
      }
      continue;
    }
    std::optional<std::pair<Number, Number>> pair = pipe_pair(body);
    if (!pair && (body.find("score") != std::string_view::npos || mentioned >= 0)) {
      pair = generic_pair(body);
    }
    if (pair) {
      if (auto err = take(Slot::First, pair->first.value, pair->first.fractional)) return *err;
      if (auto err = take(Slot::Second, pair->second.value, pair->second.fractional)) return *err;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!collected[i].complete()) {
      return make_error(ParseError::Kind::MissingCriterion,
                        "no score pair found for criterion '" + task.criteria[i].name + "'", raw);
    }
  }

  std::optional<Slot> verdict;
  for (auto it = lines.rbegin(); it != lines.rend() && !verdict; ++it) {
    verdict = lenient_verdict_line(lower(strip_markup(*it)), blinded);
  }
  if (!verdict) return make_error(ParseError::Kind::MissingVerdict, "no overall verdict found", raw);
  return assemble(task, presentation, collected, *verdict, raw);
}

}  // namespace

ParseResult parse_judgment(std::string_view raw, const Task& task,
                           const BlindingRecord& presentation) {
  if (trim(raw).empty()) return make_error(ParseError::Kind::Empty, "empty judge reply", raw);
  if (task.criteria.size() != kCriteriaPerTask) {
    return make_error(ParseError::Kind::MissingCriterion, "task has no criteria", raw);
  }
  const auto lines = split_lines(raw);
  if (auto strict = parse_strict(lines, task, presentation, raw)) return *strict;
  return parse_lenient(lines, task, presentation, raw);
}

}  // namespace cmtbench
