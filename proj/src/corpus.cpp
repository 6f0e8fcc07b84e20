#include "cmtbench/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmtbench/digest.hpp"

namespace cmtbench {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Category category) {
  switch (category) {
    case Category::MIM: return "MIM";
    case Category::DSR: return "DSR";
    case Category::ETT: return "ETT";
    case Category::RCM: return "RCM";
  }
  return "?";
}

Category parse_category(std::string_view text) {
  for (Category c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  throw std::invalid_argument("unknown category '" + std::string(text) +
                              "' (expected MIM, DSR, ETT or RCM)");
}

std::string_view category_title(Category category) {
  switch (category) {
    case Category::MIM: return "Metaphor Identification and Mapping";
    case Category::DSR: return "Domain-Specific Reasoning";
    case Category::ETT: return "Explanation and Teaching Tasks";
    case Category::RCM: return "Reading Comprehension of Metaphors";
  }
  return "?";
}

std::vector<Criterion> default_criteria(Category category) {
  switch (category) {
    case Category::MIM:
    case Category::DSR:
      return {
          {"Precision in structural interpretation",
           "Does the response pick out the conceptual elements that give the expression its "
           "structure?"},
          {"Coherence of explanation",
           "Is the account logically consistent from start to finish, and does it add insight?"},
          {"Accuracy in mapping relationships",
           "Are the relationships between the entities carried over correctly?"},
      };
    case Category::ETT:
      return {
          {"Clarity for Non-Experts",
           "Could a reader without background follow it, with no needless jargon and no loss "
           "of accuracy?"},
          {"Conceptual Accuracy",
           "Is the explanation true to the fundamental ideas of the concept?"},
          {"Effectiveness of Analogy or Metaphor",
           "Does the chosen comparison help understanding and fit the concept it stands for?"},
      };
    case Category::RCM:
      return {
          {"Precision in metaphor identification",
           "Are the figurative expressions found and told apart from literal statements?"},
          {"Completeness of source-target mapping",
           "Is every source domain linked to the target domain it describes?"},
          {"Depth of interpretive insight",
           "How well does the response explain what the figure does to meaning and "
           "perception?"},
      };
  }
  return {};
}

std::string Diagnostic::to_string() const {
  std::ostringstream out;
  if (line > 0) out << "line " << line << ": ";
  if (!task_id.empty()) out << "task '" << task_id << "': ";
  if (!field.empty()) out << field << ": ";
  out << message;
  return out.str();
}

namespace {

std::string summarize(const std::vector<Diagnostic>& diagnostics) {
  if (diagnostics.empty()) return "corpus error";
  std::string text = diagnostics.front().to_string();
  if (diagnostics.size() > 1) {
    text += " (and " + std::to_string(diagnostics.size() - 1) + " more)";
  }
  return text;
}

int line_of_offset(std::string_view document, std::size_t offset) {
  offset = std::min(offset, document.size());
  return 1 + static_cast<int>(std::count(document.begin(), document.begin() + offset, '\n'));
}

const std::set<std::string, std::less<>> kTaskKeys = {"id", "category", "prompt", "criteria",
                                                      "notes"};

class Validator {
 public:
  std::vector<Diagnostic> diagnostics;

  void error(std::string task_id, std::string field, std::string message) {
    diagnostics.push_back({std::move(task_id), std::move(field), std::move(message), 0});
  }

  std::optional<std::vector<Criterion>> criteria(const json& value, const std::string& task_id,
                                                 const std::string& path) {
    if (!value.is_array()) {
      error(task_id, path, "criteria must be an array");
      return std::nullopt;
    }
    if (value.size() != kCriteriaPerTask) {
      error(task_id, path,
            "expected exactly 3 criteria, found " + std::to_string(value.size()));
      return std::nullopt;
    }
    std::vector<Criterion> out;
    std::set<std::string> seen;
    bool ok = true;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const json& item = value[i];
      const std::string item_path = path + "[" + std::to_string(i) + "]";
      if (!item.is_object()) {
        error(task_id, item_path, "criterion must be an object");
        ok = false;
        continue;
      }
      Criterion c;
      if (auto it = item.find("name"); it == item.end() || !it->is_string() ||
                                       it->get_ref<const std::string&>().empty()) {
        error(task_id, item_path + ".name", "criterion name must be a non-empty string");
        ok = false;
      } else {
        c.name = it->get<std::string>();
        if (!seen.insert(c.name).second) {
          error(task_id, item_path + ".name", "duplicate criterion name '" + c.name + "'");
          ok = false;
        }
      }
      if (auto it = item.find("description"); it == item.end() || !it->is_string()) {
        error(task_id, item_path + ".description", "criterion description must be a string");
        ok = false;
      } else {
        c.description = it->get<std::string>();
      }
      for (const auto& [key, unused] : item.items()) {
        if (key != "name" && key != "description") {
          error(task_id, item_path + "." + key, "unknown field");
          ok = false;
        }
      }
      out.push_back(std::move(c));
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<Task> task(const json& value, std::size_t index) {
    const std::string path = "tasks[" + std::to_string(index) + "]";
    if (!value.is_object()) {
      error("", path, "task must be an object");
      return std::nullopt;
    }
    const std::size_t before = diagnostics.size();
    Task t;
    if (auto it = value.find("id"); it == value.end() || !it->is_string() ||
                                     it->get_ref<const std::string&>().empty()) {
      error("", path + ".id", "id must be a non-empty string");
    } else {
      t.id = it->get<std::string>();
    }
    if (auto it = value.find("category"); it == value.end() || !it->is_string()) {
      error(t.id, path + ".category", "category must be one of MIM, DSR, ETT, RCM");
    } else {
      try {
        t.category = parse_category(it->get_ref<const std::string&>());
      } catch (const std::invalid_argument& e) {
        error(t.id, path + ".category", e.what());
      }
    }
    if (auto it = value.find("prompt"); it == value.end() || !it->is_string() ||
                                         it->get_ref<const std::string&>().empty()) {
      error(t.id, path + ".prompt", "prompt must be a non-empty string");
    } else {
      t.prompt_text = it->get<std::string>();
    }
    if (auto it = value.find("notes"); it != value.end()) {
      if (it->is_string()) {
        t.notes = it->get<std::string>();
      } else if (!it->is_null()) {
        error(t.id, path + ".notes", "notes must be a string");
      }
    }
    for (const auto& [key, unused] : value.items()) {
      if (!kTaskKeys.contains(key)) error(t.id, path + "." + key, "unknown field");
    }
    if (diagnostics.size() != before) return std::nullopt;

    if (auto it = value.find("criteria"); it != value.end() && !it->is_null()) {
      auto parsed = criteria(*it, t.id, path + ".criteria");
      if (!parsed) return std::nullopt;
      t.criteria = std::move(*parsed);
    } else {
      t.criteria = default_criteria(t.category);
    }
    return t;
  }
};

}  // namespace

CorpusError::CorpusError(Kind kind, std::vector<Diagnostic> diagnostics)
    : std::runtime_error(summarize(diagnostics)),
      kind_(kind),
      diagnostics_(std::move(diagnostics)) {}

Corpus parse_corpus(std::string_view document) {
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    Diagnostic d{"", "", e.what(), line_of_offset(document, e.byte > 0 ? e.byte - 1 : 0)};
    throw CorpusError(CorpusError::Kind::Malformed, {d});
  }

  Validator v;
  if (!root.is_object()) {
    v.error("", "$", "corpus document must be an object with 'version' and 'tasks'");
    throw CorpusError(CorpusError::Kind::Malformed, v.diagnostics);
  }
  if (auto it = root.find("version"); it == root.end() || !it->is_number_integer()) {
    v.error("", "version", "version must be an integer");
  } else if (it->get<long long>() != kCorpusFormatVersion) {
    v.error("", "version",
            "unsupported version " + std::to_string(it->get<long long>()) + " (expected 1)");
  }
  for (const auto& [key, unused] : root.items()) {
    if (key != "version" && key != "tasks") v.error("", key, "unknown field");
  }
  auto tasks_it = root.find("tasks");
  if (tasks_it == root.end() || !tasks_it->is_array()) {
    v.error("", "tasks", "tasks must be an array");
    throw CorpusError(CorpusError::Kind::Malformed, v.diagnostics);
  }

  Corpus corpus;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tasks_it->size(); ++i) {
    auto task = v.task((*tasks_it)[i], i);
    if (!task) continue;
    if (!ids.insert(task->id).second) {
      v.error(task->id, "tasks[" + std::to_string(i) + "].id",
              "duplicate task id '" + task->id + "'");
      continue;
    }
    corpus.push_back(std::move(*task));
  }
  if (!v.diagnostics.empty()) throw CorpusError(CorpusError::Kind::Invalid, v.diagnostics);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw CorpusError(CorpusError::Kind::FileNotFound,
                      {{"", "", "corpus file not found: " + path.string(), 0}});
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError(CorpusError::Kind::Io, {{"", "", "cannot read " + path.string(), 0}});
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str());
}

std::string serialize_corpus(const Corpus& corpus) {
  ordered_json root;
  root["version"] = kCorpusFormatVersion;
  root["tasks"] = ordered_json::array();
  for (const Task& t : corpus) {
    ordered_json task;
    task["id"] = t.id;
    task["category"] = std::string(to_string(t.category));
    task["prompt"] = t.prompt_text;
    ordered_json criteria = ordered_json::array();
    for (const Criterion& c : t.criteria) {
      ordered_json item;
      item["name"] = c.name;
      item["description"] = c.description;
      criteria.push_back(std::move(item));
    }
    task["criteria"] = std::move(criteria);
    if (t.notes) task["notes"] = *t.notes;
    root["tasks"].push_back(std::move(task));
  }
  return root.dump(2) + "\n";
}

std::string corpus_digest(const Corpus& corpus) { return sha256_hex(serialize_corpus(corpus)); }

std::vector<Diagnostic> lint_task(const Task& task) {
  std::vector<Diagnostic> out;
  if (task.category != Category::MIM && task.category != Category::RCM) return out;
  std::string lower = task.prompt_text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (std::string_view word : {"metaphor", "analog"}) {
    if (lower.find(word) != std::string::npos) {
      out.push_back({task.id, "prompt",
                     "prompt mentions '" + std::string(word) +
                         "'; MIM/RCM instructions should not ask for figurative reasoning "
                         "explicitly",
                     0});
    }
  }
  return out;
}

std::vector<Diagnostic> lint_corpus(const Corpus& corpus) {
  std::vector<Diagnostic> out;
  for (const Task& t : corpus) {
    auto found = lint_task(t);
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

namespace {

Task seed(std::string id, Category category, std::string prompt, std::string notes) {
  return Task{std::move(id), category, std::move(prompt), default_criteria(category),
              std::move(notes)};
}

Corpus build_seed_corpus() {
  Corpus c;
  c.push_back(seed("mim-001", Category::MIM,
                   "Consider the sentence: \"Their plan to revitalize the industry took root and "
                   "began to grow stronger each year.\" Identify the key entities involved and "
                   "explain how the sentence frames the progress of the plan.",
                   "Biological growth mapped onto the success of an economic strategy."));
  c.push_back(seed("mim-002", Category::MIM,
                   "Consider the statement: \"The economy is entering a deep freeze.\" Identify "
                   "what is being described, which experience the wording draws on, and explain "
                   "what it conveys about the state of the economy.",
                   "Layered temperature/immobility structure."));
  c.push_back(seed("mim-003", Category::MIM,
                   "Consider the sentence: \"She has been carrying the weight of the whole "
                   "project on her shoulders for months.\" Identify the key entities and explain "
                   "how the sentence frames her responsibility.",
                   "Physical burden mapped onto responsibility."));
  c.push_back(seed("dsr-001", Category::DSR,
                   "Explain how competition in a market works. The familiar comparison with a "
                   "battlefield is not enough: develop an alternative framework, for example "
                   "ecological ecosystems or evolutionary dynamics, and show which features of "
                   "competition it explains better.",
                   "Must go beyond the battlefield framing."));
  c.push_back(seed("dsr-002", Category::DSR,
                   "Explain how a blockchain network keeps its shared ledger trustworthy without "
                   "a central authority, relating its operation to the way the immune system "
                   "detects and rejects threats.",
                   "Immune system / blockchain operations."));
  c.push_back(seed("dsr-003", Category::DSR,
                   "Explain how current, voltage and resistance interact in an electric circuit "
                   "without using the comparison of water flowing through pipes. Offer a "
                   "different mapping that reveals the underlying structure.",
                   "Water-in-pipes is ruled out as too conventional."));
  c.push_back(seed("ett-001", Category::ETT,
                   "Explain to someone with no technical background how neural networks learn, "
                   "using an analogy such as a child learning through trial and error.",
                   "Neural network training."));
  c.push_back(seed("ett-002", Category::ETT,
                   "Explain to a general audience what inflation is and why it happens, using "
                   "the comparison of air being pumped into a balloon so that it expands over "
                   "time.",
                   "Inflation as a balloon."));
  c.push_back(seed("ett-003", Category::ETT,
                   "Explain to a general audience how the stock market arrives at the price of a "
                   "company's shares, using an everyday analogy.",
                   "Stock markets."));
  c.push_back(seed("rcm-001", Category::RCM,
                   "Read the passage: \"His words cut deep, leaving wounds that time struggled to "
                   "heal.\" Explain what the passage conveys about the effect of his words and "
                   "how its wording shapes that meaning.",
                   "Physical injury conveying emotional pain."));
  c.push_back(seed("rcm-002", Category::RCM,
                   "Read the passage: \"The economy is a house of cards, ready to collapse at the "
                   "slightest disturbance.\" Explain what the passage says about the economy and "
                   "how its imagery shapes the reader's perception.",
                   "Structural fragility conveying economic instability."));
  c.push_back(seed("rcm-003", Category::RCM,
                   "Read the passage: \"All the world's a stage, and all the men and women merely "
                   "players; they have their exits and their entrances.\" Explain what the passage "
                   "says about human life and how its wording shapes that view.",
                   "Shakespeare, As You Like It."));
  return c;
}

}  // namespace

const Corpus& seed_corpus() {
  static const Corpus corpus = build_seed_corpus();
  return corpus;
}

}  // namespace cmtbench
