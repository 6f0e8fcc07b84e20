#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmtbench {

// Benchmark task categories, in canonical report order.
enum class Category {
  MIM,  // Metaphor Identification and Mapping
  DSR,  // Domain-Specific Reasoning
  ETT,  // Explanation and Teaching Tasks
  RCM,  // Reading Comprehension of Metaphors
};

inline constexpr std::array<Category, 4> kAllCategories = {Category::MIM, Category::DSR,
                                                           Category::ETT, Category::RCM};

std::string_view to_string(Category category);

// Throws std::invalid_argument for anything other than "MIM", "DSR", "ETT", "RCM".
Category parse_category(std::string_view text);

std::string_view category_title(Category category);

struct Criterion {
  std::string name;
  std::string description;

  friend bool operator==(const Criterion&, const Criterion&) = default;
};

inline constexpr std::size_t kCriteriaPerTask = 3;

struct Task {
  std::string id;
  Category category = Category::MIM;
  std::string prompt_text;
  std::vector<Criterion> criteria;  // exactly kCriteriaPerTask entries
  std::optional<std::string> notes;

  friend bool operator==(const Task&, const Task&) = default;
};

using Corpus = std::vector<Task>;

// The canonical criteria triple scored for every task of a category.
std::vector<Criterion> default_criteria(Category category);

// One problem found while loading a corpus document.
struct Diagnostic {
  std::string task_id;  // empty when the problem is not tied to a task
  std::string field;    // JSON path, e.g. "tasks[3].category"
  std::string message;
  int line = 0;  // 1-based; 0 when unknown

  std::string to_string() const;
};

class CorpusError : public std::runtime_error {
 public:
  enum class Kind { FileNotFound, Io, Malformed, Invalid };

  CorpusError(Kind kind, std::vector<Diagnostic> diagnostics);

  Kind kind() const { return kind_; }
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  Kind kind_;
  std::vector<Diagnostic> diagnostics_;
};

inline constexpr int kCorpusFormatVersion = 1;

// Parses and validates a corpus document. Tasks without criteria receive
// default_criteria(category). All violations are collected before throwing
// CorpusError, so one load reports every problem in the document.
Corpus parse_corpus(std::string_view document);

Corpus load_corpus(const std::filesystem::path& path);

// Serializes to the corpus document format with explicit criteria, two-space
// indentation and a trailing newline. parse_corpus(serialize_corpus(c)) == c.
std::string serialize_corpus(const Corpus& corpus);

// Stable digest of a corpus value (independent of source formatting).
std::string corpus_digest(const Corpus& corpus);

// Advisory authoring checks. MIM and RCM prompts must not ask for metaphor
// or analogy explicitly; ETT prompts legitimately do, so they are exempt.
std::vector<Diagnostic> lint_task(const Task& task);
std::vector<Diagnostic> lint_corpus(const Corpus& corpus);

// The bundled seed tasks, built from passages quoted in the CMT benchmark
// description. Three tasks per category.
const Corpus& seed_corpus();

}  // namespace cmtbench
