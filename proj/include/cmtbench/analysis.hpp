#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmtbench/corpus.hpp"
#include "cmtbench/judge.hpp"

namespace cmtbench {

// Per model pair and category aggregate of judged tasks.
struct CategorySummary {
  std::string model_pair;
  Category category = Category::MIM;
  std::size_t n_tasks = 0;   // judged units, failed included
  std::size_t n_failed = 0;  // excluded from means and verdict counts
  // Mean over every criterion-level score in the group; absent when no
  // judgment succeeded.
  std::optional<double> mean_baseline;
  std::optional<double> mean_cmt;
  std::size_t wins_baseline = 0;
  std::size_t wins_cmt = 0;
  std::size_t ties = 0;

  friend bool operator==(const CategorySummary&, const CategorySummary&) = default;
};

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Groups by (model pair, category). Output is sorted by model pair name, then
// category in MIM, DSR, ETT, RCM order, and does not depend on input order.
// Throws AnalysisError when a task id is not in the corpus or a judgment's
// criteria differ from its task's.
std::vector<CategorySummary> aggregate(std::span<const JudgmentRecord> records,
                                       const Corpus& corpus);

enum class ReportFormat { Csv, Json };

// Rows sorted by model pair then category; means with 3 decimals.
std::string render_report(std::span<const CategorySummary> summaries, ReportFormat format);

// Throws std::invalid_argument for an empty summary list and StoreError on
// write failure.
void emit_report(std::span<const CategorySummary> summaries, ReportFormat format,
                 const std::filesystem::path& path);

// Grouped bar chart for one category: per model pair a baseline bar and a CMT
// bar, y axis from 1 to 5.
std::string render_chart_svg(Category category, std::span<const CategorySummary> summaries);

// Writes chart-<CATEGORY>.svg for each category present. Returns the paths.
std::vector<std::filesystem::path> emit_charts(std::span<const CategorySummary> summaries,
                                               const std::filesystem::path& out_dir);

}  // namespace cmtbench
