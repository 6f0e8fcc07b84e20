#include "cmtbench/analysis.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace cmtbench {

namespace {

struct Accumulator {
  std::size_t n_tasks = 0;
  std::size_t n_failed = 0;
  long long sum_baseline = 0;
  long long sum_cmt = 0;
  long long scores = 0;
  std::size_t wins_baseline = 0;
  std::size_t wins_cmt = 0;
  std::size_t ties = 0;
};

int category_rank(Category c) { return static_cast<int>(c); }

bool summary_less(const CategorySummary& a, const CategorySummary& b) {
  if (a.model_pair != b.model_pair) return a.model_pair < b.model_pair;
  return category_rank(a.category) < category_rank(b.category);
}

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw StoreError("write to '" + path.string() + "' failed");
}

}  // namespace

std::vector<CategorySummary> aggregate(std::span<const JudgmentRecord> records,
                                       const Corpus& corpus) {
  std::map<std::string, const Task*> tasks;
  for (const Task& t : corpus) tasks.emplace(t.id, &t);

  std::map<std::pair<std::string, int>, Accumulator> groups;
  for (const JudgmentRecord& r : records) {
    auto task_it = tasks.find(r.task_id);
    if (task_it == tasks.end()) {
      throw AnalysisError("judgment refers to unknown task '" + r.task_id + "'");
    }
    const Task& task = *task_it->second;
    Accumulator& acc = groups[{r.model_pair, category_rank(task.category)}];
    ++acc.n_tasks;
    if (r.status != RecordStatus::Ok || !r.judgment) {
      ++acc.n_failed;
      continue;
    }
    const Judgment& j = *r.judgment;
    try {
      validate_judgment(j, task);
    } catch (const std::invalid_argument& e) {
      throw AnalysisError(std::string("criteria mismatch: ") + e.what());
    }
    for (const CriterionScore& s : j.criterion_scores) {
      acc.sum_baseline += s.baseline_score;
      acc.sum_cmt += s.cmt_score;
      ++acc.scores;
    }
    switch (j.verdict) {
      case Verdict::BaselineBetter: ++acc.wins_baseline; break;
      case Verdict::CMTBetter: ++acc.wins_cmt; break;
      case Verdict::Tie: ++acc.ties; break;
    }
  }

  std::vector<CategorySummary> out;
  for (const auto& [key, acc] : groups) {
    CategorySummary s;
    s.model_pair = key.first;
    s.category = static_cast<Category>(key.second);
    s.n_tasks = acc.n_tasks;
    s.n_failed = acc.n_failed;
    if (acc.scores > 0) {
      s.mean_baseline = static_cast<double>(acc.sum_baseline) / static_cast<double>(acc.scores);
      s.mean_cmt = static_cast<double>(acc.sum_cmt) / static_cast<double>(acc.scores);
    }
    s.wins_baseline = acc.wins_baseline;
    s.wins_cmt = acc.wins_cmt;
    s.ties = acc.ties;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), summary_less);
  return out;
}

std::string render_report(std::span<const CategorySummary> summaries, ReportFormat format) {
  std::vector<CategorySummary> rows(summaries.begin(), summaries.end());
  std::stable_sort(rows.begin(), rows.end(), summary_less);

  if (format == ReportFormat::Csv) {
    std::string out =
        "model_pair,category,n_tasks,n_failed,mean_baseline,mean_cmt,wins_baseline,wins_cmt,ties\n";
    for (const CategorySummary& s : rows) {
      out += csv_field(s.model_pair) + "," + std::string(to_string(s.category)) + "," +
             std::to_string(s.n_tasks) + "," + std::to_string(s.n_failed) + "," +
             (s.mean_baseline ? fixed(*s.mean_baseline, 3) : "") + "," +
             (s.mean_cmt ? fixed(*s.mean_cmt, 3) : "") + "," + std::to_string(s.wins_baseline) +
             "," + std::to_string(s.wins_cmt) + "," + std::to_string(s.ties) + "\n";
    }
    return out;
  }

  nlohmann::ordered_json root;
  root["summaries"] = nlohmann::ordered_json::array();
  for (const CategorySummary& s : rows) {
    nlohmann::ordered_json row;
    row["model_pair"] = s.model_pair;
    row["category"] = std::string(to_string(s.category));
    row["n_tasks"] = s.n_tasks;
    row["n_failed"] = s.n_failed;
    row["mean_baseline"] = s.mean_baseline ? nlohmann::ordered_json(*s.mean_baseline) : nlohmann::ordered_json(nullptr);
    row["mean_cmt"] = s.mean_cmt ? nlohmann::ordered_json(*s.mean_cmt) : nlohmann::ordered_json(nullptr);
    row["wins_baseline"] = s.wins_baseline;
    row["wins_cmt"] = s.wins_cmt;
    row["ties"] = s.ties;
    root["summaries"].push_back(std::move(row));
  }
  return root.dump(2) + "\n";
}

void emit_report(std::span<const CategorySummary> summaries, ReportFormat format,
                 const std::filesystem::path& path) {
  if (summaries.empty()) throw std::invalid_argument("no summaries to report");
  write_file(path, render_report(summaries, format));
}

namespace chart {
constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 50;
constexpr double kBottom = 70;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;
constexpr double kYMin = 1.0;
constexpr double kYMax = 5.0;
constexpr const char* kBaselineColor = "#9e9e9e";
constexpr const char* kCmtColor = "#1f77b4";
}  // namespace chart

std::string render_chart_svg(Category category, std::span<const CategorySummary> summaries) {
  using namespace chart;
  std::vector<const CategorySummary*> rows;
  for (const CategorySummary& s : summaries) {
    if (s.category == category) rows.push_back(&s);
  }
  std::sort(rows.begin(), rows.end(),
            [](const CategorySummary* a, const CategorySummary* b) { return summary_less(*a, *b); });

  auto y_of = [](double value) {
    return kTop + kPlotH - (value - kYMin) / (kYMax - kYMin) * kPlotH;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth, 0) +
         "\" height=\"" + fixed(kHeight, 0) + "\" viewBox=\"0 0 " + fixed(kWidth, 0) + " " +
         fixed(kHeight, 0) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + fixed(kWidth, 0) + "\" height=\"" + fixed(kHeight, 0) +
         "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(kLeft + kPlotW / 2, 2) + "\" y=\"28\" font-size=\"15\" " +
         "text-anchor=\"middle\">" + std::string(to_string(category)) + ": " +
         xml_escape(category_title(category)) + "</text>\n";

  // Y axis with grid lines at each integer score.
  for (int tick = 1; tick <= 5; ++tick) {
    const std::string y = fixed(y_of(tick), 2);
    svg += "<line class=\"grid\" x1=\"" + fixed(kLeft, 2) + "\" y1=\"" + y + "\" x2=\"" +
           fixed(kLeft + kPlotW, 2) + "\" y2=\"" + y + "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + fixed(kLeft - 8, 2) + "\" y=\"" + fixed(y_of(tick) + 4, 2) +
           "\" font-size=\"12\" text-anchor=\"end\">" + std::to_string(tick) + "</text>\n";
  }
  svg += "<line class=\"axis\" x1=\"" + fixed(kLeft, 2) + "\" y1=\"" + fixed(kTop, 2) +
         "\" x2=\"" + fixed(kLeft, 2) + "\" y2=\"" + fixed(kTop + kPlotH, 2) +
         "\" stroke=\"black\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + fixed(kLeft, 2) + "\" y1=\"" + fixed(kTop + kPlotH, 2) +
         "\" x2=\"" + fixed(kLeft + kPlotW, 2) + "\" y2=\"" + fixed(kTop + kPlotH, 2) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"18\" y=\"" + fixed(kTop + kPlotH / 2, 2) +
         "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fixed(kTop + kPlotH / 2, 2) + ")\">Average score (1-5)</text>\n";
  svg += "<text x=\"" + fixed(kLeft + kPlotW / 2, 2) + "\" y=\"" + fixed(kHeight - 18, 2) +
         "\" font-size=\"13\" text-anchor=\"middle\">Model</text>\n";

  const double group_w = rows.empty() ? kPlotW : kPlotW / static_cast<double>(rows.size());
  const double bar_w = std::min(group_w * 0.35, 60.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const CategorySummary& s = *rows[i];
    const double center = kLeft + group_w * (static_cast<double>(i) + 0.5);
    const std::array<std::pair<const std::optional<double>*, const char*>, 2> bars = {
        std::pair{&s.mean_baseline, "baseline"}, std::pair{&s.mean_cmt, "cmt"}};
    for (std::size_t b = 0; b < bars.size(); ++b) {
      const double x = b == 0 ? center - bar_w - 2 : center + 2;
      const auto& mean = *bars[b].first;
      if (!mean) {
        svg += "<text x=\"" + fixed(x + bar_w / 2, 2) + "\" y=\"" + fixed(kTop + kPlotH - 6, 2) +
               "\" font-size=\"11\" text-anchor=\"middle\">n/a</text>\n";
        continue;
      }
      const double value = std::clamp(*mean, kYMin, kYMax);
      const double top = y_of(value);
      svg += "<rect class=\"bar " + std::string(bars[b].second) + "\" x=\"" + fixed(x, 2) +
             "\" y=\"" + fixed(top, 2) + "\" width=\"" + fixed(bar_w, 2) + "\" height=\"" +
             fixed(kTop + kPlotH - top, 2) + "\" fill=\"" +
             (b == 0 ? kBaselineColor : kCmtColor) + "\"/>\n";
      svg += "<text x=\"" + fixed(x + bar_w / 2, 2) + "\" y=\"" + fixed(top - 4, 2) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + fixed(*mean, 2) + "</text>\n";
    }
    svg += "<text x=\"" + fixed(center, 2) + "\" y=\"" + fixed(kTop + kPlotH + 18, 2) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + xml_escape(s.model_pair) + "</text>\n";
  }

  const double legend_x = kLeft + kPlotW + 16;
  svg += "<rect x=\"" + fixed(legend_x, 2) + "\" y=\"" + fixed(kTop, 2) +
         "\" width=\"14\" height=\"14\" fill=\"" + kBaselineColor + "\"/>\n";
  svg += "<text x=\"" + fixed(legend_x + 20, 2) + "\" y=\"" + fixed(kTop + 12, 2) +
         "\" font-size=\"12\">Baseline</text>\n";
  svg += "<rect x=\"" + fixed(legend_x, 2) + "\" y=\"" + fixed(kTop + 22, 2) +
         "\" width=\"14\" height=\"14\" fill=\"" + kCmtColor + "\"/>\n";
  svg += "<text x=\"" + fixed(legend_x + 20, 2) + "\" y=\"" + fixed(kTop + 34, 2) +
         "\" font-size=\"12\">CMT</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> emit_charts(std::span<const CategorySummary> summaries,
                                               const std::filesystem::path& out_dir) {
  if (summaries.empty()) throw std::invalid_argument("no summaries to chart");
  std::set<int> present;
  for (const CategorySummary& s : summaries) present.insert(category_rank(s.category));
  std::vector<std::filesystem::path> paths;
  for (Category c : kAllCategories) {
    if (!present.contains(category_rank(c))) continue;
    const auto path = out_dir / ("chart-" + std::string(to_string(c)) + ".svg");
    write_file(path, render_chart_svg(c, summaries));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace cmtbench
