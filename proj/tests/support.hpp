#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "cmtbench/corpus.hpp"
#include "cmtbench/runner.hpp"

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cmtbench-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::filesystem::path test_dir() { return CMTBENCH_TEST_DIR; }
inline std::filesystem::path source_dir() { return CMTBENCH_SOURCE_DIR; }

inline cmtbench::Task fixture_task() {
  cmtbench::Task t;
  t.id = "fixture-001";
  t.category = cmtbench::Category::MIM;
  t.prompt_text = "Explain what is meant by \"the idea took root\".";
  t.criteria = {{"Accuracy", "Correct reading of the expression."},
                {"Coherence", "Logical structure of the answer."},
                {"Relevance", "Focus on the question asked."}};
  return t;
}

inline cmtbench::PairResult fixture_pair(const std::string& task_id, int sample = 0) {
  cmtbench::PairResult p;
  p.task_id = task_id;
  p.sample = sample;
  p.baseline.text = "BASELINE-TEXT for " + task_id;
  p.cmt.text = "CMT-TEXT for " + task_id;
  p.baseline_spec_name = "M";
  p.cmt_spec_name = "CMT-M";
  return p;
}

// `n` tasks cycling through the seed corpus with fresh ids and prompts.
inline cmtbench::Corpus bulk_corpus(int n) {
  cmtbench::Corpus corpus;
  const cmtbench::Corpus& seed = cmtbench::seed_corpus();
  for (int i = 0; i < n; ++i) {
    cmtbench::Task t = seed[i % seed.size()];
    t.id = "bulk-" + std::to_string(1000 + i);
    t.prompt_text += " (variant " + std::to_string(i) + ")";
    corpus.push_back(t);
  }
  return corpus;
}

}  // namespace testsupport
