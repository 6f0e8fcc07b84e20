#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cmtbench {

// I/O failure or corruption of an append-only record file.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads a line-delimited JSON file. A final line without a terminating
// newline is the remnant of an interrupted append and is ignored; any other
// unparseable line throws StoreError naming the line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Truncates an unterminated trailing line left behind by an interrupted
// writer. Returns true if the file was modified.
bool repair_jsonl_tail(const std::filesystem::path& path);

// Append-only JSONL writer. Each append writes one complete line and flushes,
// so a crash loses at most the record being written. Appends are serialized
// internally and may come from any thread.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);

  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;

  void append(const nlohmann::json& record);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

}  // namespace cmtbench
