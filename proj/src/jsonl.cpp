#include "cmtbench/jsonl.hpp"

#include <sstream>
#include <system_error>

namespace cmtbench {

namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  const std::string text = read_all(path);
  std::vector<nlohmann::json> records;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    ++line_no;
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) break;  // unterminated tail: interrupted append
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw StoreError(path.string() + ":" + std::to_string(line_no) +
                       ": corrupt record: " + e.what());
    }
  }
  return records;
}

bool repair_jsonl_tail(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return false;
  const std::string text = read_all(path);
  if (text.empty() || text.back() == '\n') return false;
  const std::size_t last_newline = text.rfind('\n');
  const std::uintmax_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
  fs::resize_file(path, keep, ec);
  if (ec) throw StoreError("cannot repair '" + path.string() + "': " + ec.message());
  return true;
}

JsonlAppender::JsonlAppender(fs::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (path_.has_parent_path()) {
    fs::create_directories(path_.parent_path(), ec);
    if (ec) {
      throw StoreError("cannot create directory '" + path_.parent_path().string() +
                       "': " + ec.message());
    }
  }
  repair_jsonl_tail(path_);
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw StoreError("cannot open '" + path_.string() + "' for append");
}

void JsonlAppender::append(const nlohmann::json& record) {
  std::string line = record.dump();
  line.push_back('\n');
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw StoreError("write to '" + path_.string() + "' failed");
}

}  // namespace cmtbench
