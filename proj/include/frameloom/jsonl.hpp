#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <vector>

#include <json.hpp>

namespace frameloom {

// Append-only line-delimited JSON file shared by one writer at a time.
//
// Writers hold an in-process mutex plus an exclusive flock(2) while they
// catch up on lines appended by other processes and write their own lines
// with a single write(2). A trailing line without '\n' is a torn write from
// an interrupted run: readers ignore it and the next writer truncates it.
class JsonlFile {
 public:
  using LineFn = std::function<void(const nlohmann::json& line, size_t line_no)>;

  explicit JsonlFile(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  // Feeds every complete line not yet consumed to on_line.
  void read_new(const LineFn& on_line);

  // Under the write lock: feeds new lines to on_line, then appends the
  // lines returned by decide (which may throw to abort, leaving the file
  // unchanged). Returns the 1-based line number of the first appended line.
  size_t transact(const LineFn& on_line, const std::function<std::vector<nlohmann::json>()>& decide);

  size_t line_count() const { return line_count_; }

 private:
  void read_new_locked(const LineFn& on_line);

  std::filesystem::path path_;
  std::mutex mu_;
  size_t offset_ = 0;
  size_t line_count_ = 0;
};

}  // namespace frameloom
