#include "frameloom/jsonl.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "frameloom/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

namespace {

struct Fd {
  int fd = -1;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

[[noreturn]] void io_fail(const std::string& what, const fs::path& p) {
  throw Error(ErrorCode::Io, what + " " + p.string() + ": " + std::strerror(errno));
}

}  // namespace

JsonlFile::JsonlFile(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  Fd f{::open(path_.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644)};
  if (f.fd < 0) io_fail("cannot create", path_);
}

void JsonlFile::read_new(const LineFn& on_line) {
  std::lock_guard lock(mu_);
  read_new_locked(on_line);
}

void JsonlFile::read_new_locked(const LineFn& on_line) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) io_fail("cannot open", path_);
  in.seekg(static_cast<std::streamoff>(offset_));
  std::string chunk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t pos = 0;
  while (true) {
    auto nl = chunk.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string_view line(chunk.data() + pos, nl - pos);
    ++line_count_;
    if (!line.empty()) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, path_.string() + ":" + std::to_string(line_count_) +
                                       ": malformed record: " + e.what());
      }
      on_line(j, line_count_);
    }
    pos = nl + 1;
    offset_ += line.size() + 1;
  }
}

size_t JsonlFile::transact(const LineFn& on_line,
                           const std::function<std::vector<json>()>& decide) {
  std::lock_guard lock(mu_);
  Fd f{::open(path_.c_str(), O_RDWR | O_CLOEXEC)};
  if (f.fd < 0) io_fail("cannot open", path_);
  while (::flock(f.fd, LOCK_EX) != 0) {
    if (errno != EINTR) io_fail("cannot lock", path_);
  }

  read_new_locked(on_line);
  auto lines = decide();
  size_t first = line_count_ + 1;
  if (lines.empty()) return first;

  struct stat st {};
  if (::fstat(f.fd, &st) != 0) io_fail("cannot stat", path_);
  if (static_cast<size_t>(st.st_size) > offset_) {
    // Torn tail from an interrupted writer.
    if (::ftruncate(f.fd, static_cast<off_t>(offset_)) != 0) io_fail("cannot truncate", path_);
  }

  std::string buf;
  for (const auto& l : lines) buf += l.dump() + "\n";
  if (::lseek(f.fd, static_cast<off_t>(offset_), SEEK_SET) < 0) io_fail("cannot seek", path_);
  size_t written = 0;
  while (written < buf.size()) {
    ssize_t n = ::write(f.fd, buf.data() + written, buf.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      int saved = errno;
      if (::ftruncate(f.fd, static_cast<off_t>(offset_)) != 0) {
      }
      errno = saved;
      io_fail("cannot append to", path_);
    }
    written += static_cast<size_t>(n);
  }
  if (::fdatasync(f.fd) != 0) io_fail("cannot sync", path_);

  // The appended lines are ours; consume them so they are not re-read.
  offset_ += buf.size();
  for (const auto& l : lines) on_line(l, ++line_count_);
  return first;
}

}  // namespace frameloom
