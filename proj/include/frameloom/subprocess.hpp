#pragma once

#include <optional>
#include <string>
#include <vector>

namespace frameloom {

struct ProcessResult {
  int exit_code = -1;  // -1 when killed by a signal
  std::string out;
  std::string err;
};

// Resolves a program name against PATH (names containing '/' are checked
// directly). Returns nullopt if no executable file is found.
std::optional<std::string> find_executable(const std::string& program);

// Runs argv[0] with the given arguments, no shell, stdin closed. Throws
// Error(Io) if the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace frameloom
