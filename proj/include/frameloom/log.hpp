#pragma once

#include <string_view>

namespace frameloom {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

// Progress and diagnostics go to stderr.
void log_info(std::string_view msg);
void log_warn(std::string_view msg);

}  // namespace frameloom
