#include "frameloom/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <string>

namespace frameloom {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Warn)};
std::mutex g_mu;

void emit(const char* tag, std::string_view msg) {
  std::lock_guard lock(g_mu);
  std::fprintf(stderr, "frameloom: %s%.*s\n", tag, static_cast<int>(msg.size()), msg.data());
}
}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_info(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::Info)) emit("", msg);
}

void log_warn(std::string_view msg) {
  if (g_level >= static_cast<int>(LogLevel::Warn)) emit("warning: ", msg);
}

}  // namespace frameloom
