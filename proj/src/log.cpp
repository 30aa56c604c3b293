#include "epicsim/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace epicsim {

namespace {

LogLevel from_env() {
  const char* v = std::getenv("EPICSIM_LOG");
  if (v == nullptr) return LogLevel::off;
  const std::string s(v);
  if (s == "events") return LogLevel::events;
  if (s == "packets") return LogLevel::packets;
  return LogLevel::off;
}

std::atomic<int>& level_storage() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_storage().load(std::memory_order_relaxed)); }

void set_log_level(LogLevel level) { level_storage().store(static_cast<int>(level)); }

void log_line(LogLevel level, std::string_view line) {
  if (level == LogLevel::off || static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "[epicsim] %.*s\n", static_cast<int>(line.size()), line.data());
}

}  // namespace epicsim
