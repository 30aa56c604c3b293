#pragma once

#include <string_view>

namespace epicsim {

/// Trace verbosity from EPICSIM_LOG: off | events | packets.
enum class LogLevel { off = 0, events = 1, packets = 2 };

LogLevel log_level();
void set_log_level(LogLevel level);

/// Writes one line to stderr if level is enabled.
void log_line(LogLevel level, std::string_view line);

}  // namespace epicsim
