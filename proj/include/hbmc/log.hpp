#pragma once

#include <string>

namespace hbmc {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// Progress messages go to standard error; artifacts never do.
void set_log_level(LogLevel level);
LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);
void log_warn(const std::string& message);

}  // namespace hbmc
