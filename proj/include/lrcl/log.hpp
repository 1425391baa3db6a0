#pragma once

#include <string>

namespace lrcl {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Parses "error", "info" or "debug"; throws ConfigError otherwise.
LogLevel parse_log_level(const std::string& name);

/// Reads LRCL_LOG (unset means info).
LogLevel log_level_from_env();

void set_log_level(LogLevel level);
LogLevel log_level();

// Messages go to stderr, one line each, prefixed by the level.
void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace lrcl
