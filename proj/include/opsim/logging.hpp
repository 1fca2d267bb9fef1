#pragma once

#include <string>

namespace opsim {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Minimal stderr logger. Level comes from set_log_level or the OPSIM_LOG
// environment variable ("debug", "info", "warn", "error", "off"); default
// is warn so library use stays quiet. An optional sink file receives a copy
// of every message regardless of level.
void set_log_level(LogLevel level);
LogLevel log_level();
void init_log_level_from_env();

void set_log_sink_file(const std::string& path); // empty disables
void close_log_sink();

void log(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& msg) { log(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log(LogLevel::Error, msg); }

} // namespace opsim
