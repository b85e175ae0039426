#pragma once

#include <string>

namespace cimle {

/// Verbosity is read once from the CIMLE_LOG environment variable:
/// "quiet" (default when unset), "info", or "debug".
enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level();

/// Messages go to stderr so that stdout and file artifacts stay
/// byte-deterministic.
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

} // namespace cimle
