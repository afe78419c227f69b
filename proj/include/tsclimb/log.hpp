#pragma once

#include <string>

namespace tsclimb {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();
// Reads TSCLIMB_LOG (error|info|debug); unknown values keep the default.
void set_log_level_from_env();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace tsclimb
