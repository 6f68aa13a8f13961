#pragma once

#include <string>

namespace flexpipe {

enum class LogLevel { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

// Parses "off|error|warn|info|debug"; unknown strings leave the level alone.
bool set_log_level(const std::string& name);

// Applies the FLEXPIPE_LOG environment variable, if set.
void init_log_from_env();

void log_line(LogLevel level, const std::string& scope, const std::string& msg);

} // namespace flexpipe
