// Leveled stderr logging, controlled by the TRAPKIT_LOG environment variable.

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace trapkit {

enum class LogLevel : int { kError = 0, kInfo, kDebug };

std::optional<LogLevel> log_level_from_name(std::string_view name);

LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace trapkit
