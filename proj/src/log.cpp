#include "trapkit/log.hpp"

#include <atomic>
#include <iostream>

namespace trapkit {
namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::kInfo)};

void emit(LogLevel level, const char* tag, const std::string& message) {
    if (static_cast<int>(level) > g_level.load(std::memory_order_relaxed)) return;
    std::cerr << "[" << tag << "] " << message << "\n";
}

}  // namespace

std::optional<LogLevel> log_level_from_name(std::string_view name) {
    if (name == "error") return LogLevel::kError;
    if (name == "info") return LogLevel::kInfo;
    if (name == "debug") return LogLevel::kDebug;
    return std::nullopt;
}

LogLevel log_level() { return static_cast<LogLevel>(g_level.load(std::memory_order_relaxed)); }

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

void log_error(const std::string& message) { emit(LogLevel::kError, "error", message); }
void log_info(const std::string& message) { emit(LogLevel::kInfo, "info", message); }
void log_debug(const std::string& message) { emit(LogLevel::kDebug, "debug", message); }

}  // namespace trapkit
