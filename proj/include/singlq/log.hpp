#pragma once

// Diagnostics to stderr, gated by SINGLQ_LOG in {quiet, info, debug}.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace singlq {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

inline LogLevel parse_log_level(const char* value) {
  if (value == nullptr) return LogLevel::quiet;
  const std::string_view v(value);
  if (v == "debug") return LogLevel::debug;
  if (v == "info") return LogLevel::info;
  return LogLevel::quiet;
}

inline LogLevel log_level() {
  static const LogLevel level = parse_log_level(std::getenv("SINGLQ_LOG"));
  return level;
}

inline void log_message(LogLevel level, std::string_view msg) {
  if (level == LogLevel::quiet || static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  const std::lock_guard<std::mutex> lock(mu);
  std::cerr << (level == LogLevel::debug ? "[debug] " : "[info] ") << msg << '\n';
}

inline void log_info(std::string_view msg) { log_message(LogLevel::info, msg); }
inline void log_debug(std::string_view msg) { log_message(LogLevel::debug, msg); }

}  // namespace singlq
