#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace otmatch::log {

enum class Level { error = 0, info = 1, debug = 2 };

// OTMATCH_LOG in {error, info, debug}; default error.
inline Level level() {
  static const Level lvl = [] {
    const char* v = std::getenv("OTMATCH_LOG");
    const std::string_view s = v ? v : "";
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    return Level::error;
  }();
  return lvl;
}

inline void write(Level at, std::string_view tag, const std::string& msg) {
  if (static_cast<int>(at) <= static_cast<int>(level())) std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void error(const std::string& msg) { write(Level::error, "error", msg); }
inline void info(const std::string& msg) { write(Level::info, "info", msg); }
inline void debug(const std::string& msg) { write(Level::debug, "debug", msg); }

}  // namespace otmatch::log
