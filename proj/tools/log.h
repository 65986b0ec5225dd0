#pragma once

// stderr logging; verbosity from DESM_LOG (error, warn, info, debug).

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace desm::cli {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("DESM_LOG");
    std::string v = env ? env : "info";
    if (v == "error") return Level::kError;
    if (v == "warn") return Level::kWarn;
    if (v == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return level;
}

template <class... Args>
void log(Level level, const Args&... args) {
  if (level > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  os << "[" << names[static_cast<int>(level)] << "] ";
  (os << ... << args);
  std::cerr << os.str() << '\n';
}

}  // namespace desm::cli
