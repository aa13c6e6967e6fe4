#pragma once

#include <string>

namespace dhnet::log {

enum class Level { off = 0, warn = 1, info = 2, debug = 3 };

// Parsed once from the DHNET_LOG environment variable
// (off|warn|info|debug or 0..3). Default: warn.
Level level();
void set_level(Level lvl);

void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

// Rate-limited warning for hot loops: logs the first few occurrences per
// tag, then every 10000th.
void warn_throttled(const std::string& tag, const std::string& msg);

}  // namespace dhnet::log
