#include "dhnet/log.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>

namespace dhnet::log {

namespace {

Level parse_env() {
    const char* raw = std::getenv("DHNET_LOG");
    if (!raw) return Level::warn;
    std::string s(raw);
    if (s == "off" || s == "0") return Level::off;
    if (s == "warn" || s == "1") return Level::warn;
    if (s == "info" || s == "2") return Level::info;
    if (s == "debug" || s == "3") return Level::debug;
    return Level::warn;
}

Level& current() {
    static Level lvl = parse_env();
    return lvl;
}

std::mutex& mtx() {
    static std::mutex m;
    return m;
}

void emit(const char* tag, const std::string& msg) {
    std::lock_guard<std::mutex> lock(mtx());
    std::cerr << "[dhnet " << tag << "] " << msg << "\n";
}

}  // namespace

Level level() { return current(); }
void set_level(Level lvl) { current() = lvl; }

void warn(const std::string& msg) {
    if (level() >= Level::warn) emit("warn", msg);
}

void info(const std::string& msg) {
    if (level() >= Level::info) emit("info", msg);
}

void debug(const std::string& msg) {
    if (level() >= Level::debug) emit("debug", msg);
}

void warn_throttled(const std::string& tag, const std::string& msg) {
    if (level() < Level::warn) return;
    static std::map<std::string, long> counts;
    long n;
    {
        std::lock_guard<std::mutex> lock(mtx());
        n = counts[tag]++;
    }
    if (n < 3 || n % 10000 == 0) {
        emit("warn", msg + (n >= 3 ? " (repeated)" : ""));
    }
}

}  // namespace dhnet::log
