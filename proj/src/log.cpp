#include "hbmc/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace hbmc {

namespace {

std::atomic<LogLevel> g_level{LogLevel::quiet};
std::mutex g_mutex;

void emit(const char* tag, const std::string& message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[hbmc " << tag << "] " << message << '\n';
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_info(const std::string& message) {
  if (g_level.load() >= LogLevel::info) emit("info", message);
}

void log_debug(const std::string& message) {
  if (g_level.load() >= LogLevel::debug) emit("debug", message);
}

void log_warn(const std::string& message) { emit("warn", message); }

}  // namespace hbmc
