#include "dvseg/common.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace dvseg {

namespace {

std::mutex g_log_mutex;

WarningHandler& handler_slot() {
  static WarningHandler handler;
  return handler;
}

}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  handler_slot() = std::move(handler);
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (handler_slot()) {
    handler_slot()(message);
  } else {
    std::cerr << "[warn] " << message << "\n";
  }
}

int verbosity() {
  static const int level = [] {
    const char* env = std::getenv("DVSEG_VERBOSITY");
    if (env == nullptr) return 1;
    return std::atoi(env);
  }();
  return level;
}

void info(const std::string& message) {
  if (verbosity() >= 1) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << message << "\n";
  }
}

}  // namespace dvseg
