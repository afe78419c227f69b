#include "tsclimb/log.hpp"

#include <cstdio>
#include <cstdlib>

namespace tsclimb {

namespace {
LogLevel g_level = LogLevel::Error;
}

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void set_log_level_from_env() {
  const char* env = std::getenv("TSCLIMB_LOG");
  if (!env) return;
  const std::string v(env);
  if (v == "error") g_level = LogLevel::Error;
  else if (v == "info") g_level = LogLevel::Info;
  else if (v == "debug") g_level = LogLevel::Debug;
}

void log_error(const std::string& msg) { std::fprintf(stderr, "[tsclimb] error: %s\n", msg.c_str()); }

void log_info(const std::string& msg) {
  if (g_level >= LogLevel::Info) std::fprintf(stderr, "[tsclimb] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (g_level >= LogLevel::Debug) std::fprintf(stderr, "[tsclimb] debug: %s\n", msg.c_str());
}

}  // namespace tsclimb
