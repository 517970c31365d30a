#include "dvgo/log.hpp"

#include <cstdarg>
#include <cstdlib>
#include <cstring>

namespace dvgo::log {

static Level parse_env() {
  const char* v = std::getenv("DVGO_LOG");
  if (!v) return Level::info;
  if (std::strcmp(v, "error") == 0) return Level::error;
  if (std::strcmp(v, "debug") == 0) return Level::debug;
  return Level::info;
}

Level level() {
  static Level lv = parse_env();
  return lv;
}

bool enabled(Level lv) { return static_cast<int>(lv) <= static_cast<int>(level()); }

void vprintf_at(Level lv, const char* fmt, ...) {
  if (!enabled(lv)) return;
  std::va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
  va_end(args);
}

}  // namespace dvgo::log
