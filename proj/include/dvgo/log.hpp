#pragma once

#include <cstdio>

namespace dvgo::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Current level, resolved once from the DVGO_LOG environment variable
/// (error|info|debug, default info).
Level level();

bool enabled(Level lv);

void vprintf_at(Level lv, const char* fmt, ...);

}  // namespace dvgo::log

#define DVGO_LOG_ERROR(...) ::dvgo::log::vprintf_at(::dvgo::log::Level::error, __VA_ARGS__)
#define DVGO_LOG_INFO(...) ::dvgo::log::vprintf_at(::dvgo::log::Level::info, __VA_ARGS__)
#define DVGO_LOG_DEBUG(...) ::dvgo::log::vprintf_at(::dvgo::log::Level::debug, __VA_ARGS__)
