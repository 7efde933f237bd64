#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace medcbr::log {

enum class Level { kInfo, kWarn, kError };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level level, std::string_view msg) {
    static constexpr const char* kTags[] = {"info", "warn", "error"};
    std::cerr << "[medcbr " << kTags[static_cast<int>(level)] << "] " << msg << '\n';
  };
  return s;
}
inline std::atomic<bool>& quiet() {
  static std::atomic<bool> q{false};
  return q;
}
}  // namespace detail

// Replace the process-wide sink. Returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::sink_mutex());
  return std::exchange(detail::sink(), std::move(s));
}

inline void set_quiet(bool q) { detail::quiet() = q; }

inline void write(Level level, std::string_view msg) {
  std::lock_guard lock(detail::sink_mutex());
  if (detail::quiet() && level == Level::kInfo) return;
  detail::sink()(level, msg);
}

inline void info(std::string_view msg) { write(Level::kInfo, msg); }
inline void warn(std::string_view msg) { write(Level::kWarn, msg); }
inline void error(std::string_view msg) { write(Level::kError, msg); }

}  // namespace medcbr::log
