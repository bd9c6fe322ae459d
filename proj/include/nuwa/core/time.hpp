#pragma once

#include <chrono>
#include <cstdint>

namespace nuwa::core {

/// Simulation clock: integer microseconds since simulation start.
using SimTime = std::chrono::duration<std::int64_t, std::micro>;

inline constexpr SimTime from_ms(std::int64_t ms) { return SimTime{ms * 1000}; }

inline constexpr double to_seconds(SimTime t) {
  return static_cast<double>(t.count()) * 1e-6;
}

inline constexpr std::int64_t to_ms(SimTime t) { return t.count() / 1000; }

}  // namespace nuwa::core
