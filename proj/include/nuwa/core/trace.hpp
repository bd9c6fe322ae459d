#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nuwa/core/time.hpp"

namespace nuwa::core {

inline constexpr int kDefaultMtu = 1500;

/// Delivery opportunities of a trace-driven bottleneck. Each entry is the
/// millisecond at which one MTU-sized packet may leave the queue; repeated
/// entries mean several packets in the same millisecond.
struct TraceSchedule {
  std::vector<std::int64_t> opportunities;
  std::int64_t duration_ms = 0;

  std::size_t size() const noexcept { return opportunities.size(); }

  /// Mean capacity over the whole trace in bits per second.
  double mean_capacity_bps(int mtu = kDefaultMtu) const;

  /// Capacity in bits per second over consecutive buckets of `bucket_ms`.
  /// The last partial bucket is scaled by its true length.
  std::vector<double> capacity_series_bps(std::int64_t bucket_ms, int mtu = kDefaultMtu) const;
};

/// Parses the newline-delimited millisecond format. Blank lines are skipped;
/// anything else must be a non-negative base-10 integer, in ascending order.
/// Throws ParseError (with line number) on malformed or unsorted input and on
/// a trace with no opportunities.
TraceSchedule parse_trace(std::string_view text);

/// Inverse of parse_trace.
std::string serialize_trace(const TraceSchedule& trace);

TraceSchedule load_trace_file(const std::filesystem::path& path);
void save_trace_file(const TraceSchedule& trace, const std::filesystem::path& path);

/// One piece of a piecewise-constant capacity profile.
struct RateSegment {
  std::int64_t duration_ms;
  double mbps;
};

/// Builds a trace realizing the given piecewise-constant rates. Fractional
/// packets per millisecond carry over between milliseconds and segments, so
/// long-run capacity matches the requested rate exactly.
TraceSchedule piecewise_trace(const std::vector<RateSegment>& segments, int mtu = kDefaultMtu);

TraceSchedule constant_trace(double mbps, std::int64_t duration_ms, int mtu = kDefaultMtu);

/// Alternates between `high_mbps` and `low_mbps` every `half_period_ms`,
/// starting high.
TraceSchedule square_wave_trace(double high_mbps, double low_mbps, std::int64_t half_period_ms,
                                std::int64_t duration_ms, int mtu = kDefaultMtu);

/// Random-walk capacity in [min_mbps, max_mbps] re-drawn every `segment_ms`,
/// deterministic in `seed`. Stand-in for a fluctuating cellular trace.
TraceSchedule fluctuating_trace(double min_mbps, double max_mbps, std::int64_t segment_ms,
                                std::int64_t duration_ms, std::uint64_t seed,
                                int mtu = kDefaultMtu);

}  // namespace nuwa::core
