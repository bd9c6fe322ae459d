#include "nuwa/core/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "nuwa/error.hpp"

namespace nuwa::core {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// mt19937_64 is fully specified by the standard; the distributions are not,
// so uniforms are derived from raw output to stay portable.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

double TraceSchedule::mean_capacity_bps(int mtu) const {
  if (duration_ms <= 0) return 0.0;
  return static_cast<double>(opportunities.size()) * mtu * 8.0 * 1000.0 /
         static_cast<double>(duration_ms);
}

std::vector<double> TraceSchedule::capacity_series_bps(std::int64_t bucket_ms, int mtu) const {
  if (bucket_ms <= 0) throw ConfigError("capacity bucket must be positive");
  const auto buckets = static_cast<std::size_t>((duration_ms + bucket_ms - 1) / bucket_ms);
  std::vector<double> counts(buckets, 0.0);
  for (auto ms : opportunities) counts[static_cast<std::size_t>(ms / bucket_ms)] += 1.0;
  for (std::size_t i = 0; i < buckets; ++i) {
    const auto begin = static_cast<std::int64_t>(i) * bucket_ms;
    const auto len = std::min(bucket_ms, duration_ms - begin);
    counts[i] = counts[i] * mtu * 8.0 * 1000.0 / static_cast<double>(len);
  }
  return counts;
}

TraceSchedule parse_trace(std::string_view text) {
  TraceSchedule trace;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const auto line = trim(raw);
    if (line.empty()) continue;

    std::int64_t value = 0;
    const auto* first = line.data();
    const auto* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || line.front() == '-' || line.front() == '+') {
      throw ParseError("malformed trace line '" + std::string(line) + "'", line_no);
    }
    if (!trace.opportunities.empty() && value < trace.opportunities.back()) {
      throw ParseError("unsorted trace", line_no);
    }
    trace.opportunities.push_back(value);
  }
  if (trace.opportunities.empty()) throw ParseError("empty trace");
  trace.duration_ms = trace.opportunities.back() + 1;
  return trace;
}

std::string serialize_trace(const TraceSchedule& trace) {
  std::string out;
  out.reserve(trace.opportunities.size() * 6);
  for (auto ms : trace.opportunities) {
    out += std::to_string(ms);
    out += '\n';
  }
  return out;
}

TraceSchedule load_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

void save_trace_file(const TraceSchedule& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file '" + path.string() + "'");
  out << serialize_trace(trace);
}

TraceSchedule piecewise_trace(const std::vector<RateSegment>& segments, int mtu) {
  TraceSchedule trace;
  double credit = 0.0;
  std::int64_t now = 0;
  for (const auto& seg : segments) {
    if (seg.duration_ms <= 0 || seg.mbps < 0.0) throw ConfigError("invalid rate segment");
    const double per_ms = seg.mbps * 1e6 / (8.0 * mtu * 1000.0);
    for (std::int64_t i = 0; i < seg.duration_ms; ++i, ++now) {
      credit += per_ms;
      // Guard against 0.9999999 accumulating from repeated fractional adds.
      while (credit >= 1.0 - 1e-9) {
        trace.opportunities.push_back(now);
        credit -= 1.0;
      }
    }
  }
  trace.duration_ms = now;
  if (trace.opportunities.empty()) throw ConfigError("rate profile yields an empty trace");
  return trace;
}

TraceSchedule constant_trace(double mbps, std::int64_t duration_ms, int mtu) {
  return piecewise_trace({{duration_ms, mbps}}, mtu);
}

TraceSchedule square_wave_trace(double high_mbps, double low_mbps, std::int64_t half_period_ms,
                                std::int64_t duration_ms, int mtu) {
  std::vector<RateSegment> segs;
  bool high = true;
  for (std::int64_t t = 0; t < duration_ms; t += half_period_ms) {
    segs.push_back({std::min(half_period_ms, duration_ms - t), high ? high_mbps : low_mbps});
    high = !high;
  }
  return piecewise_trace(segs, mtu);
}

TraceSchedule fluctuating_trace(double min_mbps, double max_mbps, std::int64_t segment_ms,
                                std::int64_t duration_ms, std::uint64_t seed, int mtu) {
  if (min_mbps <= 0.0 || max_mbps < min_mbps) throw ConfigError("invalid rate bounds");
  std::mt19937_64 rng(seed);
  std::vector<RateSegment> segs;
  double rate = std::sqrt(min_mbps * max_mbps);
  for (std::int64_t t = 0; t < duration_ms; t += segment_ms) {
    segs.push_back({std::min(segment_ms, duration_ms - t), rate});
    rate = std::clamp(rate * std::exp(uniform01(rng) - 0.5), min_mbps, max_mbps);
  }
  return piecewise_trace(segs, mtu);
}

}  // namespace nuwa::core
