#include "nuwa/core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nuwa/error.hpp"

namespace nuwa::core {

namespace {

std::size_t bucket_of(SimTime t) { return static_cast<std::size_t>(t / kMetricsBucket); }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<double> FlowMetrics::throughput_series() const {
  std::vector<double> out;
  out.reserve(bucket_bytes.size());
  const double seconds = to_seconds(kMetricsBucket);
  for (auto b : bucket_bytes) out.push_back(static_cast<double>(b) * 8.0 / seconds);
  return out;
}

double loss_rate(std::int64_t lost, std::int64_t delivered) {
  const auto total = lost + delivered;
  return total == 0 ? 0.0 : static_cast<double>(lost) / static_cast<double>(total);
}

Summary summarize(const FlowMetrics& metrics, TimeRange window) {
  if (window.end <= window.begin) throw ConfigError("empty summary window");
  const auto in_window = [&](SimTime t) { return t >= window.begin && t < window.end; };

  Summary s;
  std::int64_t delivered = 0;
  double qsum = 0.0;
  for (const auto& d : metrics.deliveries) {
    if (!in_window(d.t)) continue;
    ++delivered;
    s.bytes += d.bytes;
    qsum += static_cast<double>(d.queue_wait_us);
    s.max_queue_delay_us = std::max(s.max_queue_delay_us, static_cast<double>(d.queue_wait_us));
  }
  if (delivered > 0) s.mean_queue_delay_us = qsum / static_cast<double>(delivered);

  s.packets_lost = std::count_if(metrics.loss_times.begin(), metrics.loss_times.end(), in_window);
  s.loss_rate = loss_rate(s.packets_lost, delivered);
  s.mean_throughput_bps = static_cast<double>(s.bytes) * 8.0 / to_seconds(window.end - window.begin);

  double rsum = 0.0;
  std::int64_t rn = 0;
  for (const auto& r : metrics.rtt_samples) {
    if (!in_window(r.t)) continue;
    rsum += r.value;
    ++rn;
  }
  if (rn > 0) s.mean_rtt_us = rsum / static_cast<double>(rn);
  return s;
}

double jain_index(std::span<const double> rates) {
  if (rates.empty()) throw UndefinedError("jain index of an empty set");
  double sum = 0.0;
  double sq = 0.0;
  for (double x : rates) {
    if (x < 0.0 || !std::isfinite(x)) throw ConfigError("jain index needs finite non-negative rates");
    sum += x;
    sq += x * x;
  }
  if (sq == 0.0) throw UndefinedError("jain index undefined for all-zero rates");
  return sum * sum / (static_cast<double>(rates.size()) * sq);
}

void write_metrics_csv(std::ostream& out, std::span<const FlowMetrics> flows) {
  out << kMetricsCsvHeader << '\n';
  std::size_t buckets = 0;
  for (const auto& f : flows) buckets = std::max(buckets, f.bucket_bytes.size());

  struct Acc {
    double rtt_sum = 0, q_sum = 0;
    std::int64_t rtt_n = 0, q_n = 0, lost = 0;
  };
  const double bucket_s = to_seconds(kMetricsBucket);

  std::vector<std::vector<Acc>> acc(flows.size(), std::vector<Acc>(buckets));
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto& f = flows[i];
    for (const auto& r : f.rtt_samples) {
      const auto b = bucket_of(r.t);
      if (b >= buckets) continue;
      acc[i][b].rtt_sum += r.value;
      ++acc[i][b].rtt_n;
    }
    for (const auto& d : f.deliveries) {
      const auto b = bucket_of(d.t);
      if (b >= buckets) continue;
      acc[i][b].q_sum += static_cast<double>(d.queue_wait_us);
      ++acc[i][b].q_n;
    }
    for (auto t : f.loss_times) {
      const auto b = bucket_of(t);
      if (b < buckets) ++acc[i][b].lost;
    }
  }

  for (std::size_t b = 0; b < buckets; ++b) {
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto& f = flows[i];
      const auto& a = acc[i][b];
      const double window = b < f.bucket_window.size() ? f.bucket_window[b] : 0.0;
      const double bytes = b < f.bucket_bytes.size() ? static_cast<double>(f.bucket_bytes[b]) : 0.0;
      out << (static_cast<std::int64_t>(b) + 1) * to_ms(kMetricsBucket) << ',' << i << ','
          << format_number(window) << ','
          << format_number(a.rtt_n ? a.rtt_sum / static_cast<double>(a.rtt_n) : 0.0) << ','
          << format_number(a.q_n ? a.q_sum / static_cast<double>(a.q_n) : 0.0) << ','
          << format_number(bytes * 8.0 / bucket_s) << ',' << a.lost << '\n';
    }
  }
}

}  // namespace nuwa::core
