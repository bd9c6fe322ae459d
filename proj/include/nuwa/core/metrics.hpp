#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nuwa/core/time.hpp"
#include "nuwa/core/trace.hpp"

namespace nuwa::core {

using FlowId = std::uint32_t;

/// Width of the throughput / CSV buckets; matches the RL monitor interval.
inline constexpr SimTime kMetricsBucket = from_ms(100);

struct Packet {
  FlowId flow_id = 0;
  std::int64_t seq = 0;
  std::int32_t size = kDefaultMtu;
  SimTime sent_at{};
  std::optional<SimTime> delivered_at;
  bool dropped = false;
};

/// What the receiver returns for each data packet.
struct AckFeedback {
  FlowId flow_id = 0;
  std::int64_t acked_seq = 0;
  SimTime sent_at{};
  SimTime received_at{};
  /// Receiver-computed window in packets; integral on the wire.
  std::int64_t advertised_window = 0;
};

/// A packet that reached the receiver.
struct DeliverySample {
  SimTime t{};                 // receive time
  std::int64_t queue_wait_us;  // dequeue - enqueue at the bottleneck
  std::int64_t owd_us;         // receive - send
  std::int32_t bytes;
};

struct TimedValue {
  SimTime t{};
  double value = 0.0;
};

struct FlowMetrics {
  std::int64_t packets_sent = 0;
  std::int64_t packets_delivered = 0;
  std::int64_t bytes_delivered = 0;
  std::int64_t packets_lost = 0;  // queue overflow + random loss
  std::vector<DeliverySample> deliveries;
  std::vector<TimedValue> rtt_samples;  // µs, at ACK arrival
  std::vector<SimTime> loss_times;      // time of the drop at the bottleneck
  /// Estimator output (µs) per received packet; aligned with `deliveries`
  /// for flows with a delay-estimating receiver, empty otherwise.
  std::vector<TimedValue> qd_estimates;
  /// Bytes received per kMetricsBucket.
  std::vector<std::int64_t> bucket_bytes;
  /// Sending window in packets at the end of each bucket.
  std::vector<double> bucket_window;

  /// Bits per second per bucket.
  std::vector<double> throughput_series() const;
};

struct TimeRange {
  SimTime begin{};
  SimTime end{};
};

struct Summary {
  double mean_queue_delay_us = 0.0;
  double max_queue_delay_us = 0.0;
  double loss_rate = 0.0;
  std::int64_t bytes = 0;
  std::int64_t packets_lost = 0;
  double mean_throughput_bps = 0.0;
  double mean_rtt_us = 0.0;
};

/// Aggregates over samples with t in [begin, end). Throws ConfigError for an
/// empty or inverted window.
Summary summarize(const FlowMetrics& metrics, TimeRange window);

/// Loss rate lost / (lost + delivered); 0 when nothing was sent.
double loss_rate(std::int64_t lost, std::int64_t delivered);

/// Jain's fairness index (Σx)² / (n·Σx²). Throws UndefinedError on empty or
/// all-zero input and ConfigError on negative rates.
double jain_index(std::span<const double> rates);

/// Writes the per-bucket CSV
/// `t_ms,flow,cwnd_pkts,rtt_us,qdelay_us,thru_bps,lost` for every flow.
void write_metrics_csv(std::ostream& out, std::span<const FlowMetrics> flows);

inline constexpr const char* kMetricsCsvHeader = "t_ms,flow,cwnd_pkts,rtt_us,qdelay_us,thru_bps,lost";

}  // namespace nuwa::core
