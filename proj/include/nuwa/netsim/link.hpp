#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "nuwa/core/metrics.hpp"
#include "nuwa/core/trace.hpp"

namespace nuwa::netsim {

using core::Packet;
using core::SimTime;

inline constexpr std::int64_t kUnlimitedQueue = std::int64_t{1} << 40;

struct LinkConfig {
  core::TraceSchedule trace;
  std::int64_t queue_capacity = 250;  // packets
  /// Sender to receiver; the bottleneck sits halfway.
  SimTime one_way_prop_delay = std::chrono::milliseconds(20);
  /// Receiver to sender, ACK path (lossless, unqueued).
  SimTime reverse_path_delay = std::chrono::milliseconds(20);
  /// Optional impairment: uniform extra ACK delay in [0, jitter).
  SimTime reverse_jitter{0};
  double random_loss_rate = 0.0;
  std::uint64_t rng_seed = 1;
  bool loop_trace = true;
  int mtu = core::kDefaultMtu;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  SimTime to_bottleneck() const { return one_way_prop_delay / 2; }
  SimTime from_bottleneck() const { return one_way_prop_delay - one_way_prop_delay / 2; }
};

enum class EnqueueResult { kAccepted, kDropped };

struct Departure {
  Packet packet;
  SimTime queue_wait{};
};

/// FIFO droptail queue of the bottleneck.
class BottleneckQueue {
 public:
  explicit BottleneckQueue(std::int64_t capacity) : capacity_(capacity) {}

  /// Droptail: refuses the packet iff the queue already holds `capacity`.
  EnqueueResult enqueue(const Packet& pkt, SimTime now);

  /// Uses one delivery opportunity. The head-of-line packet departs with its
  /// wait recorded; an opportunity finding the queue empty is lost.
  std::optional<Departure> deliver_opportunity(SimTime now);

  std::int64_t occupancy() const noexcept { return static_cast<std::int64_t>(queue_.size()); }
  std::int64_t capacity() const noexcept { return capacity_; }
  /// Packets of `flow` currently queued.
  std::int64_t count_flow(core::FlowId flow) const;

 private:
  struct Queued {
    Packet packet;
    SimTime enqueued_at;
  };
  std::int64_t capacity_;
  std::deque<Queued> queue_;
};

/// Walks the trace's delivery opportunities in time order, repeating the
/// trace with an offset of its duration when looping is enabled.
class OpportunityCursor {
 public:
  OpportunityCursor(const core::TraceSchedule& trace, bool loop) : trace_(&trace), loop_(loop) {}

  /// Next opportunity time, or nullopt once a non-looping trace is exhausted.
  std::optional<SimTime> peek() const;
  void advance();

 private:
  const core::TraceSchedule* trace_;
  bool loop_;
  std::size_t index_ = 0;
  std::int64_t cycle_ = 0;
};

}  // namespace nuwa::netsim
