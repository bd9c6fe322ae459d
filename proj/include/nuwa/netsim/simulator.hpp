#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "nuwa/cc/controller.hpp"
#include "nuwa/cc/nuwa.hpp"
#include "nuwa/core/metrics.hpp"
#include "nuwa/netsim/link.hpp"

namespace nuwa::netsim {

/// Reorder tolerance of the sender's gap-based loss detection.
inline constexpr std::int64_t kReorderThreshold = 3;
inline constexpr SimTime kMinRto = std::chrono::milliseconds(200);
/// Window field value for receivers that do not limit the sender.
inline constexpr std::int64_t kUnlimitedAdvertisedWindow = std::int64_t{1} << 30;

struct FlowSpec {
  SimTime start{};
  cc::ControllerSpec controller{};
};

struct SimOptions {
  /// Newline-delimited JSON event records; nullptr disables logging.
  std::ostream* event_log = nullptr;
};

struct SimResult {
  std::vector<core::FlowMetrics> flows;
  SimTime duration{};
  std::int64_t opportunities_used = 0;
  std::int64_t opportunities_wasted = 0;
};

/// Deterministic discrete-event simulation of one trace-driven bottleneck
/// shared by several flows. Simultaneous events run in the order arrival at
/// the bottleneck, delivery opportunity, arrival at the receiver, ACK,
/// timer, then by insertion order.
class Simulator {
 public:
  Simulator(LinkConfig link, std::vector<FlowSpec> flows, SimOptions opts = {});
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Processes every event strictly before `end`; afterwards now() == end.
  void run_until(SimTime end);

  SimTime now() const noexcept { return now_; }
  std::size_t flow_count() const noexcept { return flows_.size(); }
  const core::FlowMetrics& metrics(std::size_t flow) const;
  const cc::SenderController& sender(std::size_t flow) const;
  /// Receiver-side Nuwa state, nullptr for flows with other controllers.
  cc::NuwaReceiver* nuwa_receiver(std::size_t flow);
  std::int64_t queue_length() const noexcept { return queue_.occupancy(); }
  /// Packets of `flow` sitting in the queue or propagating on the forward path.
  std::int64_t in_network(std::size_t flow) const;
  const LinkConfig& link() const noexcept { return link_; }

  /// Moves the collected metrics out; the simulator must not be used after.
  SimResult finish();

 private:
  enum class EventKind : std::uint8_t { kEnqueue, kDelivery, kReceive, kAck, kTimer };
  enum class TimerKind : std::uint8_t { kFlowStart, kRto, kTick };

  struct Event {
    SimTime t{};
    EventKind kind{};
    std::uint64_t order = 0;
    std::uint32_t flow = 0;
    TimerKind timer{};
    core::Packet packet{};
    std::int64_t aux = 0;  // queue wait (receive) or advertised window (ack)
    SimTime aux_t{};       // receive time (ack)
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const;
  };

  struct Outstanding {
    std::int64_t seq;
    SimTime sent_at;
    enum class State : std::uint8_t { kInFlight, kAcked, kLost } state;
  };
  struct Flow;

  void push(Event ev);
  void handle(const Event& ev);
  void on_enqueue(const Event& ev);
  void on_delivery(const Event& ev);
  void on_receive(const Event& ev);
  void on_ack(const Event& ev);
  void on_timer(const Event& ev);
  void try_send(std::uint32_t flow);
  void arm_rto(std::uint32_t flow);
  void record_drop(const core::Packet& pkt, const char* cause);
  void schedule_next_opportunity();
  SimTime rto(const Flow& f) const;
  double uniform();

  class EventLog;

  LinkConfig link_;
  SimOptions opts_;
  std::vector<std::unique_ptr<Flow>> flows_;
  std::vector<Event> heap_;
  std::uint64_t next_order_ = 0;
  SimTime now_{};
  BottleneckQueue queue_;
  OpportunityCursor cursor_;
  std::mt19937_64 rng_;
  std::unique_ptr<EventLog> log_;
  std::int64_t opportunities_used_ = 0;
  std::int64_t opportunities_wasted_ = 0;
  SimTime next_tick_{};
};

/// Runs a complete scenario for `duration`. Throws ConfigError when the
/// trace is shorter than the duration and looping is disabled, or when no
/// flow is given.
SimResult run(const LinkConfig& link, const std::vector<FlowSpec>& flows, SimTime duration,
              SimOptions opts = {});

}  // namespace nuwa::netsim
