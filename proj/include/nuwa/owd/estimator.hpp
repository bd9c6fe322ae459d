#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>

#include "nuwa/core/time.hpp"

namespace nuwa::owd {

using core::SimTime;

enum class SignConvention {
  /// (R_t - R_m) - (Q_t - Q_m): grows with congestion.
  kCongestionPositive,
  /// (Q_t - Q_m) - (R_t - R_m), the literal printed form; kept for reproduction.
  kAsPrinted,
};

/// Raw one-way queueing delay in µs: current OWD minus the reference minimum
/// OWD. Sender and receiver clocks may have arbitrary offsets; only
/// differences of same-clock timestamps are used.
std::int64_t measure_raw(SimTime sent, SimTime received, SimTime min_sent, SimTime min_received,
                         SignConvention sign = SignConvention::kCongestionPositive);

struct MinOwdEntry {
  SimTime received{};
  SimTime sent{};
  std::int64_t owd_us = 0;  // received - sent, may be negative across clocks
  std::uint64_t group = 0;
};

/// Sliding-window minimum of OWD over the last `length` of receive time.
/// Kept as a monotone deque, so only entries that can still become the
/// minimum are stored.
class MinOwdWindow {
 public:
  explicit MinOwdWindow(SimTime length = std::chrono::seconds(10)) : length_(length) {}

  /// Drops entries received before `now - length`.
  void advance(SimTime now);
  /// Evicts stale entries relative to the entry's receive time, then inserts.
  void update(const MinOwdEntry& entry);

  bool empty() const noexcept { return entries_.empty(); }
  /// Entry with the smallest OWD in the window; nullopt before any sample.
  std::optional<MinOwdEntry> min() const;
  SimTime length() const noexcept { return length_; }
  std::size_t stored() const noexcept { return entries_.size(); }

 private:
  SimTime length_;
  std::deque<MinOwdEntry> entries_;
};

/// Groups packets into fixed receive-time buckets and reports the byte
/// difference ΔM between the latest closed bucket and a reference bucket.
class GroupAccumulator {
 public:
  explicit GroupAccumulator(SimTime span = std::chrono::milliseconds(5),
                            SimTime retention = std::chrono::seconds(11))
      : span_(span), retention_(retention) {}

  /// Accounts a packet and returns the id of the bucket it falls into.
  std::uint64_t add(SimTime received, std::int64_t bytes);

  /// Bytes of the most recently closed bucket minus bytes of `reference`.
  /// Zero until both buckets are closed and still retained.
  std::int64_t delta_bytes(std::uint64_t reference) const;

  std::optional<std::int64_t> closed_bytes(std::uint64_t id) const;
  SimTime span() const noexcept { return span_; }

 private:
  struct Closed {
    std::uint64_t id;
    SimTime start;
    std::int64_t bytes;
  };

  SimTime span_;
  SimTime retention_;
  bool open_ = false;
  std::uint64_t current_id_ = 0;
  SimTime current_start_{};
  std::int64_t current_bytes_ = 0;
  std::deque<Closed> closed_;
};

struct KalmanConfig {
  /// Prior on 1/B in µs per byte (0.8 µs/B is 10 Mbit/s).
  double initial_inv_capacity = 0.8;
  double initial_q_delay_us = 0.0;
  /// Initial covariance diagonal: (µs/B)², µs².
  std::array<double, 2> initial_covariance{1e6, 1e6};
  /// Random-walk process noise diagonal per update: (µs/B)², µs².
  std::array<double, 2> process_noise{1e-2, 1e6};
  /// Measurement noise variance, µs².
  double measurement_noise_var = 1e6;
};

/// Filter state η = (1/B, Q_d) with its covariance.
struct KalmanState {
  double inv_capacity = 0.0;  // µs per byte
  double q_delay_us = 0.0;
  std::array<std::array<double, 2>, 2> covariance{};
  std::array<double, 2> last_gain{};

  static KalmanState initial(const KalmanConfig& cfg);
};

/// One predict + correct step with measurement D_c = ΔM·(1/B) + Q_d + noise.
/// Uses the Joseph-form covariance update and clamps Q_d at zero. Throws
/// ConfigError on non-finite inputs.
KalmanState kalman_update(const KalmanState& state, double d_c_us, double delta_m_bytes,
                          const KalmanConfig& cfg);

/// Scalar form of the Q_d correction for a given gain:
/// (1 - K)·Q_prev + K·(D_c - ΔM/B_prev).
double correct_q_delay(double q_prev_us, double gain, double d_c_us, double delta_m_bytes,
                       double inv_capacity_prev);

struct EstimatorConfig {
  SimTime min_window = std::chrono::seconds(10);
  SimTime group_span = std::chrono::milliseconds(5);
  KalmanConfig kalman{};
  SignConvention sign = SignConvention::kCongestionPositive;
};

/// Everything the estimator derived from one packet.
struct OwdSample {
  std::int64_t d_c_us = 0;
  std::int64_t delta_m_bytes = 0;
  double q_delay_us = 0.0;
  double gain = 0.0;  // q_delay component of the Kalman gain
};

/// Per-flow receiver-side queueing-delay estimator: raw measurement against
/// the windowed minimum, grouping, and Kalman filtering.
class OwdEstimator {
 public:
  explicit OwdEstimator(EstimatorConfig cfg = {});

  OwdSample on_packet(SimTime sent, SimTime received, std::int64_t bytes);

  const KalmanState& kalman() const noexcept { return kalman_; }
  const MinOwdWindow& min_window() const noexcept { return window_; }
  const EstimatorConfig& config() const noexcept { return cfg_; }

 private:
  EstimatorConfig cfg_;
  MinOwdWindow window_;
  GroupAccumulator groups_;
  KalmanState kalman_;
};

}  // namespace nuwa::owd
