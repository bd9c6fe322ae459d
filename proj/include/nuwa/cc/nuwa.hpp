#pragma once

#include <cstdint>

#include "nuwa/fixed/tanh.hpp"
#include "nuwa/owd/estimator.hpp"

namespace nuwa::cc {

using core::SimTime;
using fixed::FixedQ;

inline constexpr int kMinAggressiveness = 1;
inline constexpr int kMaxAggressiveness = 9;

struct NuwaParams {
  std::int64_t target_delay_us = 5000;  // T_d
  std::int64_t sensitivity_us = 2500;   // ρ
  int k = 7;
  double w_min = 2.0;
  double w_max = 10000.0;
  double w_initial = 10.0;

  /// Throws ConfigError unless T_d >= 0, ρ > 0, k in [1, 9] and
  /// 0 < w_min <= w_initial <= w_max.
  void validate() const;
};

/// θ = tanh((T_d - Q_d) / ρ) with the quotient truncated into Q10.
FixedQ compute_trend(std::int64_t target_delay_us, std::int64_t q_delay_us,
                     std::int64_t sensitivity_us);

/// w_old + θ·k / w_old, clamped to [w_min, w_max].
double update_window(double w_old, FixedQ theta, int k, double w_min, double w_max);

/// Window the sender actually uses: the receiver's advertised value once
/// Nuwa governs congestion avoidance, the sender's own cwnd before that.
double sender_apply(std::int64_t advertised, double local_cwnd, bool congestion_avoidance);

/// Everything one received packet produced, for tracing.
struct NuwaUpdate {
  owd::OwdSample owd;
  FixedQ x{};
  FixedQ theta{};
  double window = 0.0;
  std::int64_t advertised = 0;
};

/// Receiver half of Nuwa: per data packet, estimate the queueing delay,
/// derive the trend and move the window that is advertised back in ACKs.
class NuwaReceiver {
 public:
  explicit NuwaReceiver(NuwaParams params = {}, owd::EstimatorConfig estimator = {});

  NuwaUpdate on_packet(SimTime sent, SimTime received, std::int64_t bytes);

  /// Window field value carried by the next ACK (floor of w).
  std::int64_t advertised() const noexcept;
  double window() const noexcept { return w_; }
  FixedQ last_theta() const noexcept { return last_theta_; }
  const NuwaParams& params() const noexcept { return params_; }
  const owd::OwdEstimator& estimator() const noexcept { return estimator_; }

  /// Changes the aggressiveness; throws ConfigError outside [1, 9].
  void set_k(int k);

 private:
  NuwaParams params_;
  owd::OwdEstimator estimator_;
  double w_;
  FixedQ last_theta_{};
};

}  // namespace nuwa::cc
