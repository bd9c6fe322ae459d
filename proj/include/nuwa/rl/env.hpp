#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "nuwa/cc/controller.hpp"
#include "nuwa/netsim/simulator.hpp"

namespace nuwa::rl {

using core::SimTime;

/// What the receiver observes over one monitor interval.
struct MonitorSample {
  double g_bytes = 0.0;   // bytes received
  double w_pkts = 0.0;    // receiver window
  double r_bytes = 0.0;   // receive-buffer occupancy
  double l_us = 0.0;      // one-way delay of the last packet
};

inline constexpr std::array<double, 5> kActionMultipliers{0.25, 1.0, 1.05, 1.25, 2.85};
inline constexpr int kIdentityAction = 1;

struct RewardWeights {
  double gamma_w = 0.4;
  double theta_w = 0.4;
  double phi_w = 0.2;
  double alpha = 0.6;
  double epsilon_floor = 1e-6;
};

/// x^(1-α)/(1-α), or log(max(x, floor)) at α = 1. Throws ConfigError for α <= 0.
double alpha_utility(double x, double alpha, double epsilon_floor = 1e-6);

/// γ·U(b) - θ·U(τ_r) - φ·U(τ_l) with b in Mbit/s, τ_r in units of 100 ms
/// and τ_l a loss fraction.
double reward(double b_mbps, double tau_r, double tau_l, const RewardWeights& w = {});

/// clamp(round_half_up(k · multiplier[action]), 1, 9). Throws
/// ProtocolError for an action outside [0, 4].
int apply_action(int k, int action);

struct EnvConfig {
  netsim::LinkConfig link;
  cc::NuwaParams nuwa;
  owd::EstimatorConfig estimator;
  SimTime interval = std::chrono::milliseconds(100);
  int history = 10;
  int max_steps = 800;
  RewardWeights weights;
  /// Application drain rate of the receive buffer; 0 means the trace mean.
  double drain_bps = 0.0;

  void validate() const;
};

struct StepInfo {
  double b_mbps = 0.0;
  double tau_r = 0.0;
  double tau_l = 0.0;
  int k = 0;
  std::int64_t t_ms = 0;
};

struct StepResult {
  std::vector<double> obs;      // 4·history values in [0, 1], oldest first
  std::optional<double> reward; // empty after reset
  bool done = false;
  StepInfo info;
  MonitorSample raw;
};

/// One Nuwa flow over the configured link; the agent picks a k multiplier
/// each monitor interval. The trace is not looped.
class NuwaEnv {
 public:
  explicit NuwaEnv(EnvConfig cfg);
  ~NuwaEnv();

  StepResult reset();
  /// Throws ProtocolError before reset, after done, or for a bad action.
  StepResult step(int action);

  bool active() const noexcept { return sim_ != nullptr && !done_; }
  int k() const noexcept { return k_; }
  int steps() const noexcept { return steps_; }
  const EnvConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<double> observation() const;

  EnvConfig cfg_;
  std::unique_ptr<netsim::Simulator> sim_;
  std::deque<MonitorSample> history_;
  std::array<double, 4> running_max_{};
  int k_ = 7;
  int steps_ = 0;
  bool done_ = false;
  std::size_t seen_deliveries_ = 0;
  std::int64_t seen_losses_ = 0;
  double buffer_bytes_ = 0.0;
  double last_owd_us_ = 0.0;
  double drain_bps_ = 0.0;
};

}  // namespace nuwa::rl
