#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "nuwa/cc/nuwa.hpp"
#include "nuwa/core/time.hpp"
#include "nuwa/owd/estimator.hpp"

namespace nuwa::cc {

using core::SimTime;

struct AckContext {
  SimTime now{};
  SimTime rtt{};
  std::int64_t acked_seq = 0;
  std::int64_t advertised_window = 0;
};

/// A gap report: `lost_seq` was declared lost while `highest_sent` was the
/// last sequence number put on the wire.
struct LossContext {
  SimTime now{};
  std::int64_t lost_seq = 0;
  std::int64_t highest_sent = 0;
};

/// Sender-side window controller driven by the simulator.
class SenderController {
 public:
  virtual ~SenderController() = default;

  /// Sending window in packets.
  virtual double window() const = 0;
  virtual void on_ack(const AckContext& ack) = 0;
  virtual void on_loss(const LossContext& loss) = 0;
  virtual void on_timeout(SimTime now) = 0;
  virtual std::string_view name() const = 0;
};

/// Coalesces losses so that at most one reduction happens per window of
/// data: a loss only counts if it was sent after the last reduction.
class RecoveryGate {
 public:
  bool admit(const LossContext& loss) {
    if (loss.lost_seq <= recovery_seq_) return false;
    recovery_seq_ = loss.highest_sent;
    return true;
  }
  void reset(std::int64_t highest_sent) { recovery_seq_ = highest_sent; }

 private:
  std::int64_t recovery_seq_ = -1;
};

/// Nuwa on the sender: native slow start, then the window is whatever the
/// receiver advertises. The handoff happens at the first congestion event
/// or when cwnd reaches `handoff_window`, whichever comes first.
class NuwaSender final : public SenderController {
 public:
  explicit NuwaSender(double initial_window = 10.0, double handoff_window = 16.0);

  double window() const override { return cwnd_; }
  void on_ack(const AckContext& ack) override;
  void on_loss(const LossContext& loss) override;
  void on_timeout(SimTime now) override;
  std::string_view name() const override { return "nuwa"; }

  bool in_congestion_avoidance() const noexcept { return avoidance_; }

 private:
  double cwnd_;
  double handoff_;
  bool avoidance_ = false;
  std::int64_t last_advertised_ = 0;
};

struct CubicConfig {
  double c = 0.4;     // packets / s³
  double beta = 0.7;  // multiplicative decrease
  double initial_window = 10.0;
};

/// Standard CUBIC growth with slow start; no TCP-friendly region and no
/// fast convergence.
class Cubic final : public SenderController {
 public:
  explicit Cubic(CubicConfig cfg = {});

  double window() const override { return cwnd_; }
  void on_ack(const AckContext& ack) override;
  void on_loss(const LossContext& loss) override;
  void on_timeout(SimTime now) override;
  std::string_view name() const override { return "cubic"; }

  /// W(t) = C·(t - K)³ + w_max for t seconds into the current epoch.
  double cubic_window(double t_since_epoch_s) const;

  double w_max() const noexcept { return w_max_; }
  double k_seconds() const noexcept { return k_; }
  double ssthresh() const noexcept { return ssthresh_; }
  bool in_slow_start() const noexcept { return cwnd_ < ssthresh_; }
  SimTime epoch_start() const noexcept { return epoch_start_; }

 private:
  CubicConfig cfg_;
  double cwnd_;
  double ssthresh_;
  double w_max_ = 0.0;
  double k_ = 0.0;
  SimTime epoch_start_{};
  RecoveryGate gate_;
};

/// K = cbrt(w_max·(1 - beta) / C), the time for W(t) to climb back to w_max.
double cubic_k(double w_max, double beta, double c);

/// Minimal NewReno-style AIMD.
class Reno final : public SenderController {
 public:
  explicit Reno(double initial_window = 10.0);

  double window() const override { return cwnd_; }
  void on_ack(const AckContext& ack) override;
  void on_loss(const LossContext& loss) override;
  void on_timeout(SimTime now) override;
  std::string_view name() const override { return "reno"; }

  double ssthresh() const noexcept { return ssthresh_; }

 private:
  double cwnd_;
  double ssthresh_;
  RecoveryGate gate_;
};

/// Constant window; used for pipeline tests.
class FixedWindow final : public SenderController {
 public:
  explicit FixedWindow(double window) : window_(window) {}

  double window() const override { return window_; }
  void on_ack(const AckContext&) override {}
  void on_loss(const LossContext&) override {}
  void on_timeout(SimTime) override {}
  std::string_view name() const override { return "fixed"; }

 private:
  double window_;
};

enum class Algo { kNuwa, kCubic, kReno, kFixed };

/// Throws ConfigError for unknown names.
Algo parse_algo(std::string_view name);
std::string_view algo_name(Algo algo);

struct ControllerSpec {
  Algo algo = Algo::kNuwa;
  NuwaParams nuwa{};
  owd::EstimatorConfig estimator{};
  CubicConfig cubic{};
  double initial_window = 10.0;
  double nuwa_handoff_window = 16.0;
  double fixed_window = 10.0;
};

std::unique_ptr<SenderController> make_sender(const ControllerSpec& spec);

}  // namespace nuwa::cc
