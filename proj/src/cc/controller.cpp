#include "nuwa/cc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nuwa/error.hpp"

namespace nuwa::cc {

namespace {
constexpr double kInfinity = std::numeric_limits<double>::infinity();
}

NuwaSender::NuwaSender(double initial_window, double handoff_window)
    : cwnd_(initial_window), handoff_(handoff_window) {}

void NuwaSender::on_ack(const AckContext& ack) {
  last_advertised_ = ack.advertised_window;
  if (!avoidance_) {
    cwnd_ += 1.0;
    if (cwnd_ >= handoff_) avoidance_ = true;
  }
  cwnd_ = sender_apply(ack.advertised_window, cwnd_, avoidance_);
}

void NuwaSender::on_loss(const LossContext&) {
  if (avoidance_) return;  // the receiver's window already reflects congestion
  avoidance_ = true;
  if (last_advertised_ > 0) cwnd_ = static_cast<double>(last_advertised_);
}

void NuwaSender::on_timeout(SimTime) {
  avoidance_ = true;
  if (last_advertised_ > 0) cwnd_ = static_cast<double>(last_advertised_);
}

double cubic_k(double w_max, double beta, double c) { return std::cbrt(w_max * (1.0 - beta) / c); }

Cubic::Cubic(CubicConfig cfg) : cfg_(cfg), cwnd_(cfg.initial_window), ssthresh_(kInfinity) {}

double Cubic::cubic_window(double t) const {
  const double d = t - k_;
  return cfg_.c * d * d * d + w_max_;
}

void Cubic::on_ack(const AckContext& ack) {
  if (cwnd_ < ssthresh_) {
    cwnd_ += 1.0;
    return;
  }
  const double t = core::to_seconds(ack.now - epoch_start_ + ack.rtt);
  const double target = cubic_window(t);
  if (target > cwnd_) {
    // At most 1.5x growth per round trip, as in the Linux implementation.
    cwnd_ += std::min((target - cwnd_) / cwnd_, 0.5);
  } else {
    cwnd_ += 0.01 / cwnd_;
  }
}

void Cubic::on_loss(const LossContext& loss) {
  if (!gate_.admit(loss)) return;
  w_max_ = cwnd_;
  cwnd_ = std::max(cwnd_ * cfg_.beta, 1.0);
  ssthresh_ = cwnd_;
  k_ = cubic_k(w_max_, cfg_.beta, cfg_.c);
  epoch_start_ = loss.now;
}

void Cubic::on_timeout(SimTime now) {
  w_max_ = cwnd_;
  ssthresh_ = std::max(cwnd_ * cfg_.beta, 2.0);
  cwnd_ = 1.0;
  k_ = cubic_k(w_max_, cfg_.beta, cfg_.c);
  epoch_start_ = now;
}

Reno::Reno(double initial_window) : cwnd_(initial_window), ssthresh_(kInfinity) {}

void Reno::on_ack(const AckContext&) {
  if (cwnd_ < ssthresh_) {
    cwnd_ += 1.0;
  } else {
    cwnd_ += 1.0 / cwnd_;
  }
}

void Reno::on_loss(const LossContext& loss) {
  if (!gate_.admit(loss)) return;
  cwnd_ = std::max(cwnd_ / 2.0, 1.0);
  ssthresh_ = cwnd_;
}

void Reno::on_timeout(SimTime) {
  ssthresh_ = std::max(cwnd_ / 2.0, 2.0);
  cwnd_ = 1.0;
}

Algo parse_algo(std::string_view name) {
  if (name == "nuwa") return Algo::kNuwa;
  if (name == "cubic") return Algo::kCubic;
  if (name == "reno") return Algo::kReno;
  if (name == "fixed") return Algo::kFixed;
  throw ConfigError("unknown controller '" + std::string(name) + "'");
}

std::string_view algo_name(Algo algo) {
  switch (algo) {
    case Algo::kNuwa: return "nuwa";
    case Algo::kCubic: return "cubic";
    case Algo::kReno: return "reno";
    case Algo::kFixed: return "fixed";
  }
  return "unknown";
}

std::unique_ptr<SenderController> make_sender(const ControllerSpec& spec) {
  switch (spec.algo) {
    case Algo::kNuwa:
      spec.nuwa.validate();
      return std::make_unique<NuwaSender>(spec.initial_window, spec.nuwa_handoff_window);
    case Algo::kCubic: {
      auto cfg = spec.cubic;
      cfg.initial_window = spec.initial_window;
      return std::make_unique<Cubic>(cfg);
    }
    case Algo::kReno:
      return std::make_unique<Reno>(spec.initial_window);
    case Algo::kFixed:
      if (spec.fixed_window < 1.0) throw ConfigError("fixed window must be >= 1");
      return std::make_unique<FixedWindow>(spec.fixed_window);
  }
  throw ConfigError("unknown controller");
}

}  // namespace nuwa::cc
