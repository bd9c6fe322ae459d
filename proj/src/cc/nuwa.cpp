#include "nuwa/cc/nuwa.hpp"

#include <algorithm>
#include <cmath>

#include "nuwa/error.hpp"

namespace nuwa::cc {

void NuwaParams::validate() const {
  if (target_delay_us < 0) throw ConfigError("target delay must be >= 0");
  if (sensitivity_us <= 0) throw ConfigError("sensitivity rho must be > 0");
  if (k < kMinAggressiveness || k > kMaxAggressiveness) {
    throw ConfigError("aggressiveness k must be in [1, 9]");
  }
  if (!(w_min > 0.0 && w_min <= w_initial && w_initial <= w_max)) {
    throw ConfigError("window bounds must satisfy 0 < w_min <= w_initial <= w_max");
  }
}

FixedQ compute_trend(std::int64_t target_delay_us, std::int64_t q_delay_us,
                     std::int64_t sensitivity_us) {
  if (sensitivity_us <= 0) throw ConfigError("sensitivity rho must be > 0");
  return fixed::tanh_fixed(FixedQ::from_ratio(target_delay_us - q_delay_us, sensitivity_us));
}

double update_window(double w_old, FixedQ theta, int k, double w_min, double w_max) {
  const double w_new = w_old + theta.to_double() * k / w_old;
  return std::clamp(w_new, w_min, w_max);
}

double sender_apply(std::int64_t advertised, double local_cwnd, bool congestion_avoidance) {
  return congestion_avoidance ? static_cast<double>(advertised) : local_cwnd;
}

NuwaReceiver::NuwaReceiver(NuwaParams params, owd::EstimatorConfig estimator)
    : params_(params), estimator_(estimator), w_(params.w_initial) {
  params_.validate();
}

NuwaUpdate NuwaReceiver::on_packet(SimTime sent, SimTime received, std::int64_t bytes) {
  NuwaUpdate u;
  u.owd = estimator_.on_packet(sent, received, bytes);
  const auto q_d = std::llround(u.owd.q_delay_us);
  u.x = FixedQ::from_ratio(params_.target_delay_us - q_d, params_.sensitivity_us);
  u.theta = fixed::tanh_fixed(u.x);
  w_ = update_window(w_, u.theta, params_.k, params_.w_min, params_.w_max);
  last_theta_ = u.theta;
  u.window = w_;
  u.advertised = advertised();
  return u;
}

std::int64_t NuwaReceiver::advertised() const noexcept {
  return static_cast<std::int64_t>(std::floor(w_));
}

void NuwaReceiver::set_k(int k) {
  if (k < kMinAggressiveness || k > kMaxAggressiveness) {
    throw ConfigError("aggressiveness k must be in [1, 9]");
  }
  params_.k = k;
}

}  // namespace nuwa::cc
