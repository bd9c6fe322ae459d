#include "nuwa/owd/estimator.hpp"

#include <cmath>

#include "nuwa/error.hpp"

namespace nuwa::owd {

std::int64_t measure_raw(SimTime sent, SimTime received, SimTime min_sent, SimTime min_received,
                         SignConvention sign) {
  const auto recv_delta = (received - min_received).count();
  const auto send_delta = (sent - min_sent).count();
  return sign == SignConvention::kCongestionPositive ? recv_delta - send_delta
                                                     : send_delta - recv_delta;
}

void MinOwdWindow::advance(SimTime now) {
  while (!entries_.empty() && entries_.front().received < now - length_) entries_.pop_front();
}

void MinOwdWindow::update(const MinOwdEntry& entry) {
  advance(entry.received);
  // Older entries with OWD >= the new one can never be the minimum again.
  while (!entries_.empty() && entries_.back().owd_us >= entry.owd_us) entries_.pop_back();
  entries_.push_back(entry);
}

std::optional<MinOwdEntry> MinOwdWindow::min() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.front();
}

std::uint64_t GroupAccumulator::add(SimTime received, std::int64_t bytes) {
  if (!open_) {
    open_ = true;
    current_start_ = received;
  } else if (received >= current_start_ + span_) {
    closed_.push_back({current_id_, current_start_, current_bytes_});
    ++current_id_;
    // Buckets are anchored on the span grid so idle gaps do not shift them.
    const auto skipped = (received - current_start_) / span_;
    current_start_ += skipped * span_;
    current_bytes_ = 0;
    while (!closed_.empty() && closed_.front().start < received - retention_) closed_.pop_front();
  }
  current_bytes_ += bytes;
  return current_id_;
}

std::optional<std::int64_t> GroupAccumulator::closed_bytes(std::uint64_t id) const {
  if (closed_.empty() || id < closed_.front().id || id > closed_.back().id) return std::nullopt;
  return closed_[static_cast<std::size_t>(id - closed_.front().id)].bytes;
}

std::int64_t GroupAccumulator::delta_bytes(std::uint64_t reference) const {
  const auto ref = closed_bytes(reference);
  if (!ref) return 0;
  return closed_.back().bytes - *ref;
}

KalmanState KalmanState::initial(const KalmanConfig& cfg) {
  KalmanState s;
  s.inv_capacity = cfg.initial_inv_capacity;
  s.q_delay_us = cfg.initial_q_delay_us;
  s.covariance = {{{cfg.initial_covariance[0], 0.0}, {0.0, cfg.initial_covariance[1]}}};
  return s;
}

double correct_q_delay(double q_prev_us, double gain, double d_c_us, double delta_m_bytes,
                       double inv_capacity_prev) {
  return (1.0 - gain) * q_prev_us + gain * (d_c_us - delta_m_bytes * inv_capacity_prev);
}

KalmanState kalman_update(const KalmanState& state, double d_c_us, double delta_m_bytes,
                          const KalmanConfig& cfg) {
  if (!std::isfinite(d_c_us) || !std::isfinite(delta_m_bytes)) {
    throw ConfigError("kalman_update: non-finite measurement");
  }
  using Mat = std::array<std::array<double, 2>, 2>;

  // Predict: the state is a random walk, so only the covariance grows.
  Mat p = state.covariance;
  p[0][0] += cfg.process_noise[0];
  p[1][1] += cfg.process_noise[1];

  // Correct with H = [ΔM, 1].
  const double h0 = delta_m_bytes;
  const double ph0 = p[0][0] * h0 + p[0][1];
  const double ph1 = p[1][0] * h0 + p[1][1];
  const double s = h0 * ph0 + ph1 + cfg.measurement_noise_var;
  const double k0 = ph0 / s;
  const double k1 = ph1 / s;

  const double innovation = d_c_us - (h0 * state.inv_capacity + state.q_delay_us);

  KalmanState next;
  next.inv_capacity = state.inv_capacity + k0 * innovation;
  next.q_delay_us = state.q_delay_us + k1 * innovation;
  next.last_gain = {k0, k1};

  // Joseph form: (I - KH) P (I - KH)^T + K R K^T keeps P symmetric PSD.
  const Mat a = {{{1.0 - k0 * h0, -k0}, {-k1 * h0, 1.0 - k1}}};
  Mat ap{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) ap[i][j] = a[i][0] * p[0][j] + a[i][1] * p[1][j];
  const std::array<double, 2> k = {k0, k1};
  Mat out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out[i][j] = ap[i][0] * a[j][0] + ap[i][1] * a[j][1] + k[i] * cfg.measurement_noise_var * k[j];
  const double off = 0.5 * (out[0][1] + out[1][0]);
  out[0][1] = out[1][0] = off;
  next.covariance = out;

  if (next.q_delay_us < 0.0) next.q_delay_us = 0.0;
  if (!std::isfinite(next.q_delay_us) || !std::isfinite(next.inv_capacity)) {
    throw ConfigError("kalman_update: state diverged");
  }
  return next;
}

OwdEstimator::OwdEstimator(EstimatorConfig cfg)
    : cfg_(cfg),
      window_(cfg.min_window),
      groups_(cfg.group_span, cfg.min_window + cfg.group_span * 2),
      kalman_(KalmanState::initial(cfg.kalman)) {}

OwdSample OwdEstimator::on_packet(SimTime sent, SimTime received, std::int64_t bytes) {
  const auto group = groups_.add(received, bytes);
  window_.advance(received);

  OwdSample out;
  if (const auto ref = window_.min()) {
    out.d_c_us = measure_raw(sent, received, ref->sent, ref->received, cfg_.sign);
  }
  window_.update({received, sent, (received - sent).count(), group});
  // A negative congestion-positive reading means this packet is the new
  // reference minimum, so its delay above the minimum is zero.
  if (cfg_.sign == SignConvention::kCongestionPositive && out.d_c_us < 0) out.d_c_us = 0;

  out.delta_m_bytes = groups_.delta_bytes(window_.min()->group);
  kalman_ = kalman_update(kalman_, static_cast<double>(out.d_c_us),
                          static_cast<double>(out.delta_m_bytes), cfg_.kalman);
  out.q_delay_us = kalman_.q_delay_us;
  out.gain = kalman_.last_gain[1];
  return out;
}

}  // namespace nuwa::owd
