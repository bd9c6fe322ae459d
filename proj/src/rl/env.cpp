#include "nuwa/rl/env.hpp"

#include <algorithm>
#include <cmath>

#include "nuwa/error.hpp"

namespace nuwa::rl {

double alpha_utility(double x, double alpha, double epsilon_floor) {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(x >= 0.0)) throw ConfigError("utility argument must be non-negative");
  if (alpha == 1.0) return std::log(std::max(x, epsilon_floor));
  return std::pow(x, 1.0 - alpha) / (1.0 - alpha);
}

double reward(double b_mbps, double tau_r, double tau_l, const RewardWeights& w) {
  return w.gamma_w * alpha_utility(b_mbps, w.alpha, w.epsilon_floor) -
         w.theta_w * alpha_utility(tau_r, w.alpha, w.epsilon_floor) -
         w.phi_w * alpha_utility(tau_l, w.alpha, w.epsilon_floor);
}

int apply_action(int k, int action) {
  if (action < 0 || action >= static_cast<int>(kActionMultipliers.size())) {
    throw ProtocolError("action must be in [0, 4]");
  }
  const double scaled = std::floor(k * kActionMultipliers[static_cast<std::size_t>(action)] + 0.5);
  return static_cast<int>(std::clamp(scaled, double{cc::kMinAggressiveness}, double{cc::kMaxAggressiveness}));
}

void EnvConfig::validate() const {
  link.validate();
  nuwa.validate();
  if (interval.count() <= 0) throw ConfigError("monitor interval must be positive");
  if (history < 1) throw ConfigError("history length must be >= 1");
  if (max_steps < 1) throw ConfigError("max steps must be >= 1");
  if (!(weights.gamma_w > 0.0 && weights.theta_w > 0.0 && weights.phi_w > 0.0)) {
    throw ConfigError("reward weights must be positive");
  }
  if (!(weights.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (drain_bps < 0.0) throw ConfigError("drain rate must be >= 0");
}

NuwaEnv::NuwaEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.link.loop_trace = false;
  cfg_.validate();
  drain_bps_ = cfg_.drain_bps > 0.0 ? cfg_.drain_bps : cfg_.link.trace.mean_capacity_bps(cfg_.link.mtu);
}

NuwaEnv::~NuwaEnv() = default;

StepResult NuwaEnv::reset() {
  cc::ControllerSpec spec;
  spec.algo = cc::Algo::kNuwa;
  spec.nuwa = cfg_.nuwa;
  spec.estimator = cfg_.estimator;
  sim_ = std::make_unique<netsim::Simulator>(cfg_.link, std::vector<netsim::FlowSpec>{{SimTime{0}, spec}});
  history_.assign(static_cast<std::size_t>(cfg_.history), MonitorSample{});
  running_max_.fill(0.0);
  k_ = cfg_.nuwa.k;
  steps_ = 0;
  done_ = false;
  seen_deliveries_ = 0;
  seen_losses_ = 0;
  buffer_bytes_ = 0.0;
  last_owd_us_ = 0.0;

  StepResult r;
  r.obs = observation();
  r.info.k = k_;
  return r;
}

StepResult NuwaEnv::step(int action) {
  if (!sim_) throw ProtocolError("step before reset");
  if (done_) throw ProtocolError("episode is done");
  k_ = apply_action(k_, action);
  sim_->nuwa_receiver(0)->set_k(k_);
  sim_->run_until(sim_->now() + cfg_.interval);
  ++steps_;

  const auto& m = sim_->metrics(0);
  double bytes = 0.0;
  double owd_sum = 0.0;
  const auto fresh = m.deliveries.size() - seen_deliveries_;
  for (auto i = seen_deliveries_; i < m.deliveries.size(); ++i) {
    bytes += static_cast<double>(m.deliveries[i].bytes);
    owd_sum += static_cast<double>(m.deliveries[i].owd_us);
  }
  if (fresh > 0) last_owd_us_ = static_cast<double>(m.deliveries.back().owd_us);
  const double mean_owd = fresh > 0 ? owd_sum / static_cast<double>(fresh) : last_owd_us_;
  const auto lost = m.packets_lost - seen_losses_;
  seen_deliveries_ = m.deliveries.size();
  seen_losses_ = m.packets_lost;

  const double secs = core::to_seconds(cfg_.interval);
  buffer_bytes_ = std::max(0.0, buffer_bytes_ + bytes - drain_bps_ / 8.0 * secs);

  MonitorSample s;
  s.g_bytes = bytes;
  s.w_pkts = sim_->nuwa_receiver(0)->window();
  s.r_bytes = buffer_bytes_;
  s.l_us = last_owd_us_;
  history_.pop_front();
  history_.push_back(s);
  const std::array<double, 4> channels{s.g_bytes, s.w_pkts, s.r_bytes, s.l_us};
  for (std::size_t c = 0; c < 4; ++c) running_max_[c] = std::max(running_max_[c], channels[c]);

  StepResult r;
  r.info.b_mbps = bytes * 8.0 / secs / 1e6;
  r.info.tau_r = mean_owd / 1e5;
  const auto attempts = static_cast<double>(fresh) + static_cast<double>(lost);
  r.info.tau_l = attempts > 0 ? static_cast<double>(lost) / attempts : 0.0;
  r.info.k = k_;
  r.info.t_ms = core::to_ms(sim_->now());
  r.reward = reward(r.info.b_mbps, r.info.tau_r, r.info.tau_l, cfg_.weights);
  done_ = steps_ >= cfg_.max_steps || sim_->now() >= core::from_ms(cfg_.link.trace.duration_ms);
  r.done = done_;
  r.obs = observation();
  r.raw = s;
  return r;
}

std::vector<double> NuwaEnv::observation() const {
  std::vector<double> obs;
  obs.reserve(history_.size() * 4);
  for (const auto& s : history_) {
    const std::array<double, 4> channels{s.g_bytes, s.w_pkts, s.r_bytes, s.l_us};
    for (std::size_t c = 0; c < 4; ++c) {
      obs.push_back(running_max_[c] > 0.0 ? std::clamp(channels[c] / running_max_[c], 0.0, 1.0) : 0.0);
    }
  }
  return obs;
}

}  // namespace nuwa::rl
