// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances and runtime limits are fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuwa/cc/nuwa.hpp"
#include "nuwa/core/metrics.hpp"
#include "nuwa/experiments.hpp"
#include "nuwa/fixed/tanh.hpp"
#include "nuwa/netsim/simulator.hpp"
#include "nuwa/owd/estimator.hpp"
#include "nuwa/rl/server.hpp"

using namespace nuwa;
using core::SimTime;
using std::chrono::seconds;

namespace {

constexpr double kOwdMaeRatio = 0.10;
constexpr double kTanhMaxErr = 1.0 / 64;
constexpr double kBytesRatioMin = 0.95;
constexpr double kDelayRatioMax = 0.90;
constexpr double kJainMin = 0.95;
constexpr double kShareMin = 0.30, kShareMax = 0.70;
constexpr double kPeakRatioMax = 0.70;
constexpr double kOracleRelTol = 1e-6;

constexpr double kOwdBudgetS = 10, kTanhBudgetS = 1, kThroughputDelayBudgetS = 30, kFairBudgetS = 60;
constexpr double kRobustBudgetS = 30, kSweepBudgetS = 60;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = o.pass;
  if (budget_s > 0 && secs > budget_s) {
    pass = false;
    o.detail += " [over runtime budget]";
  }
  if (!pass) ++failures;
  std::printf("%s %-16s %s (%.2fs", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  if (budget_s > 0) std::printf(" of %.0fs", budget_s);
  std::printf(")\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

cc::ControllerSpec nuwa_spec(std::int64_t td_us, std::int64_t rho_us, int k = 7) {
  cc::ControllerSpec s;
  s.algo = cc::Algo::kNuwa;
  s.nuwa.target_delay_us = td_us;
  s.nuwa.sensitivity_us = rho_us;
  s.nuwa.k = k;
  return s;
}

cc::ControllerSpec cubic_spec() {
  cc::ControllerSpec s;
  s.algo = cc::Algo::kCubic;
  return s;
}

netsim::SimResult single(const netsim::LinkConfig& link, const cc::ControllerSpec& spec, SimTime dur,
                         netsim::SimOptions opts = {}) {
  return netsim::run(link, {netsim::FlowSpec{SimTime{0}, spec}}, dur, opts);
}

Outcome owd_tracking() {
  netsim::LinkConfig link;
  link.trace = core::square_wave_trace(24, 6, 10'000, 60'000);
  const auto res = single(link, nuwa_spec(5000, 2500), seconds(60));
  const auto& m = res.flows[0];
  if (m.qd_estimates.size() != m.deliveries.size()) return {false, "estimates not aligned with deliveries"};
  double err = 0, truth = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.deliveries.size(); ++i) {
    if (m.deliveries[i].t < seconds(5)) continue;
    err += std::fabs(m.qd_estimates[i].value - static_cast<double>(m.deliveries[i].queue_wait_us));
    truth += static_cast<double>(m.deliveries[i].queue_wait_us);
    ++n;
  }
  const double ratio = err / truth;
  return {ratio <= kOwdMaeRatio,
          fmt("MAE %.0f us / mean true wait %.0f us = %.3f (<= %.2f) over %zu packets", err / n, truth / n, ratio,
              kOwdMaeRatio, n)};
}

Outcome tanh_accuracy() {
  using fixed::FixedQ;
  constexpr int kPoints = 1 << 16;
  double worst = 0;
  for (int i = 0; i <= kPoints; ++i) {
    const double x = -8.0 + 16.0 * i / kPoints;
    worst = std::max(worst, std::fabs(fixed::tanh_fixed(FixedQ::from_double(x)).to_double() - std::tanh(x)));
  }
  bool odd = true, monotone = true;
  std::int32_t prev = fixed::tanh_fixed(FixedQ{-8 * FixedQ::kOne}).raw;
  for (std::int32_t raw = -8 * FixedQ::kOne; raw <= 8 * FixedQ::kOne; ++raw) {
    const auto y = fixed::tanh_fixed(FixedQ{raw}).raw;
    odd = odd && fixed::tanh_fixed(FixedQ{-raw}).raw == -y;
    monotone = monotone && y >= prev;
    prev = y;
  }
  const bool table_ok = fixed::build_table() == fixed::kGoldenTanhTable;
  return {worst <= kTanhMaxErr && odd && monotone && table_ok,
          fmt("max err %.5f (<= %.5f), odd %s, monotone %s, table %s", worst, kTanhMaxErr, odd ? "yes" : "no",
              monotone ? "yes" : "no", table_ok ? "matches" : "differs")};
}

Outcome throughput_delay() {
  netsim::LinkConfig link;
  link.trace = core::fluctuating_trace(5, 60, 1000, 60'000, 7);
  const SimTime dur = seconds(60);
  const auto n = core::summarize(single(link, nuwa_spec(10'000, 5'000), dur).flows[0], {SimTime{0}, dur});
  const auto c = core::summarize(single(link, cubic_spec(), dur).flows[0], {SimTime{0}, dur});
  const double bytes = static_cast<double>(n.bytes) / static_cast<double>(c.bytes);
  const double delay = n.mean_queue_delay_us / c.mean_queue_delay_us;
  return {bytes >= kBytesRatioMin && delay <= kDelayRatioMax,
          fmt("T_d 10 ms: bytes %.1f/%.1f MB ratio %.3f (>= %.2f), queue delay %.1f/%.1f ms ratio %.3f (<= %.2f)",
              n.bytes / 1e6, c.bytes / 1e6, bytes, kBytesRatioMin, n.mean_queue_delay_us / 1e3,
              c.mean_queue_delay_us / 1e3, delay, kDelayRatioMax)};
}

experiments::FairnessConfig fairness_config(std::int64_t td_us) {
  experiments::FairnessConfig cfg;
  cfg.link.trace = core::constant_trace(10, 60'000);
  cfg.first = nuwa_spec(td_us, td_us / 2);
  cfg.second = cubic_spec();
  return cfg;
}

double nuwa_share(std::int64_t td_us) {
  const auto r = experiments::run_fairness(fairness_config(td_us));
  const auto rates = experiments::mean_rates(r.sim, seconds(40), seconds(60));
  return (rates[0] + rates[1]) / (rates[0] + rates[1] + rates[2] + rates[3]);
}

Outcome fairness() {
  constexpr std::int64_t kTd = 64'000;
  auto pair = fairness_config(kTd);
  pair.second = pair.first;
  pair.flows_per_algo = 1;
  pair.duration = seconds(40);
  const auto pr = experiments::run_fairness(pair);
  const double jain = core::jain_index(experiments::mean_rates(pr.sim, seconds(20), seconds(40)));

  const double share = nuwa_share(kTd);
  const bool ok = jain >= kJainMin && share >= kShareMin && share <= kShareMax;
  return {ok, fmt("T_d 64 ms: Nuwa-Nuwa Jain %.3f (>= %.2f); Nuwa share vs CUBIC %.3f, CUBIC %.3f (each in [%.2f, %.2f])",
                  jain, kJainMin, share, 1 - share, kShareMin, kShareMax)};
}

Outcome fairness_context() {
  std::string detail = "Nuwa share at neighbouring T_d:";
  for (std::int64_t td : {60'000, 62'000, 66'000, 68'000}) detail += fmt(" %lld ms %.2f", static_cast<long long>(td / 1000), nuwa_share(td));
  return {true, detail + " (informational)"};
}

double peak_wait_after(const core::FlowMetrics& m, SimTime t) {
  double peak = 0;
  for (const auto& d : m.deliveries)
    if (d.t >= t) peak = std::max(peak, static_cast<double>(d.queue_wait_us));
  return peak;
}

Outcome robustness() {
  netsim::LinkConfig link;
  link.trace = core::piecewise_trace({{20'000, 40}, {20'000, 10}});
  link.queue_capacity = 500;
  const SimTime drop = seconds(20), dur = seconds(40);
  const double n = peak_wait_after(single(link, nuwa_spec(10'000, 5'000), dur).flows[0], drop);
  const double c = peak_wait_after(single(link, cubic_spec(), dur).flows[0], drop);
  const double ratio = n / c;
  return {ratio <= kPeakRatioMax,
          fmt("40 -> 10 Mbit/s: post-drop peak queue delay Nuwa %.1f ms, CUBIC %.1f ms, ratio %.3f (<= %.2f)", n / 1e3,
              c / 1e3, ratio, kPeakRatioMax)};
}

Outcome k_sensitivity() {
  netsim::LinkConfig link;
  link.trace = core::piecewise_trace({{15'000, 10}, {15'000, 40}, {15'000, 10}});
  const auto rows = experiments::sweep_k(link, nuwa_spec(10'000, 5'000), seconds(45));
  const auto& k1 = rows.front();
  const auto& k9 = rows.back();
  if (!k1.time_to_track || !k9.time_to_track) return {false, "a flow never tracked the step-up"};
  const auto t1 = core::to_ms(*k1.time_to_track), t9 = core::to_ms(*k9.time_to_track);
  const bool ok = t9 < t1 && k1.drop_edge_losses >= k9.drop_edge_losses;
  return {ok, fmt("time to track step-up k=1 %lld ms, k=9 %lld ms; step-down losses k=1 %lld, k=9 %lld",
                  static_cast<long long>(t1), static_cast<long long>(t9), static_cast<long long>(k1.drop_edge_losses),
                  static_cast<long long>(k9.drop_edge_losses))};
}

Outcome determinism() {
  auto once = [](std::uint64_t seed) {
    netsim::LinkConfig link;
    link.trace = core::fluctuating_trace(5, 40, 1000, 20'000, 3);
    link.random_loss_rate = 0.005;
    link.rng_seed = seed;
    std::ostringstream log, csv;
    const auto res = netsim::run(link,
                                 {{SimTime{0}, nuwa_spec(10'000, 5'000)},
                                  {SimTime{seconds(2)}, cubic_spec()}},
                                 seconds(20), {&log});
    core::write_metrics_csv(csv, res.flows);
    return std::make_pair(log.str(), csv.str());
  };
  const auto a = once(42), b = once(42), c = once(43);
  const bool same = a == b;
  const bool seeded = a.first != c.first;
  return {same && seeded && !a.first.empty(),
          fmt("rerun: event log %zu bytes %s, CSV %zu bytes %s; other seed differs: %s", a.first.size(),
              a.first == b.first ? "identical" : "DIFFERS", a.second.size(),
              a.second == b.second ? "identical" : "DIFFERS", seeded ? "yes" : "no")};
}

Outcome unit_oracles() {
  owd::KalmanConfig cfg;
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> dc(0.0, 60'000.0);
  std::uniform_int_distribution<int> dm(-25, 25);
  double worst = 0;
  for (int seq = 0; seq < 100; ++seq) {
    auto s = owd::KalmanState::initial(cfg);
    long double x0 = cfg.initial_inv_capacity, x1 = cfg.initial_q_delay_us;
    long double p00 = cfg.initial_covariance[0], p01 = 0, p11 = cfg.initial_covariance[1];
    for (int i = 0; i < 50; ++i) {
      const double d = dc(rng), m = rng() % 4 == 0 ? 0.0 : 1500.0 * dm(rng);
      s = owd::kalman_update(s, d, m, cfg);
      p00 += cfg.process_noise[0];
      p11 += cfg.process_noise[1];
      const long double a = p00 * m + p01, b = p01 * m + p11;
      const long double sv = m * a + b + cfg.measurement_noise_var;
      const long double k0 = a / sv, k1 = b / sv, innov = d - (m * x0 + x1);
      x0 += k0 * innov;
      x1 = std::max(0.0L, x1 + k1 * innov);
      const long double n00 = p00 - k0 * a, n01 = p01 - k0 * b, n11 = p11 - k1 * b;
      p00 = n00;
      p01 = n01;
      p11 = n11;
      const auto rel = [](double got, long double want) {
        return static_cast<double>(std::fabs(got - want) / std::max(1.0L, std::fabs(want)));
      };
      worst = std::max({worst, rel(s.q_delay_us, x1), rel(s.inv_capacity, x0)});
    }
  }
  bool fixed_point = true;
  for (double w0 : {2.0, 10.0, 123.456}) {
    double w = w0;
    for (int i = 0; i < 10'000; ++i) w = cc::update_window(w, cc::compute_trend(5000, 5000, 2500), 7, 2.0, 10'000.0);
    fixed_point = fixed_point && w == w0;
  }
  return {worst <= kOracleRelTol && fixed_point,
          fmt("Kalman vs scalar oracle worst rel err %.2e (<= %.0e) over 100x50 steps; window fixed point over 1e4 "
              "steps %s",
              worst, kOracleRelTol, fixed_point ? "holds" : "broken")};
}

Outcome protocol() {
  using nlohmann::json;
  rl::EnvConfig cfg;
  cfg.link.trace = core::constant_trace(12, 20'000);
  rl::EnvSession s(cfg);
  const auto reset = json::parse(s.handle(R"({"type":"reset"})").line);
  bool ok = reset["type"] == "state" && reset["obs"].size() == 40 && reset["reward"].is_null();
  const auto step = json::parse(s.handle(R"({"type":"step","action":2})").line);
  ok = ok && step["type"] == "state" && step["reward"].is_number() && step["done"] == false;
  const auto bad = s.handle(R"({"type":"nope"})");
  ok = ok && json::parse(bad.line)["type"] == "error" && bad.close;
  return {ok, "config/reset/step/error exchange in-process"};
}

}  // namespace

int main() {
  report("owd-tracking", kOwdBudgetS, owd_tracking);
  report("tanh-table", kTanhBudgetS, tanh_accuracy);
  report("throughput-delay", kThroughputDelayBudgetS, throughput_delay);
  report("fairness", kFairBudgetS, fairness);
  report("fairness-context", 0, fairness_context);
  report("robustness", kRobustBudgetS, robustness);
  report("k-sensitivity", kSweepBudgetS, k_sensitivity);
  report("determinism", 0, determinism);
  report("unit-oracles", 0, unit_oracles);
  report("protocol", 0, protocol);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
