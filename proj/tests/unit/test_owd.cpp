#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "nuwa/cc/controller.hpp"
#include "nuwa/error.hpp"
#include "nuwa/netsim/simulator.hpp"
#include "nuwa/owd/estimator.hpp"

using namespace nuwa;
using namespace nuwa::owd;
using std::chrono::milliseconds;
using std::chrono::seconds;

namespace {

SimTime us(std::int64_t v) { return SimTime{v}; }

// Textbook 2-state filter in long double with the short covariance update,
// written independently of the production code.
struct Oracle {
  long double x0, x1;
  long double p00, p01, p10, p11;
  long double q0, q1, r;

  explicit Oracle(const KalmanConfig& c)
      : x0(c.initial_inv_capacity), x1(c.initial_q_delay_us),
        p00(c.initial_covariance[0]), p01(0), p10(0), p11(c.initial_covariance[1]),
        q0(c.process_noise[0]), q1(c.process_noise[1]), r(c.measurement_noise_var) {}

  long double gain_q = 0;

  void step(long double dc, long double dm) {
    p00 += q0;
    p11 += q1;
    const long double a = p00 * dm + p01;
    const long double b = p10 * dm + p11;
    const long double s = dm * a + b + r;
    const long double k0 = a / s, k1 = b / s;
    const long double innov = dc - (dm * x0 + x1);
    x0 += k0 * innov;
    x1 += k1 * innov;
    // P = (I - K H) P
    const long double n00 = p00 - k0 * (dm * p00 + p10);
    const long double n01 = p01 - k0 * (dm * p01 + p11);
    const long double n10 = p10 - k1 * (dm * p00 + p10);
    const long double n11 = p11 - k1 * (dm * p01 + p11);
    p00 = n00;
    p11 = n11;
    p01 = p10 = (n01 + n10) / 2;
    if (x1 < 0) x1 = 0;
    gain_q = k1;
  }
};

bool close_sig(double got, double want, double rel) {
  return std::fabs(got - want) <= rel * std::max(std::fabs(want), 1e-300);
}

}  // namespace

TEST_CASE("measure_raw examples") {
  CHECK(measure_raw(us(100), us(150), us(0), us(50)) == 0);
  CHECK(measure_raw(us(100), us(160), us(0), us(50)) == 10);
  CHECK(measure_raw(us(100), us(140), us(0), us(50)) == -10);
  CHECK(measure_raw(us(100), us(160), us(0), us(50), SignConvention::kAsPrinted) == -10);
}

TEST_CASE("measure_raw ignores receiver clock offset") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> t(0, 1'000'000'000);
  std::uniform_int_distribution<std::int64_t> off(-1'000'000'000'000, 1'000'000'000'000);
  for (int i = 0; i < 1000; ++i) {
    const auto q = us(t(rng)), r = us(t(rng)), qm = us(t(rng)), rm = us(t(rng));
    const auto o = us(off(rng));
    CHECK(measure_raw(q, r, qm, rm) == measure_raw(q, r + o, qm, rm + o));
    CHECK(measure_raw(q + o, r, qm + o, rm) == measure_raw(q, r, qm, rm));
  }
}

TEST_CASE("min window: first sample and replacement") {
  MinOwdWindow w(seconds(10));
  CHECK_FALSE(w.min().has_value());
  w.update({us(100), us(0), 100, 0});
  REQUIRE(w.min().has_value());
  CHECK(w.min()->owd_us == 100);
  w.update({us(200), us(50), 150, 0});
  CHECK(w.min()->owd_us == 100);
  w.update({us(300), us(260), 40, 0});
  CHECK(w.min()->owd_us == 40);
  CHECK(w.min()->sent == us(260));
}

TEST_CASE("min window: the holder ages out after the window length") {
  MinOwdWindow w(seconds(10));
  w.update({SimTime{seconds(0)}, us(0), 100, 0});
  w.update({SimTime{seconds(1)}, us(0), 300, 0});
  w.update({SimTime{seconds(2)}, us(0), 200, 0});
  CHECK(w.min()->owd_us == 100);
  w.advance(SimTime{milliseconds(9999)});
  CHECK(w.min()->owd_us == 100);
  w.advance(SimTime{milliseconds(10'001)});
  CHECK(w.min()->owd_us == 200);
  w.advance(SimTime{milliseconds(12'001)});
  CHECK(w.empty());
}

TEST_CASE("min window matches a brute-force minimum") {
  std::mt19937_64 rng(9);
  MinOwdWindow w(milliseconds(500));
  std::vector<MinOwdEntry> all;
  SimTime now{};
  for (int i = 0; i < 5000; ++i) {
    now += us(static_cast<std::int64_t>(rng() % 3000));
    const MinOwdEntry e{now, now, static_cast<std::int64_t>(rng() % 100000), 0};
    w.update(e);
    all.push_back(e);
    std::int64_t best = INT64_MAX;
    for (const auto& a : all)
      if (a.received >= now - milliseconds(500)) best = std::min(best, a.owd_us);
    CHECK(w.min()->owd_us == best);
    CHECK(w.stored() <= all.size());
  }
}

TEST_CASE("group accumulator reports closed-bucket differences") {
  GroupAccumulator g(milliseconds(5));
  const auto a = g.add(SimTime{milliseconds(0)}, 1500);
  g.add(SimTime{milliseconds(1)}, 1500);
  CHECK(g.delta_bytes(a) == 0);
  const auto b = g.add(SimTime{milliseconds(6)}, 1500);
  CHECK(b != a);
  CHECK(g.closed_bytes(a) == 3000);
  CHECK_FALSE(g.closed_bytes(b).has_value());
  g.add(SimTime{milliseconds(11)}, 1500);
  CHECK(g.closed_bytes(b) == 1500);
  CHECK(g.delta_bytes(a) == 1500 - 3000);
  CHECK(g.delta_bytes(b) == 0);
}

TEST_CASE("Q_d correction at gain 0 and 1") {
  CHECK(correct_q_delay(1234.0, 0.0, 9999.0, 1500.0, 0.8) == 1234.0);
  CHECK(correct_q_delay(1234.0, 1.0, 9999.0, 0.0, 0.8) == 9999.0);
  CHECK(correct_q_delay(0.0, 1.0, 2000.0, 1000.0, 0.8) == doctest::Approx(1200.0));
}

TEST_CASE("constant measurement converges") {
  KalmanConfig cfg;
  auto s = KalmanState::initial(cfg);
  for (int i = 0; i < 50; ++i) s = kalman_update(s, 5000.0, 0.0, cfg);
  CHECK(std::fabs(s.q_delay_us - 5000.0) <= 50.0);
}

TEST_CASE("five-step sequence matches the offline fixture") {
  // dc, dm, 1/B, Q_d, q gain after each step; computed offline in float64.
  const std::array<std::array<double, 5>, 5> rows{{
      {1200.0, 0.0, 0.8, 800, 0.6666666667},
      {3500.0, 1500.0, 1.799998815, 800.0011111, 7.40739848e-07},
      {2800.0, -3000.0, 0.1520468767, 2905.263296, 0.2844950693},
      {9000.0, 4500.0, 0.7726354597, 4864.140295, 0.362049288},
      {500.0, 0.0, 0.9480167407, 2013.484307, 0.6531998962},
  }};
  KalmanConfig cfg;
  auto s = KalmanState::initial(cfg);
  for (const auto& r : rows) {
    s = kalman_update(s, r[0], r[1], cfg);
    CHECK(close_sig(s.inv_capacity, r[2], 1e-6));
    CHECK(close_sig(s.q_delay_us, r[3], 1e-6));
    CHECK(close_sig(s.last_gain[1], r[4], 1e-6));
  }
}

TEST_CASE("random sequences match the long double oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> dc(0.0, 50'000.0);
  std::uniform_int_distribution<int> dm(-20, 20);
  KalmanConfig cfg;
  for (int seq = 0; seq < 100; ++seq) {
    auto s = KalmanState::initial(cfg);
    Oracle o(cfg);
    for (int i = 0; i < 50; ++i) {
      const double d = dc(rng);
      const double m = (rng() % 3 == 0) ? 0.0 : 1500.0 * dm(rng);
      s = kalman_update(s, d, m, cfg);
      o.step(d, m);
      CHECK(std::fabs(s.q_delay_us - static_cast<double>(o.x1)) <= 1e-6 * std::max(1.0, std::fabs(static_cast<double>(o.x1))) + 1e-6);
      CHECK(std::fabs(s.inv_capacity - static_cast<double>(o.x0)) <= 1e-6 * std::max(1.0, std::fabs(static_cast<double>(o.x0))));
    }
  }
}

TEST_CASE("covariance stays symmetric PSD over 1e6 updates") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dc(-5'000.0, 100'000.0);
  std::uniform_int_distribution<int> dm(-30, 30);
  KalmanConfig cfg;
  auto s = KalmanState::initial(cfg);
  double worst_eig = 0.0;
  bool symmetric = true;
  bool finite_gain = true;
  for (int i = 0; i < 1'000'000; ++i) {
    s = kalman_update(s, dc(rng), 1500.0 * dm(rng), cfg);
    const auto& p = s.covariance;
    symmetric = symmetric && p[0][1] == p[1][0];
    const double tr = p[0][0] + p[1][1];
    const double det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    worst_eig = std::min(worst_eig, tr / 2 - disc);
    finite_gain = finite_gain && std::isfinite(s.last_gain[0]) && std::isfinite(s.last_gain[1]);
    if (s.q_delay_us < 0.0) FAIL("negative Q_d");
  }
  CHECK(symmetric);
  CHECK(finite_gain);
  CHECK(worst_eig >= -1e-9);
}

TEST_CASE("delay gain lies in [0, 1] for zero byte difference") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dc(0.0, 80'000.0);
  std::uniform_real_distribution<double> noise(1e-3, 1e7);
  for (int round = 0; round < 50; ++round) {
    KalmanConfig cfg;
    cfg.process_noise = {noise(rng) * 1e-8, noise(rng)};
    cfg.measurement_noise_var = noise(rng);
    auto s = KalmanState::initial(cfg);
    for (int i = 0; i < 500; ++i) {
      const bool burst = rng() % 2 == 0;
      s = kalman_update(s, dc(rng), burst ? 1500.0 * static_cast<double>(rng() % 10) : 0.0, cfg);
      if (!burst) {
        CHECK(s.last_gain[1] >= 0.0);
        CHECK(s.last_gain[1] <= 1.0);
      }
    }
  }
}

TEST_CASE("kalman_update rejects non-finite input") {
  KalmanConfig cfg;
  const auto s = KalmanState::initial(cfg);
  CHECK_THROWS_AS(kalman_update(s, std::nan(""), 0.0, cfg), ConfigError);
  CHECK_THROWS_AS(kalman_update(s, 0.0, INFINITY, cfg), ConfigError);
}

TEST_CASE("estimator tracks a standing queue in the simulator") {
  netsim::LinkConfig link;
  link.trace = core::constant_trace(12, 20'000);  // 1 packet per ms
  link.queue_capacity = 1000;
  cc::ControllerSpec spec;
  spec.algo = cc::Algo::kFixed;
  spec.fixed_window = 80;  // 40 in flight + a 40 ms standing queue
  const auto res = netsim::run(link, {{SimTime{0}, spec}}, seconds(10));
  const auto& d = res.flows[0].deliveries;
  REQUIRE(d.size() > 5000);

  OwdEstimator est;
  std::size_t checked = 0, within = 0;
  for (const auto& s : d) {
    const auto out = est.on_packet(s.t - us(s.owd_us), s.t, s.bytes);
    if (s.t < seconds(2) || s.queue_wait_us < 1000) continue;
    ++checked;
    const double w = static_cast<double>(s.queue_wait_us);
    if (std::fabs(out.q_delay_us - w) <= 0.1 * w) ++within;
  }
  REQUIRE(checked > 5000);
  CHECK(within == checked);
}
