#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nuwa/fixed/tanh.hpp"

using namespace nuwa::fixed;

namespace {

// Reference tanh from a Taylor series of exp in long double.
long double ref_exp(long double x) {
  long double sum = 1.0L, term = 1.0L;
  for (int n = 1; n < 200; ++n) {
    term *= x / n;
    sum += term;
    if (std::fabs(term) < 1e-30L) break;
  }
  return sum;
}

long double ref_tanh(long double x) {
  const long double e = ref_exp(2.0L * x);
  return (e - 1.0L) / (e + 1.0L);
}

}  // namespace

TEST_CASE("FixedQ conversions") {
  CHECK(FixedQ::from_double(1.0).raw == 1024);
  CHECK(FixedQ::from_double(-0.5).raw == -512);
  CHECK(FixedQ::from_double(1.0009).raw == 1024);
  CHECK(FixedQ::from_double(-1.0009).raw == -1024);
  CHECK(FixedQ::from_double(32.0).to_double() == 32.0);
  CHECK(FixedQ::from_double(-32.0).to_double() == -32.0);
  CHECK(FixedQ::from_ratio(250, 250).raw == 1024);
  CHECK(FixedQ::from_ratio(1, 3).raw == 341);
  CHECK(FixedQ::from_ratio(-1, 3).raw == -341);
  CHECK(FixedQ::from_double(1e12).raw == INT32_MAX);
}

TEST_CASE("table anchors") {
  CHECK(kGoldenTanhTable[0] == 0);
  CHECK(kGoldenTanhTable[64] == 780);
  CHECK(kGoldenTanhTable[256] == 1023);
}

TEST_CASE("integer table build matches the golden copy and the reference") {
  const auto built = build_table();
  CHECK(built == kGoldenTanhTable);
  for (int i = 0; i < kTanhTableSize; ++i) {
    const auto expect = static_cast<std::int32_t>(std::llround(ref_tanh(i / 64.0L) * 1024.0L));
    CHECK(built[static_cast<std::size_t>(i)] == expect);
    if (i > 0) CHECK(built[static_cast<std::size_t>(i)] >= built[static_cast<std::size_t>(i - 1)]);
  }
}

TEST_CASE("tanh_fixed examples") {
  CHECK(tanh_fixed(FixedQ{0}).raw == 0);
  CHECK(tanh_fixed(FixedQ::from_double(8.0)).raw == 1023);
  CHECK(tanh_fixed(FixedQ::from_double(-8.0)).raw == -1023);
  CHECK(tanh_fixed(FixedQ::from_double(1.0)).raw == 780);
  CHECK(std::fabs(tanh_fixed(FixedQ::from_double(0.5)).to_double() - 0.462117) <= 1.0 / 256);
}

TEST_CASE("tanh_fixed error bounds on a dense grid") {
  constexpr int kPoints = 1 << 16;
  double worst_wide = 0.0, worst_narrow = 0.0;
  for (int i = 0; i <= kPoints; ++i) {
    const double x = -8.0 + 16.0 * i / kPoints;
    const FixedQ q = FixedQ::from_double(x);
    const double err = std::fabs(tanh_fixed(q).to_double() - static_cast<double>(ref_tanh(x)));
    worst_wide = std::max(worst_wide, err);
    if (x >= -1.0 && x <= 1.0) worst_narrow = std::max(worst_narrow, err);
  }
  CHECK(worst_wide <= 1.0 / 64);
  CHECK(worst_narrow <= 1.0 / 256);
}

TEST_CASE("tanh_fixed is odd, monotone and bounded over every raw input") {
  std::int32_t prev = tanh_fixed(FixedQ{-9000}).raw;
  for (std::int32_t raw = -9000; raw <= 9000; ++raw) {
    const auto y = tanh_fixed(FixedQ{raw}).raw;
    CHECK(y >= prev);
    CHECK(std::abs(y) <= kTanhMaxRaw);
    CHECK(tanh_fixed(FixedQ{-raw}).raw == -y);
    prev = y;
  }
  CHECK(tanh_fixed(FixedQ{INT32_MAX}).raw == 1023);
  CHECK(tanh_fixed(FixedQ{INT32_MIN + 1}).raw == -1023);
}

TEST_CASE("audit csv") {
  std::ostringstream out;
  write_table_csv(out, kGoldenTanhTable);
  const auto text = out.str();
  CHECK(text.rfind("x_q,theta_q\n0,0\n16,", 0) == 0);
  CHECK(text.find("1024,780\n") != std::string::npos);
  CHECK(text.size() - text.rfind("4096,1023\n") == std::string("4096,1023\n").size());
}
