#include "nuwa/fixed/tanh.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace nuwa::fixed {

namespace {

__extension__ using i128 = __int128;

constexpr int kExpFracBits = 40;
// round(e^(1/32) * 2^40)
constexpr std::int64_t kExpStepQ40 = 1134413873426;

std::int32_t saturate32(std::int64_t v) {
  constexpr auto lo = std::numeric_limits<std::int32_t>::min();
  constexpr auto hi = std::numeric_limits<std::int32_t>::max();
  return static_cast<std::int32_t>(v < lo ? lo : (v > hi ? hi : v));
}

const TanhTable& runtime_table() {
  static const TanhTable table = build_table();
  return table;
}

}  // namespace

// clang-format off
const TanhTable kGoldenTanhTable = {
    0, 16, 32, 48, 64, 80, 96, 112, 127, 143, 159, 174,
    190, 205, 220, 236, 251, 266, 281, 295, 310, 324, 339, 353,
    367, 381, 395, 408, 421, 435, 448, 461, 473, 486, 498, 510,
    522, 534, 545, 557, 568, 579, 590, 600, 611, 621, 631, 641,
    650, 660, 669, 678, 687, 696, 704, 713, 721, 729, 737, 744,
    752, 759, 766, 773, 780, 787, 793, 799, 805, 812, 817, 823,
    829, 834, 839, 845, 850, 855, 859, 864, 869, 873, 877, 882,
    886, 890, 894, 897, 901, 905, 908, 911, 915, 918, 921, 924,
    927, 930, 932, 935, 938, 940, 943, 945, 948, 950, 952, 954,
    956, 958, 960, 962, 964, 966, 968, 969, 971, 972, 974, 975,
    977, 978, 980, 981, 982, 984, 985, 986, 987, 988, 989, 990,
    991, 992, 993, 994, 995, 996, 997, 998, 999, 999, 1000, 1001,
    1001, 1002, 1003, 1003, 1004, 1005, 1005, 1006, 1006, 1007, 1007, 1008,
    1008, 1009, 1009, 1010, 1010, 1011, 1011, 1012, 1012, 1012, 1013, 1013,
    1013, 1014, 1014, 1014, 1015, 1015, 1015, 1015, 1016, 1016, 1016, 1016,
    1017, 1017, 1017, 1017, 1018, 1018, 1018, 1018, 1018, 1018, 1019, 1019,
    1019, 1019, 1019, 1019, 1020, 1020, 1020, 1020, 1020, 1020, 1020, 1020,
    1021, 1021, 1021, 1021, 1021, 1021, 1021, 1021, 1021, 1021, 1021, 1022,
    1022, 1022, 1022, 1022, 1022, 1022, 1022, 1022, 1022, 1022, 1022, 1022,
    1022, 1022, 1022, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023,
    1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023, 1023,
    1023, 1023, 1023, 1023, 1023,
};
// clang-format on

FixedQ FixedQ::from_double(double v) {
  const double scaled = std::trunc(v * kOne);
  if (std::isnan(scaled)) return FixedQ{0};
  if (scaled >= static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    return FixedQ{std::numeric_limits<std::int32_t>::max()};
  }
  if (scaled <= static_cast<double>(std::numeric_limits<std::int32_t>::min())) {
    return FixedQ{std::numeric_limits<std::int32_t>::min()};
  }
  return FixedQ{static_cast<std::int32_t>(scaled)};
}

FixedQ FixedQ::from_ratio(std::int64_t num, std::int64_t den) {
  // C++ integer division truncates toward zero.
  const i128 scaled = static_cast<i128>(num) * kOne / den;
  if (scaled > std::numeric_limits<std::int32_t>::max()) {
    return FixedQ{std::numeric_limits<std::int32_t>::max()};
  }
  if (scaled < std::numeric_limits<std::int32_t>::min()) {
    return FixedQ{std::numeric_limits<std::int32_t>::min()};
  }
  return FixedQ{static_cast<std::int32_t>(scaled)};
}

TanhTable build_table() {
  TanhTable table{};
  const i128 one = static_cast<i128>(1) << kExpFracBits;
  i128 e2x = one;  // e^(2x) at x = i/64
  for (int i = 0; i < kTanhTableSize; ++i) {
    const i128 num = e2x - one;
    const i128 den = e2x + one;
    table[static_cast<std::size_t>(i)] =
        static_cast<std::int32_t>((2 * FixedQ::kOne * num + den) / (2 * den));
    e2x = (e2x * kExpStepQ40 + (one >> 1)) >> kExpFracBits;
  }
  return table;
}

FixedQ tanh_fixed(FixedQ x) {
  const auto& table = runtime_table();
  const bool negative = x.raw < 0;
  const std::int64_t mag = negative ? -static_cast<std::int64_t>(x.raw) : x.raw;

  std::int32_t y;
  if (mag >= kTanhSaturationRaw) {
    y = kTanhMaxRaw;
  } else {
    const auto idx = static_cast<std::size_t>(mag / kTanhStepRaw);
    const auto frac = static_cast<std::int32_t>(mag % kTanhStepRaw);
    const std::int32_t lo = table[idx];
    const std::int32_t hi = table[idx + 1];
    y = lo + ((hi - lo) * frac + kTanhStepRaw / 2) / kTanhStepRaw;
  }
  return FixedQ{saturate32(negative ? -static_cast<std::int64_t>(y) : y)};
}

void write_table_csv(std::ostream& out, const TanhTable& table) {
  out << "x_q,theta_q\n";
  for (int i = 0; i < kTanhTableSize; ++i) {
    out << i * kTanhStepRaw << ',' << table[static_cast<std::size_t>(i)] << '\n';
  }
}

}  // namespace nuwa::fixed
