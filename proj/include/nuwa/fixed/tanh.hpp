#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>

namespace nuwa::fixed {

/// Q-format number with 10 fractional bits: value = raw / 1024.
struct FixedQ {
  static constexpr int kFracBits = 10;
  static constexpr std::int32_t kOne = 1 << kFracBits;

  std::int32_t raw = 0;

  /// Truncates toward zero; saturates to the int32 range.
  static FixedQ from_double(double v);
  /// Exact ratio num/den truncated toward zero; den must be non-zero.
  static FixedQ from_ratio(std::int64_t num, std::int64_t den);

  constexpr double to_double() const { return static_cast<double>(raw) / kOne; }
  constexpr FixedQ operator-() const { return FixedQ{-raw}; }
  constexpr auto operator<=>(const FixedQ&) const = default;
};

inline constexpr int kTanhTableSize = 257;
/// Table step is 1/64 in x, i.e. 16 raw units of FixedQ.
inline constexpr std::int32_t kTanhStepRaw = FixedQ::kOne / 64;
inline constexpr std::int32_t kTanhSaturationRaw = 4 * FixedQ::kOne;
inline constexpr std::int32_t kTanhMaxRaw = 1023;

using TanhTable = std::array<std::int32_t, kTanhTableSize>;

/// tanh(i/64) in Q10 for i = 0..256, rounded to nearest. Audited copy; the
/// runtime table is rebuilt with integer arithmetic and must match it.
extern const TanhTable kGoldenTanhTable;

/// Computes the table using only integer arithmetic (fixed-point powers of
/// e^(1/32) in Q40, then (e^2x - 1) / (e^2x + 1) rounded to Q10).
TanhTable build_table();

/// Odd-symmetric table lookup with linear interpolation; |x| >= 4 saturates
/// to ±1023/1024.
FixedQ tanh_fixed(FixedQ x);

/// Writes the `x_q,theta_q` audit CSV of the table (raw Q10 values).
void write_table_csv(std::ostream& out, const TanhTable& table);

}  // namespace nuwa::fixed
