#pragma once

// Fixed-point 8x8 type-II cosine transform.
//
// Normative reference: the 8-point integer basis below (cosines scaled by
// 64*sqrt(8) and rounded), applied separably. Forward: columns first with a
// rounding right shift of 2, then rows with a shift of 9. Inverse: columns
// first with a shift of 7, then rows with a shift of 12. Each stage rounds
// by adding half the divisor before an arithmetic shift and saturates to
// int16. Net forward gain is 16x the orthonormal DCT; the inverse divides
// by 16.

#include <array>
#include <cstdint>

namespace fbv {

using Block8 = std::array<std::int32_t, 64>;

inline constexpr std::array<std::array<std::int32_t, 8>, 8> kDctBasis8 = {{
    {64, 64, 64, 64, 64, 64, 64, 64},
    {89, 75, 50, 18, -18, -50, -75, -89},
    {83, 36, -36, -83, -83, -36, 36, 83},
    {75, -18, -89, -50, 50, 89, 18, -75},
    {64, -64, -64, 64, 64, -64, -64, 64},
    {50, -89, 18, 75, -75, -18, 89, -50},
    {36, -83, 83, -36, -36, 83, -83, 36},
    {18, -50, 75, -89, 89, -75, 50, -18},
}};

/// Orthonormal-domain gain of the forward transform.
inline constexpr int kDctGain = 16;

namespace detail {

inline std::int32_t round_shift_sat16(std::int64_t v, int shift) {
  const std::int64_t r = (v + (std::int64_t{1} << (shift - 1))) >> shift;
  return static_cast<std::int32_t>(r < -32768 ? -32768 : (r > 32767 ? 32767 : r));
}

}  // namespace detail

/// Residual samples (row-major 8x8) -> coefficients (row-major, [v][u]).
inline Block8 forward_dct8(const Block8& in) {
  Block8 tmp{}, out{};
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      std::int64_t acc = 0;
      for (int y = 0; y < 8; ++y) acc += static_cast<std::int64_t>(kDctBasis8[u][y]) * in[y * 8 + x];
      tmp[u * 8 + x] = detail::round_shift_sat16(acc, 2);
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      std::int64_t acc = 0;
      for (int x = 0; x < 8; ++x) acc += static_cast<std::int64_t>(kDctBasis8[u][x]) * tmp[v * 8 + x];
      out[v * 8 + u] = detail::round_shift_sat16(acc, 9);
    }
  return out;
}

inline Block8 inverse_dct8(const Block8& coef) {
  Block8 tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      std::int64_t acc = 0;
      for (int v = 0; v < 8; ++v) acc += static_cast<std::int64_t>(kDctBasis8[v][y]) * coef[v * 8 + u];
      tmp[y * 8 + u] = detail::round_shift_sat16(acc, 7);
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      std::int64_t acc = 0;
      for (int u = 0; u < 8; ++u) acc += static_cast<std::int64_t>(kDctBasis8[u][x]) * tmp[y * 8 + u];
      out[y * 8 + x] = detail::round_shift_sat16(acc, 12);
    }
  return out;
}

/// Zig-zag scan: scan position -> row-major index.
inline constexpr std::array<int, 64> kZigZag8 = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

}  // namespace fbv
