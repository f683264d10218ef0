#pragma once

// Nearest-center (hard) and softmax-weighted (soft) quantizers over the
// center set C_L = {0, 1, ..., 2^L - 1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fbv {

class CenterSet {
 public:
  explicit CenterSet(int level_bits) : level_bits_(level_bits) {
    if (level_bits < 1 || level_bits > 16)
      throw std::invalid_argument("level bits must be in [1, 16]");
    centers_.resize(std::size_t{1} << level_bits);
    for (std::size_t j = 0; j < centers_.size(); ++j) centers_[j] = static_cast<double>(j);
  }

  int level_bits() const { return level_bits_; }
  std::size_t size() const { return centers_.size(); }
  double operator[](std::size_t j) const { return centers_[j]; }
  double min() const { return centers_.front(); }
  double max() const { return centers_.back(); }
  const std::vector<double>& values() const { return centers_; }

 private:
  int level_bits_;
  std::vector<double> centers_;
};

/// Index of the nearest center; an exact midpoint resolves to the smaller index.
inline std::size_t quantize_hard_index(double w, const CenterSet& c) {
  std::size_t best = 0;
  double best_d = std::abs(w - c[0]);
  for (std::size_t j = 1; j < c.size(); ++j) {
    const double d = std::abs(w - c[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline double quantize_hard(double w, const CenterSet& c) { return c[quantize_hard_index(w, c)]; }

/// Softmax(-sigma * |w - c_j|)-weighted mean of the centers.
inline double quantize_soft(double w, const CenterSet& c, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft quantizer needs sigma > 0");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.size(); ++j)
    max_logit = std::max(max_logit, -sigma * std::abs(w - c[j]));
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double e = std::exp(-sigma * std::abs(w - c[j]) - max_logit);
    num += e * c[j];
    den += e;
  }
  return num / den;
}

/// Integer quantization level of a nonnegative magnitude (in step units).
///
/// The magnitude is shifted by an integer offset so it lands inside the center
/// range, then assigned to the nearest center. The offset is the affine bridge
/// between an unbounded coefficient and the bounded center set; the result is
/// uniform rounding with ties going down.
inline long quantize_magnitude(double magnitude, const CenterSet& c) {
  const long half = static_cast<long>(c.size() / 2);
  const long offset = std::max(0L, static_cast<long>(std::floor(magnitude)) - (half - 1));
  return offset + static_cast<long>(quantize_hard_index(magnitude - static_cast<double>(offset), c));
}

}  // namespace fbv
