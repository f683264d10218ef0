#pragma once

// Binary adaptive range coder.
//
// Normative description (bit exact):
//  * Probabilities are 15-bit: p1 = ((2*n1 + 1) << 15) / (2*(n0 + n1) + 2),
//    clamped to [1, 32767], where n0/n1 are the per-context symbol counts.
//    After each coded bin the matching count is incremented; when
//    n0 + n1 reaches 2^14 both counts are halved (rounding up).
//  * Encoder state: low (33 significant bits), range (32 bits, initially
//    0xFFFFFFFF), one cached byte plus a run of pending 0xFF bytes for carry
//    propagation. bound = (range >> 15) * (32768 - p1); a 0 keeps
//    [low, low + bound), a 1 keeps [low + bound, low + range).
//    Bypass bins halve the range. Renormalization shifts out one byte
//    whenever range < 2^24.
//  * Termination: five byte shifts. The first output byte is always 0 and
//    the decoder consumes exactly every byte of a well-formed stream, so any
//    truncation or trailing data is detected.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fbv/core.hpp"

namespace fbv {

inline constexpr int kProbBits = 15;
inline constexpr std::uint32_t kProbOne = 1u << kProbBits;
inline constexpr std::uint32_t kAdaptWindow = 1u << 14;

/// Counter-based adaptive probability of a binary context.
class AdaptiveBit {
 public:
  std::uint32_t p1() const {
    const std::uint64_t num = (2ull * n1_ + 1) << kProbBits;
    const std::uint64_t den = 2ull * (n0_ + n1_) + 2;
    const auto p = static_cast<std::uint32_t>(num / den);
    return std::clamp<std::uint32_t>(p, 1, kProbOne - 1);
  }

  void update(int bit) {
    (bit ? n1_ : n0_) += 1;
    if (n0_ + n1_ >= kAdaptWindow) {
      n0_ = (n0_ + 1) >> 1;
      n1_ = (n1_ + 1) >> 1;
    }
  }

  std::uint32_t n0() const { return n0_; }
  std::uint32_t n1() const { return n1_; }

  friend bool operator==(const AdaptiveBit&, const AdaptiveBit&) = default;

 private:
  std::uint32_t n0_ = 0;
  std::uint32_t n1_ = 0;
};

class RangeEncoder {
 public:
  void encode(int bit, AdaptiveBit& ctx) {
    const std::uint32_t bound = (range_ >> kProbBits) * (kProbOne - ctx.p1());
    if (bit) {
      low_ += bound;
      range_ -= bound;
    } else {
      range_ = bound;
    }
    ctx.update(bit);
    normalize();
  }

  void encode_bypass(int bit) {
    range_ >>= 1;
    if (bit) low_ += range_;
    normalize();
  }

  /// Writes `nbits` low bits of `value`, MSB first, as bypass bins.
  void encode_bypass_bits(std::uint32_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) encode_bypass(static_cast<int>((value >> i) & 1u));
  }

  std::vector<std::uint8_t> finish() && {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

  std::size_t bytes_so_far() const { return out_.size() + cache_size_; }

 private:
  void normalize() {
    while (range_ < (1u << 24)) {
      range_ <<= 8;
      shift_low();
    }
  }

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
    if (next_byte() != 0) throw FormatError("range coder stream: bad leading byte");
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  int decode(AdaptiveBit& ctx) {
    const std::uint32_t bound = (range_ >> kProbBits) * (kProbOne - ctx.p1());
    int bit;
    if (code_ < bound) {
      range_ = bound;
      bit = 0;
    } else {
      code_ -= bound;
      range_ -= bound;
      bit = 1;
    }
    ctx.update(bit);
    normalize();
    return bit;
  }

  int decode_bypass() {
    range_ >>= 1;
    int bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    normalize();
    return bit;
  }

  std::uint32_t decode_bypass_bits(int nbits) {
    std::uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) v = (v << 1) | static_cast<std::uint32_t>(decode_bypass());
    return v;
  }

  /// Throws unless every byte of the stream was consumed.
  void finish() const {
    if (pos_ != data_.size()) throw FormatError("range coder stream: trailing bytes");
  }

 private:
  void normalize() {
    while (range_ < (1u << 24)) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
  }

  std::uint32_t next_byte() {
    if (pos_ >= data_.size()) throw FormatError("range coder stream: truncated");
    return data_[pos_++];
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

inline constexpr std::uint32_t kBypassContext = std::numeric_limits<std::uint32_t>::max();

/// One binary symbol together with the context that codes it.
struct ContextBin {
  std::uint32_t context = 0;  // kBypassContext for equiprobable bins
  std::uint8_t bit = 0;
};

/// Codes a flat bin sequence against `num_contexts` fresh adaptive contexts.
inline std::vector<std::uint8_t> encode_bits(std::span<const ContextBin> bins, std::size_t num_contexts) {
  std::vector<AdaptiveBit> model(num_contexts);
  RangeEncoder enc;
  for (const auto& b : bins) {
    if (b.context == kBypassContext) {
      enc.encode_bypass(b.bit);
    } else {
      if (b.context >= num_contexts) throw std::out_of_range("context index outside model");
      enc.encode(b.bit, model[b.context]);
    }
  }
  return std::move(enc).finish();
}

/// Decodes bins whose contexts are given by `plan` (same plan as the encoder).
inline std::vector<std::uint8_t> decode_bits(std::span<const std::uint8_t> bytes,
                                             std::span<const std::uint32_t> plan,
                                             std::size_t num_contexts) {
  std::vector<AdaptiveBit> model(num_contexts);
  RangeDecoder dec(bytes);
  std::vector<std::uint8_t> bits;
  bits.reserve(plan.size());
  for (auto ctx : plan) {
    if (ctx == kBypassContext) {
      bits.push_back(static_cast<std::uint8_t>(dec.decode_bypass()));
    } else {
      if (ctx >= num_contexts) throw std::out_of_range("context index outside model");
      bits.push_back(static_cast<std::uint8_t>(dec.decode(model[ctx])));
    }
  }
  dec.finish();
  return bits;
}

// Exp-Golomb order-k with bypass bins, used for escape values.
inline void encode_exp_golomb(RangeEncoder& enc, std::uint32_t value, int k = 0) {
  while (value >= (1u << k)) {
    enc.encode_bypass(1);
    value -= 1u << k;
    ++k;
  }
  enc.encode_bypass(0);
  enc.encode_bypass_bits(value, k);
}

inline std::uint32_t decode_exp_golomb(RangeDecoder& dec, int k = 0) {
  std::uint32_t value = 0;
  while (dec.decode_bypass()) {
    value += 1u << k;
    if (++k > 30) throw FormatError("exp-golomb prefix too long");
  }
  return value + dec.decode_bypass_bits(k);
}

enum class PayloadKind { kBackgroundResidual, kForegroundResidual, kForegroundMotion };

struct TaggedPayload {
  PayloadKind kind;
  std::size_t bytes;
};

/// Bits per payload category (BR / FR / FMV).
struct BitBudgetReport {
  std::uint64_t bits_bg_residual = 0;
  std::uint64_t bits_fg_residual = 0;
  std::uint64_t bits_fg_motion = 0;

  std::uint64_t total() const { return bits_bg_residual + bits_fg_residual + bits_fg_motion; }
  double ratio_bg_residual() const { return ratio(bits_bg_residual); }
  double ratio_fg_residual() const { return ratio(bits_fg_residual); }
  double ratio_fg_motion() const { return ratio(bits_fg_motion); }

 private:
  double ratio(std::uint64_t bits) const {
    return total() == 0 ? 0.0 : static_cast<double>(bits) / static_cast<double>(total());
  }
};

inline BitBudgetReport bit_cost(std::span<const TaggedPayload> payloads) {
  BitBudgetReport r;
  for (const auto& p : payloads) {
    const std::uint64_t bits = 8ull * p.bytes;
    switch (p.kind) {
      case PayloadKind::kBackgroundResidual: r.bits_bg_residual += bits; break;
      case PayloadKind::kForegroundResidual: r.bits_fg_residual += bits; break;
      case PayloadKind::kForegroundMotion: r.bits_fg_motion += bits; break;
    }
  }
  if (r.total() == 0) throw std::invalid_argument("bit_cost: no payload bits");
  return r;
}

}  // namespace fbv
