#pragma once

// Symbol <-> bit labels. Bits are MSB-first: bit 1 is the most significant bit
// of the label. Gray labels x with gray(x) = x ^ (x >> 1). The advanced mapping
// keeps Gray for transitions leaving an even phase state and shifts the label
// ring by one position when the state is odd: label(x) = gray((x + shift) mod M).

#include <span>
#include <string>
#include <vector>

#include "cpm1bit/common.hpp"

namespace cpm1bit {

enum class MappingKind { gray, advanced };

inline MappingKind parse_mapping(const std::string& s) {
  if (s == "gray") return MappingKind::gray;
  if (s == "advanced") return MappingKind::advanced;
  throw ConfigError("unknown mapping '" + s + "' (expected gray or advanced)");
}

inline const char* mapping_name(MappingKind k) { return k == MappingKind::gray ? "gray" : "advanced"; }

inline int gray(int x) { return x ^ (x >> 1); }

inline int gray_inverse(int g) {
  int x = 0;
  for (; g; g >>= 1) x ^= g;
  return x;
}

struct MapperSpec {
  MappingKind kind = MappingKind::gray;
  int bits_per_symbol = 3;
  int odd_shift = 1;  // ring shift direction for odd states; +1 is the calibrated choice

  int order() const { return 1 << bits_per_symbol; }

  void validate() const {
    if (bits_per_symbol < 1 || bits_per_symbol > 8) throw ConfigError("bits per symbol out of range");
    if (kind == MappingKind::advanced && bits_per_symbol != 3)
      throw ConfigError("advanced mapping is defined for 8-ary CPM only");
    if (odd_shift != 1 && odd_shift != -1) throw ConfigError("odd_shift must be +1 or -1");
  }

  /// Label of symbol x leaving a state of the given parity (0 even, 1 odd).
  int label(int x, int parity) const {
    const int M = order();
    if (x < 0 || x >= M) throw ConfigError("symbol out of range");
    if (parity != 0 && parity != 1) throw ConfigError("parity must be 0 or 1");
    if (kind == MappingKind::advanced && parity == 1) return gray(((x + odd_shift) % M + M) % M);
    return gray(x);
  }

  /// Symbol carrying the label at the given parity.
  int symbol(int label_bits, int parity) const {
    const int M = order();
    if (label_bits < 0 || label_bits >= M) throw ConfigError("bit label out of range");
    if (parity != 0 && parity != 1) throw ConfigError("parity must be 0 or 1");
    const int x = gray_inverse(label_bits);
    if (kind == MappingKind::advanced && parity == 1) return ((x - odd_shift) % M + M) % M;
    return x;
  }
};

/// bits: MSB-first, each 0 or 1.
inline int map_bits(std::span<const int> bits, int parity, const MapperSpec& spec) {
  if (static_cast<int>(bits.size()) != spec.bits_per_symbol) throw ConfigError("wrong number of bits");
  int label = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw ConfigError("bits must be 0 or 1");
    label = (label << 1) | b;
  }
  return spec.symbol(label, parity);
}

/// Bit i (1-based, MSB first) of symbol x's label.
inline int demap_bit(int x, int i, int parity, const MapperSpec& spec) {
  if (i < 1 || i > spec.bits_per_symbol) throw ConfigError("bit index out of range");
  return (spec.label(x, parity) >> (spec.bits_per_symbol - i)) & 1;
}

/// Symbol priors from extrinsic bit LLRs (L = ln P(b=0)/P(b=1)):
/// log P(x) = sum_i [-b_i L_i - softplus(-L_i)], returned normalized.
inline std::vector<double> log_priors_from_llr(std::span<const double> llr, int parity, const MapperSpec& spec) {
  const int B = spec.bits_per_symbol;
  if (static_cast<int>(llr.size()) != B) throw ConfigError("wrong number of LLRs");
  const int M = spec.order();
  std::vector<double> lp(static_cast<std::size_t>(M));
  for (int x = 0; x < M; ++x) {
    const int lab = spec.label(x, parity);
    double s = 0.0;
    for (int i = 0; i < B; ++i) {
      const int b = (lab >> (B - 1 - i)) & 1;
      s += -b * llr[i] - softplus(-llr[i]);
    }
    lp[x] = s;
  }
  const double z = log_sum_exp(lp);
  for (auto& v : lp) v -= z;
  return lp;
}

inline std::vector<double> priors_from_llr(std::span<const double> llr, int parity, const MapperSpec& spec) {
  auto lp = log_priors_from_llr(llr, parity, spec);
  for (auto& v : lp) v = std::exp(v);
  return lp;
}

}  // namespace cpm1bit
