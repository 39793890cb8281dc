#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace cpm1bit {

inline constexpr double kPi = 3.14159265358979323846;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (CLI exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Numerical failure: non-SPD matrix, impossible likelihood, table build abort (CLI exit code 3).
class NumericalError : public Error {
public:
  using Error::Error;
};

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Magnitude limit for every LLR that leaves a detector or decoder.
inline constexpr double kLlrClamp = 50.0;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one Monte Carlo block. Depends only on the triple, never on
/// which worker runs the block.
inline std::uint64_t block_seed(std::uint64_t master, std::uint64_t snr_index,
                                std::uint64_t block_index) {
  return mix64(mix64(mix64(master) ^ (snr_index + 0x51ed2701ULL)) ^ block_index);
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

/// log(sum(exp(v))) over a span; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(1 + exp(x)), stable for large |x|.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Wrap an angle to (-pi, pi].
inline double wrap_phase(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline int ipow(int base, int exp) {
  int r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

}  // namespace cpm1bit
