#pragma once

// Feedforward convolutional codes with periodic puncturing, a log-domain MAP
// decoder over the code trellis, and S-random interleavers.
//
// Generators are octal; the most significant tap multiplies the current input,
// so 5 = 101 taps u_k and u_{k-2}. Coded bits are emitted step by step in
// generator order. Puncture patterns are written one group per trellis step,
// one digit per generator output, e.g. "11|01"; the pattern is applied
// cyclically from the first step, also over the termination tail.
//
// LLR convention everywhere: L = ln P(b=0)/P(b=1).

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpm1bit/common.hpp"

namespace cpm1bit {

struct CodeSpec {
  std::vector<int> generators;               // octal values as written, e.g. {5, 7}
  std::vector<std::vector<int>> puncture;    // one group per step; empty means no puncturing

  static CodeSpec make(std::vector<int> octal, const std::string& pattern = "") {
    CodeSpec c;
    c.generators = std::move(octal);
    if (!pattern.empty()) c.puncture = parse_puncture(pattern);
    c.validate();
    return c;
  }

  static std::vector<std::vector<int>> parse_puncture(const std::string& s) {
    std::vector<std::vector<int>> groups(1);
    for (char ch : s) {
      if (ch == '|') {
        groups.emplace_back();
      } else if (ch == '0' || ch == '1') {
        groups.back().push_back(ch - '0');
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        throw ConfigError(std::string("bad character in puncture pattern: ") + ch);
      }
    }
    return groups;
  }

  std::string puncture_string() const {
    std::string s;
    for (std::size_t g = 0; g < puncture.size(); ++g) {
      if (g) s += '|';
      for (int b : puncture[g]) s += static_cast<char>('0' + b);
    }
    return s;
  }

  /// Binary tap masks (octal digits reinterpreted).
  std::vector<unsigned> masks() const {
    std::vector<unsigned> m;
    for (int g : generators) {
      unsigned v = 0, shift = 0;
      for (int o = g; o > 0; o /= 10, shift += 3) {
        const int d = o % 10;
        if (d > 7) throw ConfigError("generator " + std::to_string(g) + " is not octal");
        v |= static_cast<unsigned>(d) << shift;
      }
      m.push_back(v);
    }
    return m;
  }

  int outputs() const { return static_cast<int>(generators.size()); }

  /// K_cc: one more than the highest delay used by any generator.
  int constraint_length() const {
    int k = 0;
    for (unsigned m : masks()) k = std::max(k, static_cast<int>(std::bit_width(m)));
    return k;
  }

  int period() const { return puncture.empty() ? 1 : static_cast<int>(puncture.size()); }

  int kept_per_period() const {
    if (puncture.empty()) return outputs();
    int n = 0;
    for (const auto& g : puncture)
      for (int b : g) n += b;
    return n;
  }

  double rate() const { return static_cast<double>(period()) / kept_per_period(); }

  bool keeps(int step, int output) const {
    if (puncture.empty()) return true;
    return puncture[static_cast<std::size_t>(step % period())][output] != 0;
  }

  void validate() const {
    if (generators.empty()) throw ConfigError("code needs at least one generator");
    for (unsigned m : masks())
      if (m == 0) throw ConfigError("zero generator");
    if (constraint_length() > 16) throw ConfigError("constraint length above 16");
    for (const auto& g : puncture) {
      if (static_cast<int>(g.size()) != outputs())
        throw ConfigError("each puncture group needs one digit per generator");
    }
    if (!puncture.empty() && kept_per_period() == 0) throw ConfigError("puncture pattern keeps nothing");
  }
};

/// Coded bits (before puncturing) of info followed by K_cc-1 zero tail bits.
inline std::vector<int> conv_encode(std::span<const int> info, const CodeSpec& spec) {
  const auto masks = spec.masks();
  const int K = spec.constraint_length();
  const std::size_t steps = info.size() + static_cast<std::size_t>(K - 1);
  std::vector<int> out;
  out.reserve(steps * masks.size());
  unsigned state = 0;  // bit K-2 holds u_{k-1}
  for (std::size_t k = 0; k < steps; ++k) {
    const int u = k < info.size() ? info[k] : 0;
    if (u != 0 && u != 1) throw ConfigError("info bits must be 0 or 1");
    const unsigned reg = (static_cast<unsigned>(u) << (K - 1)) | state;
    for (unsigned m : masks) out.push_back(std::popcount(reg & m) & 1);
    state = reg >> 1;
  }
  return out;
}

template <class T>
std::vector<T> puncture(std::span<const T> coded, const CodeSpec& spec) {
  const int n = spec.outputs();
  if (coded.size() % static_cast<std::size_t>(n) != 0) throw ConfigError("coded length is not a whole number of steps");
  std::vector<T> out;
  out.reserve(coded.size());
  const std::size_t steps = coded.size() / n;
  for (std::size_t k = 0; k < steps; ++k)
    for (int o = 0; o < n; ++o)
      if (spec.keeps(static_cast<int>(k % spec.period()), o)) out.push_back(coded[k * n + o]);
  return out;
}

/// Number of surviving bits for a given number of trellis steps.
inline std::size_t punctured_length(std::size_t steps, const CodeSpec& spec) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < steps; ++k)
    for (int o = 0; o < spec.outputs(); ++o) n += spec.keeps(static_cast<int>(k % spec.period()), o);
  return n;
}

/// Inverse of puncture on LLRs: punctured slots get 0.
inline std::vector<double> depuncture(std::span<const double> llr, const CodeSpec& spec, std::size_t steps) {
  if (llr.size() != punctured_length(steps, spec)) throw ConfigError("LLR count does not match the puncture pattern");
  const int n = spec.outputs();
  std::vector<double> out(steps * n, 0.0);
  std::size_t i = 0;
  for (std::size_t k = 0; k < steps; ++k)
    for (int o = 0; o < n; ++o)
      if (spec.keeps(static_cast<int>(k % spec.period()), o)) out[k * n + o] = llr[i++];
  return out;
}

struct CodeDecodeResult {
  std::vector<double> info_llr;       // APP of the info bits (tail excluded)
  std::vector<double> coded_app;      // APP of every coded bit (depunctured layout)
  std::vector<double> extrinsic;      // coded_app - channel, clamped
  std::vector<int> hard;              // 0 when info_llr >= 0
};

/// MAP decoding of a terminated code. channel: depunctured coded-bit LLRs
/// (steps*outputs). info_prior: optional a-priori LLRs of the info bits.
inline CodeDecodeResult code_bcjr(std::span<const double> channel, const CodeSpec& spec,
                                  std::span<const double> info_prior = {}) {
  const int n = spec.outputs();
  const int K = spec.constraint_length();
  const int S = 1 << (K - 1);
  if (channel.size() % static_cast<std::size_t>(n) != 0) throw ConfigError("channel LLRs are not whole steps");
  const int steps = static_cast<int>(channel.size() / n);
  const int info = steps - (K - 1);
  if (info < 0) throw ConfigError("block shorter than the code tail");
  if (!info_prior.empty() && static_cast<int>(info_prior.size()) != info)
    throw ConfigError("info prior length mismatch");
  const auto masks = spec.masks();

  // Output label of (state, input) and log branch metrics per step.
  std::vector<unsigned> label(static_cast<std::size_t>(S) * 2);
  for (int s = 0; s < S; ++s)
    for (int u = 0; u < 2; ++u) {
      const unsigned reg = (static_cast<unsigned>(u) << (K - 1)) | static_cast<unsigned>(s);
      unsigned lab = 0;
      for (int o = 0; o < n; ++o) lab |= static_cast<unsigned>(std::popcount(reg & masks[o]) & 1) << o;
      label[s * 2 + u] = lab;
    }
  auto next_state = [K](int s, int u) { return static_cast<int>(((static_cast<unsigned>(u) << (K - 1)) | s) >> 1); };
  auto gamma = [&](int k, int s, int u) {
    double g = 0.0;
    const unsigned lab = label[s * 2 + u];
    for (int o = 0; o < n; ++o)
      if ((lab >> o) & 1u) g -= channel[static_cast<std::size_t>(k) * n + o];
    if (u && k < info && !info_prior.empty()) g -= info_prior[k];
    return g;
  };
  auto allowed = [&](int k, int u) { return k < info || u == 0; };

  std::vector<double> alpha(static_cast<std::size_t>(steps + 1) * S, kNegInf);
  std::vector<double> beta(static_cast<std::size_t>(steps + 1) * S, kNegInf);
  alpha[0] = 0.0;
  for (int k = 0; k < steps; ++k) {
    double* an = &alpha[static_cast<std::size_t>(k + 1) * S];
    const double* a = &alpha[static_cast<std::size_t>(k) * S];
    for (int s = 0; s < S; ++s) {
      if (a[s] == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        if (!allowed(k, u)) continue;
        const int t = next_state(s, u);
        an[t] = log_add(an[t], a[s] + gamma(k, s, u));
      }
    }
    const double z = log_sum_exp(std::span<const double>(an, S));
    for (int s = 0; s < S; ++s) an[s] -= z;
  }
  beta[static_cast<std::size_t>(steps) * S + 0] = 0.0;
  for (int k = steps - 1; k >= 0; --k) {
    double* b = &beta[static_cast<std::size_t>(k) * S];
    const double* bn = &beta[static_cast<std::size_t>(k + 1) * S];
    for (int s = 0; s < S; ++s)
      for (int u = 0; u < 2; ++u) {
        if (!allowed(k, u)) continue;
        const int t = next_state(s, u);
        if (bn[t] == kNegInf) continue;
        b[s] = log_add(b[s], gamma(k, s, u) + bn[t]);
      }
    const double z = log_sum_exp(std::span<const double>(b, S));
    for (int s = 0; s < S; ++s) b[s] -= z;
  }

  CodeDecodeResult r;
  r.info_llr.resize(static_cast<std::size_t>(info));
  r.coded_app.resize(channel.size());
  r.extrinsic.resize(channel.size());
  r.hard.resize(static_cast<std::size_t>(info));
  std::vector<double> c0(static_cast<std::size_t>(n)), c1(static_cast<std::size_t>(n));
  for (int k = 0; k < steps; ++k) {
    const double* a = &alpha[static_cast<std::size_t>(k) * S];
    const double* bn = &beta[static_cast<std::size_t>(k + 1) * S];
    double u0 = kNegInf, u1 = kNegInf;
    std::fill(c0.begin(), c0.end(), kNegInf);
    std::fill(c1.begin(), c1.end(), kNegInf);
    for (int s = 0; s < S; ++s) {
      if (a[s] == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        if (!allowed(k, u)) continue;
        const int t = next_state(s, u);
        if (bn[t] == kNegInf) continue;
        const double m = a[s] + gamma(k, s, u) + bn[t];
        (u ? u1 : u0) = log_add(u ? u1 : u0, m);
        const unsigned lab = label[s * 2 + u];
        for (int o = 0; o < n; ++o) {
          double& c = (lab >> o) & 1u ? c1[o] : c0[o];
          c = log_add(c, m);
        }
      }
    }
    if (k < info) {
      const double l = u1 == kNegInf ? kLlrClamp : u0 == kNegInf ? -kLlrClamp : u0 - u1;
      r.info_llr[k] = std::clamp(l, -kLlrClamp, kLlrClamp);
      r.hard[k] = r.info_llr[k] >= 0 ? 0 : 1;
    }
    for (int o = 0; o < n; ++o) {
      const std::size_t i = static_cast<std::size_t>(k) * n + o;
      const double l = c1[o] == kNegInf ? kLlrClamp : c0[o] == kNegInf ? -kLlrClamp : c0[o] - c1[o];
      r.coded_app[i] = std::clamp(l, -kLlrClamp, kLlrClamp);
      r.extrinsic[i] = std::clamp(r.coded_app[i] - channel[i], -kLlrClamp, kLlrClamp);
    }
  }
  return r;
}

/// Permutation with the S-property: |i - j| <= s implies |perm[i] - perm[j]| > s.
struct InterleaverSpec {
  int length = 0;
  int s_parameter = 0;   // achieved s (may be below the requested one)
  std::uint64_t seed = 0;
  std::vector<int> permutation;  // out[i] = in[permutation[i]]
};

inline bool has_s_property(std::span<const int> perm, int s) {
  const int n = static_cast<int>(perm.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j <= std::min(n - 1, i + s); ++j)
      if (std::abs(perm[i] - perm[j]) <= s) return false;
  return true;
}

inline int default_s_parameter(int length) {
  return std::max(0, static_cast<int>(std::floor(std::sqrt(length / 2.0))));
}

/// Sequential random construction. Each position takes the first candidate
/// (in shuffled order) at distance > s from the previous s picks. At a dead end
/// a remaining candidate is swapped into an earlier slot where it fits and the
/// displaced value, if it fits at the end, is appended; when no such swap exists
/// the draw restarts. After `attempts` failed draws s is lowered by one.
inline InterleaverSpec make_s_random(int length, int s, std::uint64_t seed, int attempts = 20) {
  if (length < 0) throw ConfigError("interleaver length must be >= 0");
  if (s < 0) throw ConfigError("s must be >= 0");
  InterleaverSpec spec;
  spec.length = length;
  spec.seed = seed;
  Rng rng(seed);
  for (int cur = s; cur >= 0; --cur) {
    auto far = [cur](int a, int b) { return std::abs(a - b) > cur; };
    for (int attempt = 0; attempt < attempts; ++attempt) {
      std::vector<int> pool(static_cast<std::size_t>(length));
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<int> perm;
      perm.reserve(pool.size());
      // Can value v sit at slot `at` given the current perm, ignoring slot `skip`?
      auto fits = [&](int v, int at, int skip) {
        const int n = static_cast<int>(perm.size());
        for (int j = std::max(0, at - cur); j <= std::min(n - 1, at + cur); ++j)
          if (j != at && j != skip && !far(perm[j], v)) return false;
        return true;
      };
      bool ok = true;
      while (!pool.empty()) {
        const int i0 = static_cast<int>(perm.size());
        std::size_t pick = pool.size();
        for (std::size_t c = 0; c < pool.size(); ++c)
          if (fits(pool[c], i0, -1)) {
            pick = c;
            break;
          }
        if (pick != pool.size()) {
          perm.push_back(pool[pick]);
          pool[pick] = pool.back();
          pool.pop_back();
          continue;
        }
        const int v = pool.back();
        const int start = i0 > 0 ? static_cast<int>(rng() % static_cast<std::uint64_t>(i0)) : 0;
        int slot = -1;
        for (int d = 0; d < i0 && slot < 0; ++d) {
          const int j = (start + d) % i0;
          if (fits(v, j, -1) && fits(perm[j], i0, j) && (i0 - j > cur || far(v, perm[j]))) slot = j;
        }
        if (slot < 0) {
          ok = false;
          break;
        }
        perm.push_back(perm[slot]);
        perm[slot] = v;
        pool.pop_back();
      }
      if (ok) {
        spec.s_parameter = cur;
        spec.permutation = std::move(perm);
        return spec;
      }
    }
    if (cur == 0) break;
  }
  throw NumericalError("no S-random interleaver found");
}

template <class T>
std::vector<T> interleave(std::span<const T> in, const InterleaverSpec& spec) {
  if (static_cast<int>(in.size()) != spec.length) throw ConfigError("interleaver length mismatch");
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[static_cast<std::size_t>(spec.permutation[i])];
  return out;
}

template <class T>
std::vector<T> deinterleave(std::span<const T> in, const InterleaverSpec& spec) {
  if (static_cast<int>(in.size()) != spec.length) throw ConfigError("interleaver length mismatch");
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[static_cast<std::size_t>(spec.permutation[i])] = in[i];
  return out;
}

struct RateCheck {
  bool ok = true;
  double load_bpcu = 0.0;  // R * log2(M_cpm)
  std::string note;
};

/// Advisory check of R log2(M_cpm) <= I against a user-supplied achievable rate.
inline RateCheck validate_rate(double rate, int bits_per_symbol, std::optional<double> achievable_bpcu = {}) {
  RateCheck r;
  r.load_bpcu = rate * bits_per_symbol;
  if (!achievable_bpcu) {
    r.note = "no achievable-rate figure supplied; spectral load " + std::to_string(r.load_bpcu) + " bpcu";
    return r;
  }
  r.ok = r.load_bpcu <= *achievable_bpcu;
  r.note = r.ok ? "rate condition satisfied" : "spectral load exceeds the supplied achievable rate";
  return r;
}

inline RateCheck validate_rate(const CodeSpec& spec, int bits_per_symbol, std::optional<double> achievable_bpcu = {}) {
  return validate_rate(spec.rate(), bits_per_symbol, achievable_bpcu);
}

}  // namespace cpm1bit
