#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpm1bit/common.hpp"

namespace cpm1bit {

enum class Pulse { rec };

inline Pulse parse_pulse(const std::string& name) {
  if (name == "1REC" || name == "REC" || name == "rec") return Pulse::rec;
  throw ConfigError("unsupported frequency pulse '" + name + "' (only 1REC is available)");
}

/// CPM parameters. All trellis dimensions derive from these fields.
struct CpmConfig {
  int mod_order = 8;    // M_cpm, power of two
  int h_num = 1;        // K_cpm
  int h_den = 8;        // P_cpm
  int pulse_memory = 1; // L_cpm (symbols)
  Pulse pulse = Pulse::rec;
  int oversampling = 3; // M, samples per symbol after decimation
  int highres = 8;      // D, sub-grid multiplier
  std::optional<double> phase_offset;  // phi0; defaults to pi*h
  double symbol_energy = 1.0;
  double symbol_duration = 1.0;

  /// M_cpm=8, h=1/8, 1REC, M=3, D=8, phi0=pi/8.
  static CpmConfig case_study() { return CpmConfig{}; }

  double h() const { return static_cast<double>(h_num) / h_den; }
  double phi0() const { return phase_offset.value_or(kPi * h()); }
  int bits_per_symbol() const {
    int b = 0;
    while ((1 << b) < mod_order) ++b;
    return b;
  }
  int samples_per_symbol() const { return oversampling * highres; }
  double amplitude() const { return std::sqrt(symbol_energy / symbol_duration); }
  /// Tilt frequency h(M_cpm-1)/(2 T_s).
  double tilt_frequency() const { return h() * (mod_order - 1) / (2.0 * symbol_duration); }

  void validate() const {
    if (mod_order < 2 || (mod_order & (mod_order - 1)) != 0)
      throw ConfigError("mod_order must be a power of two >= 2");
    if (h_num <= 0 || h_den <= 0) throw ConfigError("modulation index terms must be positive");
    if (std::gcd(h_num, h_den) != 1)
      throw ConfigError("h_num and h_den must be relatively prime");
    if (pulse_memory != 1) throw ConfigError("only full-response 1REC (pulse_memory = 1) is supported");
    if (oversampling < 1 || highres < 1) throw ConfigError("oversampling and highres must be >= 1");
    if (!(symbol_energy > 0) || !(symbol_duration > 0))
      throw ConfigError("symbol energy and duration must be positive");
  }

  /// Stable 64-bit fingerprint of every field, used for cache keys.
  std::uint64_t hash() const {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    auto add = [&h](std::uint64_t v) { h = mix64(h ^ v); };
    auto add_d = [&add](double d) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof d);
      std::memcpy(&bits, &d, sizeof d);
      add(bits);
    };
    add(static_cast<std::uint64_t>(mod_order));
    add(static_cast<std::uint64_t>(h_num));
    add(static_cast<std::uint64_t>(h_den));
    add(static_cast<std::uint64_t>(pulse_memory));
    add(static_cast<std::uint64_t>(pulse));
    add(static_cast<std::uint64_t>(oversampling));
    add(static_cast<std::uint64_t>(highres));
    add_d(phi0());
    add_d(symbol_energy);
    add_d(symbol_duration);
    return h;
  }
};

/// Antipodal symbol alpha and its tilted-trellis index x = (alpha + M_cpm - 1)/2.
struct SymbolPair {
  int alpha;
  int x;

  static SymbolPair from_x(int x, int mod_order) { return {2 * x - mod_order + 1, x}; }
  static SymbolPair from_alpha(int alpha, int mod_order) {
    if ((alpha + mod_order - 1) % 2 != 0 || alpha < -(mod_order - 1) || alpha > mod_order - 1)
      throw ConfigError("alpha outside the odd-integer alphabet");
    return {alpha, (alpha + mod_order - 1) / 2};
  }
};

/// Absolute phase state beta with the last L_cpm symbols.
struct ModulatorState {
  int beta = 0;
  std::vector<int> recent_symbols;
};

/// beta' = (beta + K_cpm x) mod P_cpm.
inline int advance_beta(const CpmConfig& cfg, int beta, int x) {
  if (beta < 0 || beta >= cfg.h_den) throw ConfigError("phase state out of range");
  if (x < 0 || x >= cfg.mod_order) throw ConfigError("symbol out of range");
  return static_cast<int>((beta + static_cast<long long>(cfg.h_num) * x) % cfg.h_den);
}

/// Phase response f(tau) of the frequency pulse.
inline double phase_response(const CpmConfig& cfg, double tau) {
  const double span = cfg.pulse_memory * cfg.symbol_duration;
  if (tau <= 0) return 0.0;
  if (tau > span) return 0.5;
  return tau / (2.0 * span);
}

/// Tilted phase psi(tau + k T_s) for 0 < tau <= T_s, given beta_{k-L_cpm} and the
/// symbols x_{k-L_cpm+1..k} (oldest first, last entry is x_k).
inline double tilted_phase(const CpmConfig& cfg, int beta, std::span<const int> symbols, double tau) {
  const int L = cfg.pulse_memory;
  const double h = cfg.h();
  const int Mc = cfg.mod_order;
  double psi = 2.0 * kPi * beta / cfg.h_den;
  for (int l = 0; l < L; ++l) {
    const int x = symbols[symbols.size() - 1 - l];
    psi += 2.0 * kPi * h * (2 * x - Mc + 1) * phase_response(cfg, tau + l * cfg.symbol_duration);
  }
  psi += kPi * h * (Mc - 1) * (tau / cfg.symbol_duration + L - 1);
  return psi + cfg.phi0();
}

/// The M*D samples psi(T_s i/(MD)), i = 1..MD, of one symbol interval
/// (right-closed grid: the last sample sits on the interval end).
inline std::vector<double> tilted_phase_vector(const CpmConfig& cfg, int beta,
                                               std::span<const int> symbols) {
  if (static_cast<int>(symbols.size()) != cfg.pulse_memory)
    throw ConfigError("tilted_phase_vector needs exactly pulse_memory symbols");
  for (int x : symbols)
    if (x < 0 || x >= cfg.mod_order) throw ConfigError("symbol out of range");
  const int n = cfg.samples_per_symbol();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i)
    out[i - 1] = tilted_phase(cfg, beta, symbols, cfg.symbol_duration * i / n);
  return out;
}

inline std::vector<double> tilted_phase_vector(const CpmConfig& cfg, int beta, int x) {
  return tilted_phase_vector(cfg, beta, std::span<const int>(&x, 1));
}

/// Unwrapped tilted phase of a whole block on the high-rate grid.
inline std::vector<double> tilted_phase_block(const CpmConfig& cfg, std::span<const int> symbols,
                                              int beta0 = 0) {
  const int n = cfg.samples_per_symbol();
  std::vector<double> phase;
  phase.reserve(symbols.size() * n);
  int beta = beta0;
  // Unwrapped offset: beta is stored reduced, so count the whole turns it
  // dropped (an integer count keeps long blocks free of rounding drift).
  long long turns = 0;
  for (int x : symbols) {
    const auto seg = tilted_phase_vector(cfg, beta, x);
    const double offset = 2.0 * kPi * static_cast<double>(turns);
    for (double p : seg) phase.push_back(p + offset);
    const long long raw = beta + static_cast<long long>(cfg.h_num) * x;
    turns += raw / cfg.h_den;
    beta = advance_beta(cfg, beta, x);
  }
  return phase;
}

/// Complex baseband sqrt(Es/Ts) e^{j psi} on the high-rate grid.
inline std::vector<std::complex<double>> modulate_block(std::span<const int> symbols,
                                                        const CpmConfig& cfg, int beta0 = 0) {
  const auto phase = tilted_phase_block(cfg, symbols, beta0);
  const double a = cfg.amplitude();
  std::vector<std::complex<double>> out(phase.size());
  for (std::size_t i = 0; i < phase.size(); ++i) out[i] = std::polar(a, phase[i]);
  return out;
}

/// Untilted phase phi(t) = 2 pi h sum alpha_k f(t - k T_s) + phi0 on the
/// high-rate grid, computed from the alpha symbols with a running sum over the
/// completed pulses.
inline std::vector<double> untilted_phase_block(const CpmConfig& cfg, std::span<const int> symbols) {
  const int n = cfg.samples_per_symbol();
  const double h = cfg.h();
  std::vector<double> out;
  out.reserve(symbols.size() * n);
  double settled = cfg.phi0();  // contribution of pulses that have reached f = 1/2
  for (int x : symbols) {
    const int alpha = SymbolPair::from_x(x, cfg.mod_order).alpha;
    for (int i = 1; i <= n; ++i) {
      const double tau = cfg.symbol_duration * i / n;
      out.push_back(settled + 2.0 * kPi * h * alpha * phase_response(cfg, tau));
    }
    settled += kPi * h * alpha;
  }
  return out;
}

}  // namespace cpm1bit
