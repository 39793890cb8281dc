#pragma once

// Receiver front end on the high-rate grid (M*D samples per symbol): complex
// AWGN, receive filter, decimation to M samples per symbol, 1-bit quantizer.
//
// Index conventions. Within a block the high-rate sample with index q sits at
// time (q+1) T_s/(MD) from the block start. The filter output at index q is
//   z[q] = sum_j taps[j] * r[q-j-1],   taps[j] = g((j+1) T_s/(MD)),
// and the m-th kept sample (m = 1..M) of symbol interval r is the centre sample
// of the m-th group of D outputs, q = r*MD + (m-1)*D + D/2 - 1, i.e. 1-based
// high-rate index (r*M + m)*D - D/2. With the T_s/2 rect this puts the
// effective (group-delay corrected) sampling instants on the T_s/M grid, half a
// high-rate sample early. A transmitted block starts with
// L_g preamble symbols x = 0 from beta = 0, so data interval k (0-based) is
// interval L_g + k of the block.
//
// Quantized output patterns. A sample vector is real-stacked as
// [Re z_1, Im z_1, ..., Re z_M, Im z_M]; bit i of the pattern integer is set
// when component i is negative.

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpm1bit/cpm.hpp"
#include "cpm1bit/mvn.hpp"
#include "cpm1bit/trellis.hpp"

namespace cpm1bit {

using cplx = std::complex<double>;

/// Rectangular bandpass receive filter, duration in units of T_s.
struct FilterSpec {
  double duration = 0.5;  // T_g / T_s
  int decimation_offset = -1;  // c in q = r*MD + (m-1)*D + c; -1 selects D/2 - 1

  int memory_symbols() const { return static_cast<int>(std::ceil(duration - 1e-12)); }
  void validate() const {
    if (!(duration > 0)) throw ConfigError("filter duration must be positive");
  }
};

struct ReceiveFilter {
  std::vector<cplx> taps;  // length L_g*M*D
  int memory_symbols = 1;  // L_g
};

/// g(t) = rect((t - c)/T_g) e^{j 2 pi df (t - c)} with c = L_g T_s/2, sampled at
/// t = (j+1) T_s/(MD) and scaled to unit L2 norm. The rect is taken half-open,
/// nonzero on (c - T_g/2, c + T_g/2], so a T_s/2 filter keeps exactly MD/2 taps.
inline ReceiveFilter build_filter(const CpmConfig& cfg, const FilterSpec& spec = {}) {
  cfg.validate();
  spec.validate();
  ReceiveFilter f;
  f.memory_symbols = spec.memory_symbols();
  const int n = cfg.samples_per_symbol();
  const int len = f.memory_symbols * n;
  const double Ts = cfg.symbol_duration;
  const double c = 0.5 * f.memory_symbols * Ts;
  const double half = 0.5 * spec.duration * Ts;
  const double df = cfg.tilt_frequency();
  f.taps.assign(static_cast<std::size_t>(len), cplx(0.0, 0.0));
  double norm2 = 0.0;
  for (int j = 0; j < len; ++j) {
    // Integer arithmetic on the grid keeps the rect edges exact.
    const double t = Ts * (j + 1) / n;
    const double lo = (c - half) * n / Ts, hi = (c + half) * n / Ts;
    const double idx = j + 1;
    if (idx > lo + 1e-9 && idx <= hi + 1e-9) {
      f.taps[j] = std::polar(1.0, 2.0 * kPi * df * (t - c));
      norm2 += 1.0;
    }
  }
  if (norm2 == 0.0) throw ConfigError("receive filter has no taps on the sample grid");
  const double scale = 1.0 / std::sqrt(norm2);
  for (auto& t : f.taps) t *= scale;
  return f;
}

/// Component-wise sign with sign(0) = +1.
inline cplx quantize(cplx z) { return {z.real() < 0 ? -1.0 : 1.0, z.imag() < 0 ? -1.0 : 1.0}; }

/// Orthant of a pattern: component i is negative (-1) when bit i is set.
inline std::vector<int> pattern_signs(std::uint32_t pattern, int dim) {
  std::vector<int> s(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) s[i] = (pattern >> i) & 1u ? -1 : 1;
  return s;
}

inline std::uint32_t pattern_of(std::span<const cplx> samples) {
  std::uint32_t p = 0;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    if (samples[m].real() < 0) p |= 1u << (2 * m);
    if (samples[m].imag() < 0) p |= 1u << (2 * m + 1);
  }
  return p;
}

class FrontendModel {
public:
  FrontendModel(const CpmConfig& cfg, const FilterSpec& spec, double noise_variance, int output_memory = 0)
      : cfg_(cfg), spec_(spec), filter_(build_filter(cfg, spec)), sigma2_(noise_variance), N_(output_memory) {
    if (!(noise_variance >= 0) || !std::isfinite(noise_variance))
      throw ConfigError("noise variance must be finite and >= 0");
    if (output_memory < 0) throw ConfigError("output memory N must be >= 0");
    if (cfg.pulse_memory + filter_.memory_symbols + N_ > 8) throw ConfigError("total memory above 8");
    offset_ = spec.decimation_offset < 0 ? std::max(cfg.highres / 2 - 1, 0) : spec.decimation_offset;
    if (offset_ + (cfg.oversampling - 1) * cfg.highres >= cfg.samples_per_symbol())
      throw ConfigError("decimation offset leaves the symbol interval");
  }

  const CpmConfig& cfg() const { return cfg_; }
  const FilterSpec& filter_spec() const { return spec_; }
  const ReceiveFilter& filter() const { return filter_; }
  double noise_variance() const { return sigma2_; }
  int output_memory() const { return N_; }
  int filter_memory() const { return filter_.memory_symbols; }
  /// Offset c of the kept outputs: sample m of interval r is q = r*MD + (m-1)*D + c.
  int decimation_offset() const { return offset_; }
  /// L = L_cpm + L_g + N.
  int total_memory() const { return cfg_.pulse_memory + filter_.memory_symbols + N_; }
  /// Real dimension of one detector observation window, 2M(N+1).
  int window_dim() const { return 2 * cfg_.oversampling * (N_ + 1); }

  /// Filter output at the kept instants of intervals [first, first+count) of a
  /// high-rate block (interval 0 starts the block). Needs first >= L_g.
  std::vector<cplx> filter_decimate(std::span<const cplx> rx, int first, int count) const {
    const int n = cfg_.samples_per_symbol();
    const int D = cfg_.highres;
    const int Lg = filter_.memory_symbols;
    if (first < Lg) throw ConfigError("decimation window starts inside the filter memory");
    if (static_cast<std::size_t>(first + count) * n > rx.size())
      throw ConfigError("received block shorter than the decimation window");
    const int taps = static_cast<int>(filter_.taps.size());
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(count) * cfg_.oversampling);
    for (int r = first; r < first + count; ++r) {
      for (int m = 1; m <= cfg_.oversampling; ++m) {
        const long q = static_cast<long>(r) * n + static_cast<long>(m - 1) * D + offset_;
        cplx acc(0.0, 0.0);
        for (int j = 0; j < taps; ++j) {
          const cplx& t = filter_.taps[j];
          if (t.real() != 0.0 || t.imag() != 0.0) acc += t * rx[q - j - 1];
        }
        out.push_back(acc);
      }
    }
    return out;
  }

  /// Real-stacked noiseless means for the window (beta_{k-L}, x_{k-L+1..k}):
  /// the N+1 most recent intervals, oldest first.
  std::vector<double> window_mean(int beta, std::span<const int> symbols) const {
    if (static_cast<int>(symbols.size()) != total_memory())
      throw ConfigError("window needs exactly L symbols");
    const auto tx = modulate_block(symbols, cfg_, beta);
    const auto z = filter_decimate(tx, filter_.memory_symbols, N_ + 1);
    std::vector<double> mu;
    mu.reserve(z.size() * 2);
    for (const auto& v : z) {
      mu.push_back(v.real());
      mu.push_back(v.imag());
    }
    return mu;
  }

  /// Real-valued rewriting of sigma_n^2 D G G^H D^T over one window.
  /// Re/Re and Im/Im blocks carry Re(C)/2; cov(Re z_a, Im z_b) = -Im(C_ab)/2.
  Matrix covariance() const {
    const int n = cfg_.samples_per_symbol();
    const int D = cfg_.highres;
    const int M = cfg_.oversampling;
    const int K = M * (N_ + 1);
    const int taps = static_cast<int>(filter_.taps.size());
    // Response of each kept sample to a noise impulse at high-rate index p.
    std::vector<long> q(static_cast<std::size_t>(K));
    for (int w = 0; w <= N_; ++w)
      for (int m = 1; m <= M; ++m) q[w * M + m - 1] = static_cast<long>(w) * n + static_cast<long>(m - 1) * D + offset_;
    Matrix R(static_cast<std::size_t>(2 * K));
    for (int a = 0; a < K; ++a) {
      for (int b = 0; b < K; ++b) {
        cplx c(0.0, 0.0);
        for (int ja = 0; ja < taps; ++ja) {
          const long p = q[a] - ja - 1;
          const long jb = q[b] - p - 1;
          if (jb < 0 || jb >= taps) continue;
          c += filter_.taps[ja] * std::conj(filter_.taps[jb]);
        }
        c *= sigma2_;
        R(2 * a, 2 * b) = 0.5 * c.real();
        R(2 * a + 1, 2 * b + 1) = 0.5 * c.real();
        R(2 * a, 2 * b + 1) = -0.5 * c.imag();
        R(2 * a + 1, 2 * b) = 0.5 * c.imag();
      }
    }
    return R;
  }

private:
  CpmConfig cfg_;
  FilterSpec spec_;
  ReceiveFilter filter_;
  double sigma2_;
  int N_;
  int offset_ = 0;
};

/// Prepends the L_g preamble symbols (x = 0, beta = 0) and modulates.
inline std::vector<cplx> transmit_block(std::span<const int> symbols, const FrontendModel& model) {
  std::vector<int> padded(static_cast<std::size_t>(model.filter_memory()), 0);
  padded.insert(padded.end(), symbols.begin(), symbols.end());
  return modulate_block(padded, model.cfg(), 0);
}

/// Adds circular complex Gaussian noise, variance sigma_n^2 per high-rate sample.
inline std::vector<cplx> add_noise(std::span<const cplx> tx, double sigma2, Rng& rng) {
  std::vector<cplx> rx(tx.begin(), tx.end());
  if (sigma2 == 0.0) return rx;
  std::normal_distribution<double> n(0.0, std::sqrt(0.5 * sigma2));
  for (auto& v : rx) {
    const double re = n(rng);
    const double im = n(rng);
    v += cplx(re, im);
  }
  return rx;
}

/// Unquantized filter outputs for every data interval of a transmitted block.
inline std::vector<cplx> receive_samples(std::span<const cplx> tx, const FrontendModel& model, Rng& rng) {
  const int n = model.cfg().samples_per_symbol();
  if (tx.size() % static_cast<std::size_t>(n) != 0 ||
      tx.size() / n <= static_cast<std::size_t>(model.filter_memory()))
    throw ConfigError("transmit block length does not match the preamble and symbol grid");
  const auto rx = add_noise(tx, model.noise_variance(), rng);
  const int symbols = static_cast<int>(tx.size() / n) - model.filter_memory();
  return model.filter_decimate(rx, model.filter_memory(), symbols);
}

/// y_k patterns (one per data symbol) for a transmitted block.
inline std::vector<std::uint32_t> simulate_received_bits(std::span<const cplx> tx, const FrontendModel& model,
                                                         Rng& rng) {
  const auto z = receive_samples(tx, model, rng);
  const auto M = static_cast<std::size_t>(model.cfg().oversampling);
  std::vector<std::uint32_t> y(z.size() / M);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = pattern_of(std::span<const cplx>(z).subspan(k * M, M));
  return y;
}

/// Real-stacked noiseless mean of the transition's observation window.
inline std::vector<double> transition_mean(const Trellis& trellis, int s_prev, int s_next,
                                           const FrontendModel& model) {
  if (trellis.memory() != model.total_memory()) throw ConfigError("trellis memory does not match the front end");
  const int id = trellis.find(s_prev, s_next);
  if (id < 0) throw ConfigError("inconsistent transition");
  const auto& t = trellis.transition(id);
  return model.window_mean(t.window_beta, t.window);
}

inline std::vector<double> transition_mean(const TrellisState& s_prev, const TrellisState& s_next,
                                           const FrontendModel& model) {
  const Trellis trellis(model.cfg(), model.total_memory());
  return transition_mean(trellis, trellis.index(s_prev), trellis.index(s_next), model);
}

inline Matrix noise_covariance(const FrontendModel& model) { return model.covariance(); }

}  // namespace cpm1bit
