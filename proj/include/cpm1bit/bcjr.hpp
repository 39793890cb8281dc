#pragma once

// Forward-backward (BCJR) detection over the extended CPM trellis with the
// auxiliary channel law as branch metric. Log domain with exact log-sum-exp
// and per-step normalization. The block starts in a known state and ends free.

#include <cstdint>
#include <span>
#include <vector>

#include "cpm1bit/channel_law.hpp"
#include "cpm1bit/mapping.hpp"
#include "cpm1bit/trellis.hpp"

namespace cpm1bit {

/// log P(x_k = x | parity of beta_{k-1}) for every step; empty means uniform.
class SymbolPriors {
public:
  SymbolPriors() = default;
  SymbolPriors(int steps, int order) : n_(steps), M_(order), logp_(static_cast<std::size_t>(steps) * 2 * order) {
    const double u = -std::log(static_cast<double>(order));
    std::fill(logp_.begin(), logp_.end(), u);
  }

  bool empty() const { return logp_.empty(); }
  int steps() const { return n_; }
  int order() const { return M_; }
  double* at(int k, int parity) { return &logp_[(static_cast<std::size_t>(k) * 2 + parity) * M_]; }
  double get(int k, int parity, int x) const { return logp_[(static_cast<std::size_t>(k) * 2 + parity) * M_ + x]; }

private:
  int n_ = 0;
  int M_ = 0;
  std::vector<double> logp_;
};

struct PosteriorFrame {
  int steps = 0;
  int transitions = 0;
  int bits = 0;
  std::vector<double> post;  // steps*transitions, P(s_{k-1}, s_k | y^n)
  std::vector<double> app0;  // steps*bits, P(b_{k,i} = 0 | y^n)
  std::vector<double> llr;   // steps*bits, ln(app0/app1), clamped

  std::span<const double> at(int k) const {
    return std::span<const double>(post).subspan(static_cast<std::size_t>(k) * transitions, transitions);
  }
};

inline double clamp_llr(double l) { return std::clamp(l, -kLlrClamp, kLlrClamp); }

/// Transition posteriors for observations y_1..y_n (y[k] holds y_{k+1}).
inline PosteriorFrame bcjr(const Trellis& tr, const ChannelLawTable& tab, std::span<const std::uint32_t> y,
                           const SymbolPriors& priors = {}, int start_state = -1) {
  const int S = tr.num_states();
  const int T = tr.num_transitions();
  const int n = static_cast<int>(y.size());
  const int Mc = tr.cfg().mod_order;
  if (tab.rows != T) throw ConfigError("channel law table does not match the trellis");
  if (tab.cols != 1 << (2 * tr.cfg().oversampling))
    throw ConfigError("detector supports output memory N = 0 only");
  if (!priors.empty() && (priors.steps() != n || priors.order() != Mc))
    throw ConfigError("prior frame does not match the observation length");
  if (start_state < 0) start_state = tr.start_state(0);
  if (start_state >= S) throw ConfigError("start state out of range");
  for (auto v : y)
    if (v >= static_cast<std::uint32_t>(tab.cols)) throw ConfigError("observation pattern out of range");

  const auto& trans = tr.transitions();
  std::vector<int> parity(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) parity[t] = trans[t].origin_beta & 1;
  const double uniform = -std::log(static_cast<double>(Mc));

  auto gamma = [&](int k, int t) {
    const double lp = priors.empty() ? uniform : priors.get(k, parity[t], trans[t].x);
    return tab.log_w(t, y[k]) + lp;
  };

  std::vector<double> alpha(static_cast<std::size_t>(n + 1) * S, kNegInf);
  alpha[start_state] = 0.0;
  std::vector<double> buf;
  for (int k = 0; k < n; ++k) {
    const double* a = &alpha[static_cast<std::size_t>(k) * S];
    double* an = &alpha[static_cast<std::size_t>(k + 1) * S];
    double mx = kNegInf;
    for (int s = 0; s < S; ++s) {
      const auto& in = tr.incoming(s);
      buf.resize(in.size());
      for (std::size_t i = 0; i < in.size(); ++i) {
        const int t = in[i];
        buf[i] = a[trans[t].from] == kNegInf ? kNegInf : a[trans[t].from] + gamma(k, t);
      }
      an[s] = log_sum_exp(buf);
      mx = std::max(mx, an[s]);
    }
    if (mx == kNegInf)
      throw NumericalError("forward recursion lost all probability mass at step " + std::to_string(k + 1));
    const double z = log_sum_exp(std::span<const double>(an, S));
    for (int s = 0; s < S; ++s) an[s] -= z;
  }

  PosteriorFrame f;
  f.steps = n;
  f.transitions = T;
  f.post.assign(static_cast<std::size_t>(n) * T, 0.0);
  std::vector<double> beta(static_cast<std::size_t>(S), 0.0), prev(static_cast<std::size_t>(S));
  std::vector<double> lp(static_cast<std::size_t>(T));
  for (int k = n - 1; k >= 0; --k) {
    const double* a = &alpha[static_cast<std::size_t>(k) * S];
    for (int t = 0; t < T; ++t) {
      const double af = a[trans[t].from];
      lp[t] = af == kNegInf || beta[trans[t].to] == kNegInf ? kNegInf : af + gamma(k, t) + beta[trans[t].to];
    }
    const double z = log_sum_exp(lp);
    if (z == kNegInf) throw NumericalError("no surviving path at step " + std::to_string(k + 1));
    double* p = &f.post[static_cast<std::size_t>(k) * T];
    for (int t = 0; t < T; ++t) p[t] = std::exp(lp[t] - z);
    for (int s = 0; s < S; ++s) {
      const auto& out = tr.outgoing(s);
      buf.resize(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const int t = out[i];
        buf[i] = beta[trans[t].to] == kNegInf ? kNegInf : gamma(k, t) + beta[trans[t].to];
      }
      prev[s] = log_sum_exp(buf);
    }
    const double zb = log_sum_exp(prev);
    for (int s = 0; s < S; ++s) beta[s] = prev[s] - zb;
  }
  return f;
}

/// Bit APPs and clamped LLRs from the transition posteriors. The label of a
/// transition depends on the parity of beta_{k-1}, the state x_k leaves.
inline void bit_app(PosteriorFrame& f, const Trellis& tr, const MapperSpec& spec) {
  const int B = spec.bits_per_symbol;
  const int T = f.transitions;
  if (T != tr.num_transitions()) throw ConfigError("posterior frame does not match the trellis");
  if (spec.order() != tr.cfg().mod_order) throw ConfigError("mapper order does not match the modulation");
  std::vector<int> label(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) label[t] = spec.label(tr.transition(t).x, tr.transition(t).origin_beta & 1);
  f.bits = B;
  f.app0.assign(static_cast<std::size_t>(f.steps) * B, 0.0);
  f.llr.assign(static_cast<std::size_t>(f.steps) * B, 0.0);
  for (int k = 0; k < f.steps; ++k) {
    const double* p = &f.post[static_cast<std::size_t>(k) * T];
    for (int i = 0; i < B; ++i) {
      double p0 = 0.0, p1 = 0.0;
      const int shift = B - 1 - i;
      for (int t = 0; t < T; ++t) ((label[t] >> shift) & 1 ? p1 : p0) += p[t];
      const double s = p0 + p1;
      p0 /= s;
      p1 /= s;
      f.app0[static_cast<std::size_t>(k) * B + i] = p0;
      double l;
      if (p1 <= 0.0)
        l = kLlrClamp;
      else if (p0 <= 0.0)
        l = -kLlrClamp;
      else
        l = std::log(p0) - std::log(p1);
      f.llr[static_cast<std::size_t>(k) * B + i] = clamp_llr(l);
    }
  }
}

}  // namespace cpm1bit
