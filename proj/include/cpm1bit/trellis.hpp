#pragma once

// Extended detector state s_k = [beta_{k-L+1}, x_{k-L+2}, ..., x_k] with total
// memory L = L_cpm + L_g + N, and the transitions between such states.

#include <string>
#include <vector>

#include "cpm1bit/cpm.hpp"

namespace cpm1bit {

struct TrellisState {
  int beta = 0;
  std::vector<int> recent;  // L-1 symbols, oldest first

  bool operator==(const TrellisState&) const = default;
};

struct Transition {
  int from = 0;
  int to = 0;
  int x = 0;                 // x_k, the symbol this transition emits
  int window_beta = 0;       // beta_{k-L}
  std::vector<int> window;   // x_{k-L+1..k}, oldest first
  int origin_beta = 0;       // beta_{k-1}: phase state the symbol x_k starts from
};

/// Fully enumerated trellis. Index of a state: beta * M_cpm^{L-1} + recent
/// symbols read as base-M_cpm digits, oldest most significant.
class Trellis {
public:
  Trellis(const CpmConfig& cfg, int memory) : cfg_(cfg), memory_(memory) {
    cfg.validate();
    if (memory < 1) throw ConfigError("trellis memory must be >= 1");
    const int Mc = cfg.mod_order;
    digits_ = ipow(Mc, memory - 1);
    if (static_cast<long long>(cfg.h_den) * digits_ > (1 << 22)) throw ConfigError("trellis too large");
    num_states_ = cfg.h_den * digits_;
    transitions_.reserve(static_cast<std::size_t>(num_states_) * Mc);
    out_.assign(num_states_, {});
    in_.assign(num_states_, {});
    for (int s = 0; s < num_states_; ++s) {
      const TrellisState st = state(s);
      for (int x = 0; x < Mc; ++x) {
        Transition t;
        t.from = s;
        t.x = x;
        t.window_beta = st.beta;
        t.window = st.recent;
        t.window.push_back(x);
        TrellisState next;
        if (memory == 1) {
          next.beta = advance_beta(cfg, st.beta, x);
        } else {
          next.beta = advance_beta(cfg, st.beta, st.recent.front());
          next.recent.assign(st.recent.begin() + 1, st.recent.end());
          next.recent.push_back(x);
        }
        t.to = index(next);
        int b = t.window_beta;
        for (std::size_t i = 0; i + 1 < t.window.size(); ++i) b = advance_beta(cfg, b, t.window[i]);
        t.origin_beta = b;
        const int id = static_cast<int>(transitions_.size());
        out_[s].push_back(id);
        in_[t.to].push_back(id);
        transitions_.push_back(std::move(t));
      }
    }
  }

  const CpmConfig& cfg() const { return cfg_; }
  int memory() const { return memory_; }
  int num_states() const { return num_states_; }
  int num_transitions() const { return static_cast<int>(transitions_.size()); }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& transition(int id) const { return transitions_[id]; }
  const std::vector<int>& outgoing(int s) const { return out_[s]; }
  const std::vector<int>& incoming(int s) const { return in_[s]; }

  int index(const TrellisState& st) const {
    if (st.beta < 0 || st.beta >= cfg_.h_den) throw ConfigError("state beta out of range");
    if (static_cast<int>(st.recent.size()) != memory_ - 1) throw ConfigError("state has wrong symbol memory");
    int idx = st.beta;
    for (int x : st.recent) {
      if (x < 0 || x >= cfg_.mod_order) throw ConfigError("state symbol out of range");
      idx = idx * cfg_.mod_order + x;
    }
    return idx;
  }

  TrellisState state(int idx) const {
    TrellisState st;
    st.recent.assign(static_cast<std::size_t>(memory_ - 1), 0);
    for (int i = memory_ - 2; i >= 0; --i) {
      st.recent[i] = idx % cfg_.mod_order;
      idx /= cfg_.mod_order;
    }
    st.beta = idx;
    return st;
  }

  /// Transition id for (from -> to), or -1 when the pair is inconsistent.
  int find(int from, int to) const {
    for (int id : out_[from])
      if (transitions_[id].to == to) return id;
    return -1;
  }

  /// State after the known preamble: beta = beta0, all remembered symbols 0.
  int start_state(int beta0 = 0) const {
    TrellisState st;
    st.beta = beta0;
    st.recent.assign(static_cast<std::size_t>(memory_ - 1), 0);
    return index(st);
  }

private:
  CpmConfig cfg_;
  int memory_;
  int digits_ = 1;
  int num_states_ = 0;
  std::vector<Transition> transitions_;
  std::vector<std::vector<int>> out_, in_;
};

/// All consistent (s_prev, s_next, x_k) for the given total memory.
inline std::vector<Transition> enumerate_transitions(const CpmConfig& cfg, int memory) {
  return Trellis(cfg, memory).transitions();
}

}  // namespace cpm1bit
