#pragma once

// One coded block end to end, and the detector <-> decoder exchange.
//
// Framing per block (n symbols, 3 bits per symbol, MSB first):
//  uncoded       3n info bits, n = ceil(block_info_bits / 3).
//  conventional  I = block_info_bits info bits, encoded with K-1 zero tail
//                bits and punctured (P survivors). P is padded with random
//                filler bits up to 3n = 3 ceil(P/3), the 3n bits are S-random
//                interleaved and read out three per symbol.
//  subchannel    bits 1 and 2 of every symbol are uncoded info bits (2n, not
//                interleaved); bit 3 carries a terminated code whose punctured
//                length is exactly n, through its own S-random interleaver.
//                n is the smallest such length with 2n + I_3 >= block_info_bits.
// Tail and filler bits are transmitted as ordinary bits and never scored.
//
// Exchange. Detector extrinsic = APP LLR - prior LLR; it is deinterleaved,
// depunctured and decoded, and the decoder extrinsic (coded APP - its input)
// is punctured, interleaved and turned into symbol priors for the next pass.
// Uncoded positions keep zero prior.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpm1bit/bcjr.hpp"
#include "cpm1bit/fec.hpp"
#include "cpm1bit/frontend.hpp"
#include "cpm1bit/mapping.hpp"

namespace cpm1bit {

enum class SchemeKind { uncoded, conventional, subchannel };

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "uncoded") return SchemeKind::uncoded;
  if (s == "conventional") return SchemeKind::conventional;
  if (s == "subchannel" || s == "proposed") return SchemeKind::subchannel;
  throw ConfigError("unknown scheme '" + s + "' (expected uncoded, conventional or subchannel)");
}

inline const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::uncoded: return "uncoded";
    case SchemeKind::conventional: return "conventional";
    case SchemeKind::subchannel: return "subchannel";
  }
  return "?";
}

struct SchemeSpec {
  SchemeKind kind = SchemeKind::uncoded;
  MapperSpec mapper;
  CodeSpec code = CodeSpec::make({5, 7});  // whole stream (conventional) or bit 3 (subchannel)
  int iterations = 1;
  int block_info_bits = 3000;
  int interleaver_s = -1;  // -1: floor(sqrt(length/2))

  void validate(const CpmConfig& cfg) const {
    mapper.validate();
    if (mapper.order() != cfg.mod_order) throw ConfigError("mapper bits do not match the modulation order");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (block_info_bits < 1) throw ConfigError("block_info_bits must be >= 1");
    if (kind != SchemeKind::uncoded) code.validate();
    if (kind == SchemeKind::subchannel && cfg.mod_order != 8)
      throw ConfigError("the subchannel scheme is defined for 8-ary CPM");
    if (kind == SchemeKind::uncoded && iterations != 1) throw ConfigError("uncoded transmission has one iteration");
  }

  /// Information bits per channel bit.
  double rate() const {
    if (kind == SchemeKind::uncoded) return 1.0;
    if (kind == SchemeKind::conventional) return code.rate();
    return (2.0 + code.rate()) / 3.0;
  }
};

struct Frame {
  int symbols = 0;
  int info_bits = 0;
  int coded_steps = 0;   // trellis steps of the coded stream, tail included
  int survivors = 0;     // coded bits after puncturing
  int fillers = 0;
  int coded_info = 0;    // info bits entering the encoder
};

inline Frame make_frame(const SchemeSpec& s) {
  const int B = s.mapper.bits_per_symbol;
  Frame f;
  if (s.kind == SchemeKind::uncoded) {
    f.symbols = (s.block_info_bits + B - 1) / B;
    f.info_bits = f.symbols * B;
    return f;
  }
  const int tail = s.code.constraint_length() - 1;
  if (s.kind == SchemeKind::conventional) {
    f.coded_info = s.block_info_bits;
    f.coded_steps = f.coded_info + tail;
    f.survivors = static_cast<int>(punctured_length(f.coded_steps, s.code));
    f.symbols = (f.survivors + B - 1) / B;
    f.fillers = f.symbols * B - f.survivors;
    f.info_bits = f.coded_info;
    return f;
  }
  // Subchannel: any step count fixes n = survivors; take the first that carries enough info.
  for (int steps = tail + 1;; ++steps) {
    const int n = static_cast<int>(punctured_length(steps, s.code));
    const int info3 = steps - tail;
    if ((B - 1) * n + info3 >= s.block_info_bits) {
      f.symbols = n;
      f.coded_steps = steps;
      f.survivors = n;
      f.coded_info = info3;
      f.info_bits = (B - 1) * n + info3;
      return f;
    }
  }
}

struct BlockTx {
  Frame frame;
  std::vector<int> info;           // scored bits, in stream order
  std::vector<int> channel_bits;   // 3n, symbol-major, MSB first
  std::vector<int> symbols;        // x_1..x_n
  std::vector<char> filler;        // 3n, set where the channel bit is a filler
  InterleaverSpec interleaver;     // empty for uncoded
};

/// Symbols from labels with a running phase state starting at beta = 0.
inline std::vector<int> map_stream(std::span<const int> bits, const MapperSpec& m, const CpmConfig& cfg) {
  const int B = m.bits_per_symbol;
  if (bits.size() % static_cast<std::size_t>(B) != 0) throw ConfigError("bit stream is not whole symbols");
  std::vector<int> x(bits.size() / B);
  int beta = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = map_bits(bits.subspan(k * B, B), beta & 1, m);
    beta = advance_beta(cfg, beta, x[k]);
  }
  return x;
}

inline int random_bit(Rng& rng) { return static_cast<int>(rng() >> 63); }

/// Encodes, interleaves and maps the given info bits. Fillers and the
/// interleaver seed come from rng.
inline BlockTx run_block_tx(std::span<const int> info, const SchemeSpec& s, const CpmConfig& cfg, Rng& rng) {
  BlockTx tx;
  tx.frame = make_frame(s);
  const Frame& f = tx.frame;
  if (static_cast<int>(info.size()) != f.info_bits) throw ConfigError("info length does not match the block framing");
  const int B = s.mapper.bits_per_symbol;
  const int n = f.symbols;
  tx.info.assign(info.begin(), info.end());
  tx.filler.assign(static_cast<std::size_t>(n) * B, 0);

  if (s.kind == SchemeKind::uncoded) {
    tx.channel_bits = tx.info;
  } else if (s.kind == SchemeKind::conventional) {
    auto c = puncture<int>(conv_encode(info, s.code), s.code);
    std::vector<char> fill(c.size(), 0);
    for (int i = 0; i < f.fillers; ++i) {
      c.push_back(random_bit(rng));
      fill.push_back(1);
    }
    const int len = n * B;
    tx.interleaver = make_s_random(len, s.interleaver_s < 0 ? default_s_parameter(len) : s.interleaver_s, rng());
    tx.channel_bits = interleave<int>(c, tx.interleaver);
    tx.filler = interleave<char>(fill, tx.interleaver);
  } else {
    const auto c = puncture<int>(conv_encode(info.subspan(static_cast<std::size_t>(B - 1) * n), s.code), s.code);
    tx.interleaver = make_s_random(n, s.interleaver_s < 0 ? default_s_parameter(n) : s.interleaver_s, rng());
    const auto v = interleave<int>(c, tx.interleaver);
    tx.channel_bits.resize(static_cast<std::size_t>(n) * B);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < B - 1; ++i) tx.channel_bits[static_cast<std::size_t>(k) * B + i] = info[static_cast<std::size_t>(i) * n + k];
      tx.channel_bits[static_cast<std::size_t>(k) * B + B - 1] = v[k];
    }
  }
  tx.symbols = map_stream(tx.channel_bits, s.mapper, cfg);
  return tx;
}

/// Counts for one detector/decoder pass. Sub-channel j counts info bits on
/// bit position j for the uncoded and subchannel schemes (bit 3 after
/// decoding for subchannel). For the conventional scheme the info bits are not
/// tied to positions, so sub-channel j holds the detector's raw decisions on
/// the non-filler channel bits at position j.
struct IterationStats {
  std::array<std::int64_t, 3> sub_bits{};
  std::array<std::int64_t, 3> sub_errors{};
  std::int64_t info_bits = 0;
  std::int64_t info_errors = 0;

  IterationStats& operator+=(const IterationStats& o) {
    for (int j = 0; j < 3; ++j) {
      sub_bits[j] += o.sub_bits[j];
      sub_errors[j] += o.sub_errors[j];
    }
    info_bits += o.info_bits;
    info_errors += o.info_errors;
    return *this;
  }
};

struct BlockRx {
  std::vector<int> decoded;              // final info decisions
  std::vector<IterationStats> per_iteration;
};

inline SymbolPriors priors_from_bit_llr(std::span<const double> llr, const MapperSpec& m) {
  const int B = m.bits_per_symbol;
  const int n = static_cast<int>(llr.size()) / B;
  SymbolPriors p(n, m.order());
  for (int k = 0; k < n; ++k) {
    const auto l = llr.subspan(static_cast<std::size_t>(k) * B, B);
    for (int parity = 0; parity < 2; ++parity) {
      const auto lp = log_priors_from_llr(l, parity, m);
      std::copy(lp.begin(), lp.end(), p.at(k, parity));
    }
  }
  return p;
}

inline int hard_bit(double llr) { return llr >= 0.0 ? 0 : 1; }

/// Iterative detection and decoding of one block. Scores against tx.
inline BlockRx run_block_rx(std::span<const std::uint32_t> y, const BlockTx& tx, const SchemeSpec& s,
                            const Trellis& tr, const ChannelLawTable& tab) {
  const Frame& f = tx.frame;
  const int B = s.mapper.bits_per_symbol;
  const int n = f.symbols;
  if (static_cast<int>(y.size()) != n) throw ConfigError("observation length does not match the block");
  const std::size_t nb = static_cast<std::size_t>(n) * B;

  std::vector<double> prior(nb, 0.0);
  BlockRx rx;
  rx.per_iteration.resize(static_cast<std::size_t>(s.iterations));
  for (int it = 0; it < s.iterations; ++it) {
    const SymbolPriors pri = it == 0 ? SymbolPriors{} : priors_from_bit_llr(prior, s.mapper);
    PosteriorFrame pf = bcjr(tr, tab, y, pri, tr.start_state(0));
    bit_app(pf, tr, s.mapper);
    std::vector<double> ext(nb);
    for (std::size_t i = 0; i < nb; ++i) ext[i] = clamp_llr(pf.llr[i] - prior[i]);

    IterationStats& st = rx.per_iteration[static_cast<std::size_t>(it)];
    std::vector<int> decoded(tx.info.size());
    if (s.kind == SchemeKind::uncoded) {
      for (std::size_t i = 0; i < nb; ++i) decoded[i] = hard_bit(pf.llr[i]);
    } else if (s.kind == SchemeKind::conventional) {
      const auto d = deinterleave<double>(ext, tx.interleaver);
      const auto ch = depuncture(std::span<const double>(d).first(static_cast<std::size_t>(f.survivors)), s.code,
                                 static_cast<std::size_t>(f.coded_steps));
      const auto dec = code_bcjr(ch, s.code);
      decoded = dec.hard;
      if (it + 1 < s.iterations) {
        auto e = puncture<double>(dec.extrinsic, s.code);
        e.resize(nb, 0.0);
        prior = interleave<double>(e, tx.interleaver);
      }
    } else {
      for (int i = 0; i < B - 1; ++i)
        for (int k = 0; k < n; ++k)
          decoded[static_cast<std::size_t>(i) * n + k] = hard_bit(pf.llr[static_cast<std::size_t>(k) * B + i]);
      std::vector<double> e3(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) e3[k] = ext[static_cast<std::size_t>(k) * B + B - 1];
      const auto ch = depuncture(deinterleave<double>(e3, tx.interleaver), s.code,
                                 static_cast<std::size_t>(f.coded_steps));
      const auto dec = code_bcjr(ch, s.code);
      std::copy(dec.hard.begin(), dec.hard.end(), decoded.begin() + static_cast<std::ptrdiff_t>(B - 1) * n);
      if (it + 1 < s.iterations) {
        const auto back = interleave<double>(puncture<double>(dec.extrinsic, s.code), tx.interleaver);
        for (int k = 0; k < n; ++k) prior[static_cast<std::size_t>(k) * B + B - 1] = back[k];
      }
    }

    for (std::size_t i = 0; i < decoded.size(); ++i) st.info_errors += decoded[i] != tx.info[i];
    st.info_bits = static_cast<std::int64_t>(decoded.size());
    const int J = std::min(B, 3);
    if (s.kind == SchemeKind::conventional) {
      for (std::size_t i = 0; i < nb; ++i) {
        const int j = static_cast<int>(i % B);
        if (tx.filler[i] || j >= J) continue;
        ++st.sub_bits[j];
        st.sub_errors[j] += hard_bit(pf.llr[i]) != tx.channel_bits[i];
      }
    } else if (s.kind == SchemeKind::uncoded) {
      for (std::size_t i = 0; i < nb; ++i) {
        const int j = static_cast<int>(i % B);
        if (j >= J) continue;
        ++st.sub_bits[j];
        st.sub_errors[j] += decoded[i] != tx.info[i];
      }
    } else {
      for (int j = 0; j < B; ++j) {
        const std::size_t lo = static_cast<std::size_t>(j) * n;
        const std::size_t hi = j + 1 < B ? lo + n : decoded.size();
        for (std::size_t i = lo; i < hi; ++i) {
          ++st.sub_bits[j];
          st.sub_errors[j] += decoded[i] != tx.info[i];
        }
      }
    }
    if (it + 1 == s.iterations) rx.decoded = std::move(decoded);
  }
  return rx;
}

/// Immutable per-SNR inputs shared by all blocks of a sweep point.
struct LinkContext {
  const SchemeSpec& scheme;
  const FrontendModel& model;
  const Trellis& trellis;
  const ChannelLawTable& table;
};

/// Draws info bits, transmits through the channel and decodes. Everything
/// random comes from rng in a fixed order: info, fillers, interleaver, noise.
inline BlockRx run_block(const LinkContext& ctx, Rng& rng) {
  const Frame f = make_frame(ctx.scheme);
  std::vector<int> info(static_cast<std::size_t>(f.info_bits));
  for (auto& b : info) b = random_bit(rng);
  const BlockTx tx = run_block_tx(info, ctx.scheme, ctx.model.cfg(), rng);
  const auto y = simulate_received_bits(transmit_block(tx.symbols, ctx.model), ctx.model, rng);
  return run_block_rx(y, tx, ctx.scheme, ctx.trellis, ctx.table);
}

}  // namespace cpm1bit
