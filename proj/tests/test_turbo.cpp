#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace cpm1bit;

namespace {

const char* kRate79 = "11|01|01|10|10|01|11";

SchemeSpec scheme(SchemeKind kind, MappingKind map, const std::string& pattern = "", int iterations = 1,
                  int info = 3000) {
  SchemeSpec s;
  s.kind = kind;
  s.mapper.kind = map;
  s.iterations = iterations;
  s.block_info_bits = info;
  if (kind == SchemeKind::subchannel)
    s.code = CodeSpec::make({5, 7, 7});
  else
    s.code = CodeSpec::make({5, 7}, pattern);
  return s;
}

struct Link {
  FrontendModel model;
  Trellis trellis;
  ChannelLawTable table;
};

Link noiseless_link() {
  const FrontendModel m(CpmConfig{}, FilterSpec{}, 0.0);
  return {m, Trellis(m.cfg(), m.total_memory()), build_channel_law_table(m, 1e9)};
}

Link link_at(double snr_db) {
  ExperimentConfig c;
  const double b90 = resolve_b90(c, cache_dir_from_env());
  const FrontendModel m(c.cpm, c.filter, sigma_from_snr(snr_db, c.cpm, b90));
  return {m, Trellis(m.cfg(), m.total_memory()), cached_channel_law_table(m, snr_db, c.table, cache_dir_from_env())};
}

std::vector<IterationStats> run_blocks(const Link& l, const SchemeSpec& s, int blocks, std::uint64_t seed) {
  const LinkContext ctx{s, l.model, l.trellis, l.table};
  std::vector<IterationStats> tot(static_cast<std::size_t>(s.iterations));
  for (int b = 0; b < blocks; ++b) {
    Rng rng(block_seed(seed, 0, static_cast<std::uint64_t>(b)));
    const auto r = run_block(ctx, rng);
    for (int i = 0; i < s.iterations; ++i) tot[i] += r.per_iteration[i];
  }
  return tot;
}

double rate(std::int64_t e, std::int64_t n) { return static_cast<double>(e) / static_cast<double>(n); }

}  // namespace

TEST(Framing, Uncoded) {
  const auto f = make_frame(scheme(SchemeKind::uncoded, MappingKind::gray, "", 1, 3000));
  EXPECT_EQ(f.symbols, 1000);
  EXPECT_EQ(f.info_bits, 3000);
  EXPECT_EQ(make_frame(scheme(SchemeKind::uncoded, MappingKind::gray, "", 1, 10)).symbols, 4);
}

TEST(Framing, SubchannelNineSymbols) {
  // n = 9 symbols: 18 uncoded bits, bit-3 stream of 9 = 3 (1 + 2 tail) coded bits.
  const auto f = make_frame(scheme(SchemeKind::subchannel, MappingKind::advanced, "", 1, 19));
  EXPECT_EQ(f.symbols, 9);
  EXPECT_EQ(f.coded_info, 1);
  EXPECT_EQ(f.info_bits, 19);
  const auto big = make_frame(scheme(SchemeKind::subchannel, MappingKind::advanced, "", 1, 3000));
  EXPECT_EQ(big.symbols % 3, 0);
  EXPECT_EQ(big.info_bits, 2 * big.symbols + big.symbols / 3 - 2);
  EXPECT_GE(big.info_bits, 3000);
}

TEST(Framing, ConventionalSevenNinths) {
  const auto f = make_frame(scheme(SchemeKind::conventional, MappingKind::gray, kRate79, 1, 3000));
  EXPECT_EQ(f.coded_steps, 3002);
  EXPECT_EQ(f.survivors, static_cast<int>(punctured_length(3002, CodeSpec::make({5, 7}, kRate79))));
  EXPECT_EQ(3 * f.symbols, f.survivors + f.fillers);
  EXPECT_LT(f.fillers, 3);
}

TEST(Bookkeeping, ConventionalStreamsRoundTrip) {
  for (const char* pat : {"11", kRate79}) {
    const auto s = scheme(SchemeKind::conventional, MappingKind::advanced, pat, 1, 97);
    Rng rng(1);
    std::vector<int> info(97);
    for (auto& b : info) b = random_bit(rng);
    const auto tx = run_block_tx(info, s, CpmConfig{}, rng);
    const auto c = puncture<int>(conv_encode(info, s.code), s.code);
    const auto d = deinterleave<int>(tx.channel_bits, tx.interleaver);
    const auto fill = deinterleave<char>(tx.filler, tx.interleaver);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i < c.size()) {
        EXPECT_EQ(d[i], c[i]);
        EXPECT_EQ(fill[i], 0);
      } else {
        EXPECT_EQ(fill[i], 1);
      }
    }
    // Demapping with the running phase state recovers the channel bits.
    int beta = 0;
    for (std::size_t k = 0; k < tx.symbols.size(); ++k) {
      for (int i = 1; i <= 3; ++i) EXPECT_EQ(demap_bit(tx.symbols[k], i, beta & 1, s.mapper), tx.channel_bits[k * 3 + i - 1]);
      beta = advance_beta(CpmConfig{}, beta, tx.symbols[k]);
    }
  }
}

TEST(Bookkeeping, SubchannelStreamsRoundTrip) {
  const auto s = scheme(SchemeKind::subchannel, MappingKind::advanced, "", 1, 200);
  const auto f = make_frame(s);
  Rng rng(2);
  std::vector<int> info(static_cast<std::size_t>(f.info_bits));
  for (auto& b : info) b = random_bit(rng);
  const auto tx = run_block_tx(info, s, CpmConfig{}, rng);
  const int n = f.symbols;
  std::vector<int> third(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    EXPECT_EQ(tx.channel_bits[k * 3], info[k]);
    EXPECT_EQ(tx.channel_bits[k * 3 + 1], info[n + k]);
    third[k] = tx.channel_bits[k * 3 + 2];
  }
  const auto c = conv_encode(std::span<const int>(info).subspan(2 * n), s.code);
  EXPECT_EQ(deinterleave<int>(third, tx.interleaver), c);
  EXPECT_THROW(run_block_tx(std::vector<int>(5), s, CpmConfig{}, rng), ConfigError);
}

TEST(Pipeline, UncodedEqualsHardSlicing) {
  const auto link = noiseless_link();
  const auto s = scheme(SchemeKind::uncoded, MappingKind::gray, "", 1, 300);
  Rng rng(3);
  std::vector<int> info(300);
  for (auto& b : info) b = random_bit(rng);
  const auto tx = run_block_tx(info, s, link.model.cfg(), rng);
  const auto y = simulate_received_bits(transmit_block(tx.symbols, link.model), link.model, rng);
  const auto rx = run_block_rx(y, tx, s, link.trellis, link.table);
  auto f = bcjr(link.trellis, link.table, y);
  bit_app(f, link.trellis, s.mapper);
  for (std::size_t i = 0; i < info.size(); ++i) EXPECT_EQ(rx.decoded[i], f.llr[i] >= 0 ? 0 : 1);
}

TEST(Pipeline, NoiselessAdvancedSeparatesSubChannels) {
  const auto link = noiseless_link();
  const auto t = run_blocks(link, scheme(SchemeKind::uncoded, MappingKind::advanced, "", 1, 3000), 20, 4)[0];
  // Without noise only rare ambiguous paths touch bits 1-2; bit 3 keeps its floor.
  EXPECT_LT(rate(t.sub_errors[0], t.sub_bits[0]), 2e-3);
  EXPECT_LT(rate(t.sub_errors[1], t.sub_bits[1]), 2e-3);
  EXPECT_GT(rate(t.sub_errors[2], t.sub_bits[2]), 0.05);
}

TEST(Pipeline, OddShiftCalibration) {
  // The +1 ring shift is the one that keeps bits 1-2 clean; -1 does not.
  const auto link = noiseless_link();
  auto plus = scheme(SchemeKind::uncoded, MappingKind::advanced, "", 1, 3000);
  auto minus = plus;
  minus.mapper.odd_shift = -1;
  const auto a = run_blocks(link, plus, 10, 5)[0];
  const auto b = run_blocks(link, minus, 10, 5)[0];
  EXPECT_LT(rate(a.sub_errors[0] + a.sub_errors[1], a.sub_bits[0] + a.sub_bits[1]), 2e-3);
  EXPECT_GT(rate(b.sub_errors[0], b.sub_bits[0]), 0.02);
}

TEST(Pipeline, NoiselessCodedBlocksDecode) {
  const auto link = noiseless_link();
  for (const auto& s : {scheme(SchemeKind::conventional, MappingKind::gray, "11", 3, 600),
                        scheme(SchemeKind::conventional, MappingKind::advanced, "11", 2, 600)}) {
    const auto t = run_blocks(link, s, 5, 6);
    EXPECT_EQ(t.back().info_errors, 0) << mapping_name(s.mapper.kind);
    EXPECT_EQ(t.back().info_bits, 5 * 600);
  }
  const auto sub = run_blocks(link, scheme(SchemeKind::subchannel, MappingKind::advanced, "", 2, 600), 5, 6);
  EXPECT_LT(rate(sub.back().sub_errors[0] + sub.back().sub_errors[1], sub.back().sub_bits[0] + sub.back().sub_bits[1]),
            2e-3);
  EXPECT_EQ(sub.back().sub_errors[2], 0);
}

TEST(Pipeline, DeterministicPerSeed) {
  const auto link = noiseless_link();
  const auto s = scheme(SchemeKind::conventional, MappingKind::gray, kRate79, 2, 400);
  const LinkContext ctx{s, link.model, link.trellis, link.table};
  Rng a(77), b(77);
  const auto ra = run_block(ctx, a);
  const auto rb = run_block(ctx, b);
  EXPECT_EQ(ra.decoded, rb.decoded);
  EXPECT_EQ(ra.per_iteration.back().info_errors, rb.per_iteration.back().info_errors);
}

TEST(Pipeline, IterationsDoNotIncreaseErrorsOnAverage) {
  const auto link = link_at(15.6275);
  const auto t = run_blocks(link, scheme(SchemeKind::conventional, MappingKind::gray, "11", 3, 300), 100, 8);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i].info_errors, t[i - 1].info_errors) << "iteration " << i + 1;
  EXPECT_GT(t[0].info_errors, 0);
}

TEST(SchemeSpec, Validation) {
  auto s = scheme(SchemeKind::uncoded, MappingKind::gray);
  s.iterations = 2;
  EXPECT_THROW(s.validate(CpmConfig{}), ConfigError);
  CpmConfig quaternary;
  quaternary.mod_order = 4;
  auto sub = scheme(SchemeKind::subchannel, MappingKind::gray);
  sub.mapper.bits_per_symbol = 2;
  EXPECT_THROW(sub.validate(quaternary), ConfigError);
  EXPECT_THROW(parse_scheme("turbo"), ConfigError);
  EXPECT_NEAR(scheme(SchemeKind::subchannel, MappingKind::advanced).rate(), 7.0 / 9.0, 1e-12);
}
