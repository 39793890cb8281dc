#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"

using namespace cpm1bit;

namespace {

ChannelLawTable fast_table(double sigma2) {
  const FrontendModel m(CpmConfig{}, FilterSpec{}, sigma2);
  TableOptions o;
  o.tolerance = 1e-4;
  return cached_channel_law_table(m, 99.0, o, cache_dir_from_env());
}

std::vector<std::uint32_t> random_patterns(int n, Rng& rng) {
  std::vector<std::uint32_t> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<std::uint32_t>(rng() % 64);
  return y;
}

}  // namespace

TEST(Trellis, CaseStudyCounts) {
  const Trellis tr(CpmConfig{}, 2);
  EXPECT_EQ(tr.num_states(), 64);
  EXPECT_EQ(tr.num_transitions(), 512);
  EXPECT_EQ(enumerate_transitions(CpmConfig{}, 2).size(), 512u);
  for (int s = 0; s < 64; ++s) {
    EXPECT_EQ(tr.outgoing(s).size(), 8u);
    EXPECT_EQ(tr.incoming(s).size(), 8u);
    EXPECT_EQ(tr.index(tr.state(s)), s);
  }
}

TEST(Trellis, TransitionBookkeeping) {
  const CpmConfig cfg;
  const Trellis tr(cfg, 2);
  for (const auto& t : tr.transitions()) {
    const auto from = tr.state(t.from);
    const auto to = tr.state(t.to);
    ASSERT_EQ(t.window.size(), 2u);
    EXPECT_EQ(t.window_beta, from.beta);
    EXPECT_EQ(t.window[0], from.recent[0]);
    EXPECT_EQ(t.window[1], t.x);
    EXPECT_EQ(to.recent[0], t.x);
    EXPECT_EQ(to.beta, advance_beta(cfg, from.beta, from.recent[0]));
    EXPECT_EQ(t.origin_beta, to.beta);
    EXPECT_EQ(tr.find(t.from, t.to), static_cast<int>(&t - tr.transitions().data()));
  }
  EXPECT_EQ(tr.find(tr.index({0, {1}}), tr.index({0, {2}})), -1);
  EXPECT_EQ(tr.start_state(0), tr.index({0, {0}}));
}

TEST(Trellis, SingleSymbolMemory) {
  const Trellis tr(CpmConfig{}, 1);
  EXPECT_EQ(tr.num_states(), 8);
  EXPECT_EQ(tr.num_transitions(), 64);
}

TEST(DetectorBcjr, MatchesEnumerationOnRandomTable) {
  const Trellis tr(CpmConfig{}, 2);
  Rng rng(1);
  const auto tab = oracle::random_table(512, 64, rng);
  const auto y = random_patterns(5, rng);
  const auto f = bcjr(tr, tab, y);
  const auto ref = oracle::enumerate_detector(tr, tab, y, {}, tr.start_state(0));
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - f.post[i]));
  EXPECT_LT(worst, 1e-10);
}

TEST(DetectorBcjr, MatchesEnumerationWithPriors) {
  const Trellis tr(CpmConfig{}, 2);
  Rng rng(2);
  const auto tab = oracle::random_table(512, 64, rng);
  const auto y = random_patterns(4, rng);
  SymbolPriors pri(4, 8);
  std::exponential_distribution<double> e(1.0);
  for (int k = 0; k < 4; ++k)
    for (int par = 0; par < 2; ++par) {
      double s = 0;
      std::vector<double> w(8);
      for (auto& v : w) s += v = e(rng);
      for (int x = 0; x < 8; ++x) pri.at(k, par)[x] = std::log(w[x] / s);
    }
  const int start = tr.index({3, {5}});
  const auto f = bcjr(tr, tab, y, pri, start);
  const auto ref = oracle::enumerate_detector(tr, tab, y, pri, start);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - f.post[i]));
  EXPECT_LT(worst, 1e-10);
}

TEST(DetectorBcjr, MatchesEnumerationOnChannelLaw) {
  const Trellis tr(CpmConfig{}, 2);
  const auto tab = fast_table(0.05);
  const FrontendModel m(CpmConfig{}, FilterSpec{}, 0.05);
  const std::vector<int> x{3, 6, 1, 0, 7};
  Rng rng(3);
  const auto y = simulate_received_bits(transmit_block(x, m), m, rng);
  const auto f = bcjr(tr, tab, y);
  const auto ref = oracle::enumerate_detector(tr, tab, y, {}, tr.start_state(0));
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - f.post[i]));
  EXPECT_LT(worst, 1e-10);
}

TEST(DetectorBcjr, BitAppsAreConsistent) {
  const Trellis tr(CpmConfig{}, 2);
  Rng rng(4);
  const auto tab = oracle::random_table(512, 64, rng);
  const auto y = random_patterns(30, rng);
  auto f = bcjr(tr, tab, y);
  MapperSpec adv;
  adv.kind = MappingKind::advanced;
  bit_app(f, tr, adv);
  ASSERT_EQ(f.llr.size(), 90u);
  for (int k = 0; k < 30; ++k) {
    double s = 0;
    for (double p : f.at(k)) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (int i = 0; i < 3; ++i) {
      const double p0 = f.app0[k * 3 + i];
      EXPECT_GE(p0, 0.0);
      EXPECT_LE(p0, 1.0);
      EXPECT_NEAR(f.llr[k * 3 + i], std::clamp(std::log(p0 / (1 - p0)), -kLlrClamp, kLlrClamp), 1e-9);
    }
  }
}

TEST(DetectorBcjr, RejectsMismatches) {
  const Trellis tr(CpmConfig{}, 2);
  Rng rng(5);
  const auto small = oracle::random_table(64, 64, rng);
  const std::vector<std::uint32_t> y{1, 2};
  EXPECT_THROW(bcjr(tr, small, y), ConfigError);
  const auto tab = oracle::random_table(512, 64, rng);
  const std::vector<std::uint32_t> bad{64};
  EXPECT_THROW(bcjr(tr, tab, bad), ConfigError);
  EXPECT_THROW(bcjr(tr, tab, y, SymbolPriors(3, 8)), ConfigError);
}

TEST(ChannelLaw, RowsAreDistributions) {
  const auto tab = fast_table(0.05);
  ASSERT_EQ(tab.rows, 512);
  ASSERT_EQ(tab.cols, 64);
  for (int t = 0; t < tab.rows; ++t) {
    double s = 0;
    for (double p : tab.row(t)) {
      EXPECT_GE(p, kProbFloor);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(ChannelLaw, RotationSymmetryMatchesDirectRows) {
  const FrontendModel m(CpmConfig{}, FilterSpec{}, 0.05);
  TableOptions on, off;
  on.tolerance = off.tolerance = 1e-4;
  off.symmetry = false;
  const auto a = cached_channel_law_table(m, 98.0, on, cache_dir_from_env());
  const auto b = cached_channel_law_table(m, 98.0, off, cache_dir_from_env());
  double worst = 0;
  for (std::size_t i = 0; i < a.prob.size(); ++i) worst = std::max(worst, std::abs(a.prob[i] - b.prob[i]));
  EXPECT_LT(worst, 3e-4);
}

TEST(ChannelLaw, NoiselessRowsAreIndicators) {
  const FrontendModel m(CpmConfig{}, FilterSpec{}, 0.0);
  const Trellis tr(CpmConfig{}, 2);
  const auto tab = build_channel_law_table(m, 1e9);
  for (int t = 0; t < tab.rows; ++t) {
    const auto& tt = tr.transition(t);
    const auto mu = m.window_mean(tt.window_beta, tt.window);
    std::vector<cplx> z{{mu[0], mu[1]}, {mu[2], mu[3]}, {mu[4], mu[5]}};
    const auto y = pattern_of(z);
    EXPECT_DOUBLE_EQ(tab.row(t)[y], 1.0);
  }
}

TEST(ChannelLaw, RotatePatternIsQuarterTurn) {
  for (std::uint32_t p = 0; p < 64; ++p) {
    std::uint32_t q = p;
    for (int i = 0; i < 4; ++i) q = rotate_pattern(q, 3);
    EXPECT_EQ(q, p);
  }
  // (+,+) times j is (-,+): Re becomes negative.
  EXPECT_EQ(rotate_pattern(0b00, 1), 0b01u);
}

TEST(ChannelLaw, CacheRoundTripAndKeyCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "cpm1bit_cache_test";
  std::filesystem::remove_all(dir);
  const FrontendModel m(CpmConfig{}, FilterSpec{}, 0.0);
  const auto a = cached_channel_law_table(m, 1e9, TableOptions{}, dir);
  const auto b = cached_channel_law_table(m, 1e9, TableOptions{}, dir);
  EXPECT_EQ(a.prob, b.prob);
  std::filesystem::path file;
  for (const auto& e : std::filesystem::directory_iterator(dir)) file = e.path();
  EXPECT_FALSE(load_table(file, a.key ^ 1, a.rows, a.cols).has_value());
  EXPECT_FALSE(load_table(file, a.key, a.rows + 1, a.cols).has_value());
  EXPECT_TRUE(load_table(file, a.key, a.rows, a.cols).has_value());
  std::filesystem::remove_all(dir);
}

TEST(ChannelLaw, KeyDependsOnTheInputs) {
  const FrontendModel a(CpmConfig{}, FilterSpec{}, 0.1), b(CpmConfig{}, FilterSpec{}, 0.2);
  TableOptions o;
  EXPECT_NE(table_key(a, 10, o), table_key(b, 10, o));
  EXPECT_NE(table_key(a, 10, o), table_key(a, 11, o));
  TableOptions o2 = o;
  o2.tolerance = 1e-6;
  EXPECT_NE(table_key(a, 10, o), table_key(a, 10, o2));
  o2 = o;
  o2.threads = 4;
  EXPECT_EQ(table_key(a, 10, o), table_key(a, 10, o2));
}
