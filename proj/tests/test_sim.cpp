#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"

using namespace cpm1bit;

namespace {

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.scheme.kind = SchemeKind::conventional;
  c.scheme.mapper.kind = MappingKind::gray;
  c.scheme.code = CodeSpec::make({5, 7}, "11|01|01|10|10|01|11");
  c.scheme.iterations = 2;
  c.scheme.block_info_bits = 300;
  c.snr_db = {1e3};  // effectively noiseless; table is instant
  c.mc.min_blocks = 10;
  c.mc.max_blocks = 10;
  c.mc.wave_blocks = 4;
  c.b90 = 0.9;
  return c;
}

}  // namespace

TEST(B90, MskMatchesTextbook) {
  CpmConfig msk;
  msk.mod_order = 2;
  msk.h_num = 1;
  msk.h_den = 2;
  Rng rng(1);
  const auto e = estimate_b90(msk, rng);
  EXPECT_NEAR(e.b90, 0.78, 0.05 * 0.78);
  EXPECT_FALSE(e.flagged);
}

TEST(B90, StableUnderMoreSymbols) {
  Rng a(2), b(3);
  B90Options o1, o2;
  o2.symbols = 2 * o1.symbols;
  const double x = estimate_b90(CpmConfig{}, a, o1).b90;
  const double y = estimate_b90(CpmConfig{}, b, o2).b90;
  EXPECT_LT(std::abs(x - y) / x, 0.01);
}

TEST(B90, UntiltedSpectrumIsCentred) {
  // Symmetric alphabet: the spectrum is even about zero frequency.
  Rng rng(4);
  const auto e = estimate_b90(CpmConfig{}, rng);
  EXPECT_NEAR(e.centroid, 0.0, 0.01);
}

TEST(NoiseMapping, ScalesWithSnr) {
  const CpmConfig cfg;
  const double a = sigma_from_snr(10.0, cfg, 0.9);
  EXPECT_NEAR(sigma_from_snr(20.0, cfg, 0.9), a / 10, 1e-15);
  EXPECT_NEAR(a, cfg.symbol_energy / (0.9 * 10.0) * cfg.samples_per_symbol() / cfg.symbol_duration, 1e-15);
  EXPECT_LT(sigma_from_snr(300.0, cfg, 0.9), 1e-25);
  EXPECT_THROW(sigma_from_snr(10.0, cfg, 0.0), ConfigError);
}

TEST(Wilson, ContainsTheEstimateAndCovers) {
  const auto i = wilson_interval(30, 1000);
  EXPECT_LT(i.low, 0.03);
  EXPECT_GT(i.high, 0.03);
  EXPECT_EQ(wilson_interval(0, 100).low, 0.0);
  EXPECT_GT(wilson_interval(0, 100).high, 0.0);
  EXPECT_THROW(wilson_interval(5, 3), ConfigError);

  // Coverage near 95% for p = 0.05, n = 400.
  Rng rng(5);
  std::binomial_distribution<int> bin(400, 0.05);
  int hits = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const auto w = wilson_interval(bin(rng), 400);
    hits += w.low <= 0.05 && 0.05 <= w.high;
  }
  EXPECT_NEAR(hits / double(trials), 0.95, 0.015);
  EXPECT_TRUE(disjoint({0.1, 0.2}, {0.25, 0.3}));
  EXPECT_FALSE(disjoint({0.1, 0.2}, {0.15, 0.3}));
}

TEST(Config, SamplesParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(CPM1BIT_SAMPLES_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto c = load_config(e.path());
    EXPECT_NO_THROW(c.validate()) << e.path();
    ++n;
  }
  EXPECT_GT(n, 0);
}

TEST(Config, RoundTripKeepsTheHash) {
  auto c = small_sweep();
  c.scheme.mapper.kind = MappingKind::advanced;
  const auto back = parse_config(to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(back.scheme.code.puncture_string(), c.scheme.code.puncture_string());
  auto t = c;
  t.threads = 8;
  t.csv = "elsewhere.csv";
  EXPECT_EQ(config_hash(t), config_hash(c));
  t.seed = 2;
  EXPECT_NE(config_hash(t), config_hash(c));
}

TEST(Config, RejectsBadInput) {
  using nlohmann::json;
  const json ok = to_json(small_sweep());
  EXPECT_NO_THROW(parse_config(ok));
  auto j = ok;
  j["bogus"] = 1;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ok;
  j["scheme"]["colour"] = "red";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ok;
  j["schema_version"] = 99;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ok;
  j["snr_db"] = "high";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ok;
  j["scheme"]["kind"] = "uncoded";
  j["scheme"]["iterations"] = 3;
  EXPECT_THROW(parse_config(j).validate(), ConfigError);
  j = ok;
  j["cpm"]["oversampling"] = 0;
  EXPECT_THROW(parse_config(j).validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Sweep, ZeroMaxBlocksProducesNoRows) {
  auto c = small_sweep();
  c.mc.max_blocks = 0;
  const auto r = run_sweep(c);
  EXPECT_TRUE(r.points.empty());
  EXPECT_EQ(format_csv(r, c), std::string(kCsvHeader) + "\n");
}

TEST(Sweep, CsvIsIdenticalAcrossWorkerCounts) {
  const auto c = small_sweep();
  SweepOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = format_csv(run_sweep(c, one), c);
  const auto b = format_csv(run_sweep(c, four), c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), kCsvHeader);
  // header + one row per iteration
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
}

TEST(Sweep, StoppingRule) {
  auto c = small_sweep();
  c.scheme.kind = SchemeKind::uncoded;
  c.scheme.mapper.kind = MappingKind::advanced;
  c.scheme.code = CodeSpec::make({5, 7});
  c.scheme.iterations = 1;
  c.mc.min_blocks = 1;
  c.mc.max_blocks = 400;
  c.mc.target_bit_errors = 10;
  // Stops at the first wave where every sub-channel has the target.
  const auto r = run_sweep(c);
  ASSERT_EQ(r.points.size(), 1u);
  const auto& p = r.points[0];
  EXPECT_LT(p.blocks, 400);
  EXPECT_EQ(p.blocks % c.mc.wave_blocks, 0);
  for (int j = 0; j < 3; ++j) EXPECT_GE(p.iterations[0].sub_errors[j], 10);

  c.mc.max_info_bits = 600;
  EXPECT_EQ(run_sweep(c).points[0].blocks, c.mc.wave_blocks);
  c.mc.target_bit_errors = 1000000;
  c.mc.max_info_bits = 1000000000;
  c.mc.max_blocks = 10;
  EXPECT_EQ(run_sweep(c).points[0].blocks, 10);
}

TEST(Sweep, PlotRecipeNamesTheColumns) {
  const auto c = small_sweep();
  SimResult r;
  r.b90 = 0.9;
  const auto j = plot_recipe(c, r, "x.csv");
  EXPECT_EQ(j["csv"], "x.csv");
  EXPECT_EQ(j["y"], "ber_total");
  EXPECT_EQ(c.plot_recipe_path(), "results.csv.plot.json");
}
