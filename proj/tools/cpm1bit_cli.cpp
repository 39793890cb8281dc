// cpm1bit command line: sweeps, bandwidth estimates, table prebuild, selftest.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 no data
// (the sweep ran but produced no rows).

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "oracles.hpp"

using namespace cpm1bit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNoData = 4;

std::filesystem::path resolve_cache_dir() {
  auto d = cache_dir_from_env();
  if (!d.empty()) return d;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".cache" / "cpm1bit";
  return std::filesystem::temp_directory_path() / "cpm1bit_cache";
}

void log_line(const std::string& m) { std::cerr << m << '\n'; }

int cmd_sweep(const std::string& path, int threads, const std::string& csv_override) {
  auto c = load_config(path);
  if (!csv_override.empty()) {
    c.csv = csv_override;
    c.plot_recipe.clear();
  }
  c.validate();
  SweepOptions o;
  o.threads = threads;
  o.cache_dir = resolve_cache_dir();
  o.log = log_line;
  const auto r = run_sweep(c, o);
  write_text(c.csv, format_csv(r, c));
  const auto recipe = c.plot_recipe_path();
  write_text(recipe, plot_recipe(c, r, std::filesystem::path(c.csv).filename().string()).dump(2) + "\n");
  std::cerr << "wrote " << c.csv << " and " << recipe << '\n';
  bool failed = false;
  for (const auto& p : r.points) failed |= !p.error.empty();
  if (failed) return kExitNumerical;
  return r.points.empty() ? kExitNoData : 0;
}

int cmd_b90(const std::string& path, int symbols) {
  const auto c = load_config(path);
  c.validate();
  B90Options o;
  o.symbols = symbols > 0 ? symbols : c.b90_symbols;
  Rng rng(o.seed);
  const auto e = estimate_b90(c.cpm, rng, o);
  std::printf("b90_ts %.6f\nb90_db %.4f\nresolution %.6f\ncentroid %.6f\n", e.b90, 10.0 * std::log10(e.b90),
              e.resolution, e.centroid);
  if (e.flagged) std::fprintf(stderr, "warning: bin width is coarse relative to the estimate\n");
  if (c.b90) std::printf("config_override %.6f\n", *c.b90);
  return 0;
}

int cmd_table(const std::string& path, double snr, int threads) {
  const auto c = load_config(path);
  c.validate();
  const auto dir = resolve_cache_dir();
  const double b90 = resolve_b90(c, dir);
  const FrontendModel m(c.cpm, c.filter, sigma_from_snr(snr, c.cpm, b90));
  TableOptions t = c.table;
  t.threads = resolve_threads(threads >= 0 ? threads : c.threads);
  const auto tab = cached_channel_law_table(m, snr, t, dir);
  std::printf("cache %s\nkey %016llx\nrows %d\ncols %d\nnoise_variance %.6e\nunconverged %d\nmax_row_error %.3e\n",
              dir.string().c_str(), static_cast<unsigned long long>(tab.key), tab.rows, tab.cols, tab.noise_variance,
              tab.unconverged, tab.max_row_error);
  return 0;
}

/// Quick oracle checks: closed-form orthant, BCJR against enumeration, phase structure.
int cmd_selftest() {
  int bad = 0;
  auto report = [&](const char* name, double err, double tol) {
    const bool ok = err < tol;
    bad += !ok;
    std::printf("%s %-32s %.3e (tol %.0e)\n", ok ? "ok  " : "FAIL", name, err, tol);
  };

  Rng rng(1);
  Matrix S(2);
  S(0, 0) = S(1, 1) = 1.0;
  S(0, 1) = S(1, 0) = 0.5;
  const Matrix L = cholesky(S);
  report("orthant rho=0.5", std::abs(orthant_probability(OrthantQuery{{0, 0}, &L, {1, 1}}, rng).probability - 1.0 / 3.0),
         1e-4);

  const Trellis tr(CpmConfig{}, 2);
  const auto tab = oracle::random_table(tr.num_transitions(), 64, rng);
  std::vector<std::uint32_t> y(5);
  for (auto& v : y) v = static_cast<std::uint32_t>(rng() % 64);
  const auto f = bcjr(tr, tab, y);
  const auto ref = oracle::enumerate_detector(tr, tab, y, {}, tr.start_state(0));
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - f.post[i]));
  report("detector bcjr vs enumeration", worst, 1e-10);

  const auto spec = CodeSpec::make({5, 7}, "11|01|01|10|10|01|11");
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> kept(punctured_length(12, spec));
  for (auto& v : kept) v = g(rng);
  const auto ch = depuncture(kept, spec, 12);
  const auto r = code_bcjr(ch, spec);
  const auto cref = oracle::enumerate_code(ch, spec, 10);
  worst = 0;
  for (int k = 0; k < 10; ++k) worst = std::max(worst, std::abs(oracle::p0_from_llr(r.info_llr[k]) - cref.info_p0[k]));
  report("code bcjr vs enumeration", worst, 1e-10);

  const CpmConfig cfg;
  report("phase continuity", oracle::phase_continuity_error(cfg, 10000, rng), 1e-9);
  report("tilt identity", oracle::tilt_identity_error(cfg, 10000, rng), 1e-9);
  report("constant envelope", oracle::envelope_error(cfg, 10000, rng), 1e-12);

  const auto il = make_s_random(1000, default_s_parameter(1000), 5);
  report("s-random property", has_s_property(il.permutation, il.s_parameter) ? 0.0 : 1.0, 0.5);
  return bad ? kExitNumerical : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1-bit oversampled CPM receiver simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config;
  int threads = -1;
  std::string csv;
  auto* sweep = app.add_subcommand("sweep", "run a BER sweep and write CSV plus plot recipe");
  sweep->add_option("config", config, "experiment JSON")->required();
  sweep->add_option("--threads", threads, "worker threads (0: all cores; default from config)");
  sweep->add_option("--csv", csv, "output CSV path (overrides the config)");

  int b90_symbols = 0;
  auto* b90 = app.add_subcommand("b90", "estimate the 90% power bandwidth of the configured CPM");
  b90->add_option("config", config, "experiment JSON")->required();
  b90->add_option("--symbols", b90_symbols, "symbols to simulate (default from config)");

  double snr = 0.0;
  auto* table = app.add_subcommand("table", "build or load the channel-law table for one SNR");
  table->add_option("config", config, "experiment JSON")->required();
  table->add_option("--snr", snr, "SNR in dB")->required();
  table->add_option("--threads", threads, "worker threads");

  auto* selftest = app.add_subcommand("selftest", "run the oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sweep) return cmd_sweep(config, threads, csv);
    if (*b90) return cmd_b90(config, b90_symbols);
    if (*table) return cmd_table(config, snr, threads);
    if (*selftest) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
