#pragma once

// Experiment plumbing: 90% power bandwidth, SNR to noise variance, Wilson
// intervals, JSON experiment files, the Monte Carlo sweep and its CSV output.

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cpm1bit/channel_law.hpp"
#include "cpm1bit/turbo.hpp"

namespace cpm1bit {

inline constexpr const char* kVersion = "1.0.0";

/// Environment variable naming the table/B90 cache directory.
inline constexpr const char* kCacheEnv = "CPM1BIT_CACHE_DIR";

inline std::filesystem::path cache_dir_from_env() {
  const char* v = std::getenv(kCacheEnv);
  return v && *v ? std::filesystem::path(v) : std::filesystem::path();
}

struct B90Options {
  int symbols = 1 << 16;
  int segment_symbols = 256;  // periodogram length; resolution 1/(segment_symbols T_s)
  double fraction = 0.9;
  std::uint64_t seed = 0x3c6ef372fe94f82bULL;  // used by resolve_b90
};

struct B90Estimate {
  double b90 = 0.0;         // B_90 * T_s
  double resolution = 0.0;  // bin width * T_s
  double centroid = 0.0;    // PSD centroid * T_s
  bool flagged = false;     // resolution coarser than 1% of the estimate
};

/// Welch estimate (Hann window, 50% overlap) of the untilted baseband PSD for
/// i.i.d. uniform symbols, then the narrowest contiguous band holding the
/// requested power fraction. The band width counts whole bins.
inline B90Estimate estimate_b90(const CpmConfig& cfg, Rng& rng, const B90Options& opt = {}) {
  cfg.validate();
  if (opt.segment_symbols < 8 || opt.symbols < 2 * opt.segment_symbols)
    throw ConfigError("b90 needs at least two segments of >= 8 symbols");
  if (!(opt.fraction > 0.0 && opt.fraction < 1.0)) throw ConfigError("power fraction must be in (0, 1)");
  const int sps = cfg.samples_per_symbol();
  std::uniform_int_distribution<int> pick(0, cfg.mod_order - 1);
  std::vector<int> x(static_cast<std::size_t>(opt.symbols));
  for (auto& v : x) v = pick(rng);
  const auto phase = untilted_phase_block(cfg, x);

  const int seg = opt.segment_symbols * sps;
  const int hop = seg / 2;
  std::vector<double> w(static_cast<std::size_t>(seg));
  for (int i = 0; i < seg; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / seg);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> buf(fftw_alloc_complex(static_cast<std::size_t>(seg)), &fftw_free);
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, decltype(&fftw_destroy_plan)> plan(
      fftw_plan_dft_1d(seg, buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE), &fftw_destroy_plan);
  std::vector<double> psd(static_cast<std::size_t>(seg), 0.0);
  const double a = cfg.amplitude();
  for (std::size_t start = 0; start + seg <= phase.size(); start += hop) {
    for (int i = 0; i < seg; ++i) {
      buf.get()[i][0] = a * w[i] * std::cos(phase[start + i]);
      buf.get()[i][1] = a * w[i] * std::sin(phase[start + i]);
    }
    fftw_execute(plan.get());
    for (int k = 0; k < seg; ++k) psd[k] += buf.get()[k][0] * buf.get()[k][0] + buf.get()[k][1] * buf.get()[k][1];
  }

  // Frequency order: bin j holds f = (j - seg/2) df.
  const double df = sps / (seg * cfg.symbol_duration);
  std::vector<double> p(static_cast<std::size_t>(seg));
  double total = 0.0, first = 0.0;
  for (int j = 0; j < seg; ++j) {
    p[j] = psd[static_cast<std::size_t>((j + seg / 2) % seg)];
    total += p[j];
    first += p[j] * (j - seg / 2) * df;
  }
  if (!(total > 0.0)) throw NumericalError("empty power spectrum");
  const double need = opt.fraction * total;
  int best = seg;
  double acc = 0.0;
  for (int lo = 0, hi = 0; hi < seg; ++hi) {
    acc += p[hi];
    while (acc - p[lo] >= need) acc -= p[lo++];
    if (acc >= need) best = std::min(best, hi - lo + 1);
  }
  B90Estimate e;
  e.resolution = df * cfg.symbol_duration;
  e.b90 = best * e.resolution;
  e.centroid = first / total * cfg.symbol_duration;
  e.flagged = e.resolution > 0.01 * e.b90;
  return e;
}

/// N0 for SNR = E_s / (T_s B_90 N0), b90_ts = B_90 T_s.
inline double noise_density(double snr_db, const CpmConfig& cfg, double b90_ts) {
  if (!(b90_ts > 0)) throw ConfigError("B90 must be positive");
  return cfg.symbol_energy / (b90_ts * std::pow(10.0, snr_db / 10.0));
}

/// Complex noise variance per high-rate sample: white noise of density N0
/// observed at M*D samples per T_s has variance N0 * M * D / T_s per sample.
inline double sigma_from_snr(double snr_db, const CpmConfig& cfg, double b90_ts) {
  return noise_density(snr_db, cfg, b90_ts) * cfg.samples_per_symbol() / cfg.symbol_duration;
}

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 gives 95%).
inline Interval wilson_interval(std::int64_t errors, std::int64_t trials, double z = 1.959963984540054) {
  if (trials <= 0) return {};
  if (errors < 0 || errors > trials) throw ConfigError("errors outside [0, trials]");
  const double n = static_cast<double>(trials);
  const double p = errors / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double c = (p + z2 / (2 * n)) / den;
  const double h = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / den;
  return {errors == 0 ? 0.0 : std::max(0.0, c - h), errors == trials ? 1.0 : std::min(1.0, c + h)};
}

inline bool disjoint(const Interval& a, const Interval& b) { return a.high < b.low || b.high < a.low; }

// ---------------------------------------------------------------------------
// Experiment files

struct MonteCarloSpec {
  std::int64_t min_blocks = 1;
  std::int64_t max_blocks = 1000;  // 0 runs nothing
  std::int64_t target_bit_errors = 200;
  std::int64_t max_info_bits = 2000000;
  int wave_blocks = 16;  // blocks decided per stopping check; fixed so results ignore the worker count
};

struct ExperimentConfig {
  CpmConfig cpm;
  FilterSpec filter;
  SchemeSpec scheme;
  std::vector<double> snr_db;
  MonteCarloSpec mc;
  std::uint64_t seed = 1;
  int threads = 1;  // 0: hardware concurrency
  TableOptions table;
  std::optional<double> b90;  // B_90 T_s override
  int b90_symbols = 1 << 16;
  std::string csv = "results.csv";
  std::string plot_recipe;  // empty: csv path + ".plot.json"

  void validate() const {
    cpm.validate();
    filter.validate();
    scheme.validate(cpm);
    (void)FrontendModel(cpm, filter, 0.0);  // decimation and memory limits
    if (snr_db.empty()) throw ConfigError("snr_db must list at least one point");
    for (double s : snr_db)
      if (!std::isfinite(s)) throw ConfigError("snr_db entries must be finite");
    if (mc.min_blocks < 0 || mc.max_blocks < 0) throw ConfigError("block counts must be >= 0");
    if (mc.target_bit_errors <= 0 || mc.max_info_bits <= 0 || mc.wave_blocks <= 0)
      throw ConfigError("stopping controls must be positive");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (!(table.tolerance > 0) || table.max_points < 1 || table.randomizations < 2)
      throw ConfigError("table tolerances out of range");
    if (b90 && !(*b90 > 0)) throw ConfigError("b90 override must be positive");
    if (b90_symbols < 512) throw ConfigError("b90_symbols must be >= 512");
    if (csv.empty()) throw ConfigError("output csv path is empty");
  }

  std::string plot_recipe_path() const { return plot_recipe.empty() ? csv + ".plot.json" : plot_recipe; }
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, const char* where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline constexpr int kSchemaVersion = 1;

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::read;
  ExperimentConfig c;
  try {
    detail::allow_keys(j, "config",
                       {"schema_version", "cpm", "filter", "scheme", "snr_db", "monte_carlo", "seed", "threads",
                        "table", "noise", "output"});
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
      throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion));
    if (j.contains("cpm")) {
      const auto& k = j.at("cpm");
      detail::allow_keys(k, "cpm",
                         {"mod_order", "h_num", "h_den", "pulse", "pulse_memory", "oversampling", "highres",
                          "phase_offset", "symbol_energy", "symbol_duration"});
      read(k, "mod_order", c.cpm.mod_order);
      read(k, "h_num", c.cpm.h_num);
      read(k, "h_den", c.cpm.h_den);
      if (k.contains("pulse")) c.cpm.pulse = parse_pulse(k.at("pulse").get<std::string>());
      read(k, "pulse_memory", c.cpm.pulse_memory);
      read(k, "oversampling", c.cpm.oversampling);
      read(k, "highres", c.cpm.highres);
      if (k.contains("phase_offset") && !k.at("phase_offset").is_null())
        c.cpm.phase_offset = k.at("phase_offset").get<double>();
      read(k, "symbol_energy", c.cpm.symbol_energy);
      read(k, "symbol_duration", c.cpm.symbol_duration);
    }
    if (j.contains("filter")) {
      const auto& k = j.at("filter");
      detail::allow_keys(k, "filter", {"duration", "decimation_offset"});
      read(k, "duration", c.filter.duration);
      read(k, "decimation_offset", c.filter.decimation_offset);
    }
    if (!j.contains("scheme")) throw ConfigError("missing scheme");
    {
      const auto& k = j.at("scheme");
      detail::allow_keys(k, "scheme",
                         {"kind", "mapping", "odd_shift", "code", "iterations", "block_info_bits", "interleaver_s"});
      if (k.contains("kind")) c.scheme.kind = parse_scheme(k.at("kind").get<std::string>());
      if (k.contains("mapping")) c.scheme.mapper.kind = parse_mapping(k.at("mapping").get<std::string>());
      read(k, "odd_shift", c.scheme.mapper.odd_shift);
      c.scheme.mapper.bits_per_symbol = c.cpm.bits_per_symbol();
      if (c.scheme.kind == SchemeKind::subchannel) c.scheme.code = CodeSpec::make({5, 7, 7});
      if (k.contains("code")) {
        const auto& cc = k.at("code");
        detail::allow_keys(cc, "scheme.code", {"generators", "puncture"});
        c.scheme.code = CodeSpec::make(cc.at("generators").get<std::vector<int>>(),
                                       cc.contains("puncture") ? cc.at("puncture").get<std::string>() : "");
      }
      read(k, "iterations", c.scheme.iterations);
      read(k, "block_info_bits", c.scheme.block_info_bits);
      read(k, "interleaver_s", c.scheme.interleaver_s);
    }
    if (!j.contains("snr_db")) throw ConfigError("missing snr_db");
    c.snr_db = j.at("snr_db").get<std::vector<double>>();
    if (j.contains("monte_carlo")) {
      const auto& k = j.at("monte_carlo");
      detail::allow_keys(k, "monte_carlo",
                         {"min_blocks", "max_blocks", "target_bit_errors", "max_info_bits", "wave_blocks"});
      read(k, "min_blocks", c.mc.min_blocks);
      read(k, "max_blocks", c.mc.max_blocks);
      read(k, "target_bit_errors", c.mc.target_bit_errors);
      read(k, "max_info_bits", c.mc.max_info_bits);
      read(k, "wave_blocks", c.mc.wave_blocks);
    }
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    if (j.contains("table")) {
      const auto& k = j.at("table");
      detail::allow_keys(k, "table", {"tolerance", "max_points", "randomizations", "symmetry", "reorder", "seed"});
      read(k, "tolerance", c.table.tolerance);
      read(k, "max_points", c.table.max_points);
      read(k, "randomizations", c.table.randomizations);
      read(k, "symmetry", c.table.symmetry);
      read(k, "reorder", c.table.reorder);
      read(k, "seed", c.table.seed);
    }
    if (j.contains("noise")) {
      const auto& k = j.at("noise");
      detail::allow_keys(k, "noise", {"b90", "b90_symbols"});
      if (k.contains("b90") && !k.at("b90").is_null()) c.b90 = k.at("b90").get<double>();
      read(k, "b90_symbols", c.b90_symbols);
    }
    if (j.contains("output")) {
      const auto& k = j.at("output");
      detail::allow_keys(k, "output", {"csv", "plot_recipe"});
      read(k, "csv", c.csv);
      read(k, "plot_recipe", c.plot_recipe);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["cpm"] = {{"mod_order", c.cpm.mod_order},       {"h_num", c.cpm.h_num},
              {"h_den", c.cpm.h_den},               {"pulse", "1REC"},
              {"pulse_memory", c.cpm.pulse_memory}, {"oversampling", c.cpm.oversampling},
              {"highres", c.cpm.highres},           {"phase_offset", c.cpm.phi0()},
              {"symbol_energy", c.cpm.symbol_energy}, {"symbol_duration", c.cpm.symbol_duration}};
  j["filter"] = {{"duration", c.filter.duration}, {"decimation_offset", c.filter.decimation_offset}};
  j["scheme"] = {{"kind", scheme_name(c.scheme.kind)},
                 {"mapping", mapping_name(c.scheme.mapper.kind)},
                 {"odd_shift", c.scheme.mapper.odd_shift},
                 {"code", {{"generators", c.scheme.code.generators}, {"puncture", c.scheme.code.puncture_string()}}},
                 {"iterations", c.scheme.iterations},
                 {"block_info_bits", c.scheme.block_info_bits},
                 {"interleaver_s", c.scheme.interleaver_s}};
  j["snr_db"] = c.snr_db;
  j["monte_carlo"] = {{"min_blocks", c.mc.min_blocks},
                      {"max_blocks", c.mc.max_blocks},
                      {"target_bit_errors", c.mc.target_bit_errors},
                      {"max_info_bits", c.mc.max_info_bits},
                      {"wave_blocks", c.mc.wave_blocks}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["table"] = {{"tolerance", c.table.tolerance}, {"max_points", c.table.max_points},
                {"randomizations", c.table.randomizations}, {"symmetry", c.table.symmetry},
                {"reorder", c.table.reorder}, {"seed", c.table.seed}};
  j["noise"] = {{"b90", c.b90 ? nlohmann::json(*c.b90) : nlohmann::json(nullptr)}, {"b90_symbols", c.b90_symbols}};
  j["output"] = {{"csv", c.csv}, {"plot_recipe", c.plot_recipe}};
  return j;
}

/// Fingerprint of everything that affects the numbers (threads and output
/// paths excluded).
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("threads");
  j.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) h = mix64(h ^ ch);
  return h;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepPoint {
  double snr_db = 0.0;
  double noise_variance = 0.0;
  std::int64_t blocks = 0;
  std::vector<IterationStats> iterations;
  int table_unconverged = 0;
  double wall_seconds = 0.0;
  std::string error;  // non-empty: the point was aborted
};

struct SimResult {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  double b90 = 0.0;
  std::vector<SweepPoint> points;
};

struct SweepOptions {
  int threads = -1;  // -1: take the config value
  std::filesystem::path cache_dir;
  std::function<void(const std::string&)> log;
};

/// B_90 T_s from the override, the cache, or a fresh estimate (then cached).
inline double resolve_b90(const ExperimentConfig& c, const std::filesystem::path& cache_dir) {
  if (c.b90) return *c.b90;
  B90Options o;
  o.symbols = c.b90_symbols;
  const std::uint64_t key = mix64(c.cpm.hash() ^ mix64(static_cast<std::uint64_t>(o.symbols)) ^ o.seed);
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    char name[64];
    std::snprintf(name, sizeof name, "b90_%016llx.txt", static_cast<unsigned long long>(key));
    file = cache_dir / name;
    std::ifstream in(file);
    double v = 0.0;
    if (in >> v && v > 0) return v;
  }
  Rng rng(o.seed);
  const auto e = estimate_b90(c.cpm, rng, o);
  if (!file.empty()) {
    std::filesystem::create_directories(cache_dir);
    std::ofstream out(file);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g\n", e.b90);
    out << buf;
  }
  return e.b90;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// True once the last pass has enough errors on every scored stream.
inline bool reached_target(const IterationStats& s, SchemeKind kind, std::int64_t target) {
  if (kind == SchemeKind::conventional) return s.info_errors >= target;
  for (int j = 0; j < 3; ++j)
    if (s.sub_bits[j] > 0 && s.sub_errors[j] < target) return false;
  return true;
}

inline SimResult run_sweep(const ExperimentConfig& c, const SweepOptions& o = {}) {
  c.validate();
  const int threads = resolve_threads(o.threads >= 0 ? o.threads : c.threads);
  auto log = [&](const std::string& m) {
    if (o.log) o.log(m);
  };
  SimResult res;
  res.config_hash = config_hash(c);
  res.seed = c.seed;
  res.b90 = resolve_b90(c, o.cache_dir);
  const Trellis tr(c.cpm, FrontendModel(c.cpm, c.filter, 0.0).total_memory());
  TableOptions topt = c.table;
  topt.threads = threads;

  for (std::size_t si = 0; si < c.snr_db.size(); ++si) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepPoint pt;
    pt.snr_db = c.snr_db[si];
    pt.noise_variance = sigma_from_snr(pt.snr_db, c.cpm, res.b90);
    pt.iterations.assign(static_cast<std::size_t>(c.scheme.iterations), {});
    if (c.mc.max_blocks == 0) continue;
    try {
      const FrontendModel model(c.cpm, c.filter, pt.noise_variance);
      const auto table = cached_channel_law_table(model, pt.snr_db, topt, o.cache_dir);
      pt.table_unconverged = table.unconverged;
      const LinkContext ctx{c.scheme, model, tr, table};
      while (pt.blocks < c.mc.max_blocks) {
        const int w = static_cast<int>(std::min<std::int64_t>(c.mc.wave_blocks, c.mc.max_blocks - pt.blocks));
        std::vector<BlockRx> out(static_cast<std::size_t>(w));
        std::vector<std::exception_ptr> err(static_cast<std::size_t>(w));
        std::atomic<int> next{0};
        auto worker = [&]() {
          for (int b; (b = next.fetch_add(1)) < w;) {
            try {
              Rng rng(block_seed(c.seed, si, static_cast<std::uint64_t>(pt.blocks + b)));
              out[b] = run_block(ctx, rng);
            } catch (...) {
              err[b] = std::current_exception();
            }
          }
        };
        const int nt = std::min(threads, w);
        if (nt <= 1) {
          worker();
        } else {
          std::vector<std::thread> pool;
          for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
          for (auto& t : pool) t.join();
        }
        for (int b = 0; b < w; ++b) {
          if (err[b]) std::rethrow_exception(err[b]);
          for (std::size_t it = 0; it < pt.iterations.size(); ++it) pt.iterations[it] += out[b].per_iteration[it];
        }
        pt.blocks += w;
        const auto& last = pt.iterations.back();
        if (pt.blocks >= c.mc.min_blocks &&
            (last.info_bits >= c.mc.max_info_bits || reached_target(last, c.scheme.kind, c.mc.target_bit_errors)))
          break;
      }
    } catch (const Error& e) {
      pt.error = e.what();
      log("snr " + std::to_string(pt.snr_db) + " dB aborted: " + pt.error);
    }
    pt.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (pt.error.empty()) {
      const auto& last = pt.iterations.back();
      char buf[200];
      std::snprintf(buf, sizeof buf, "snr %.2f dB: %lld blocks, BER %.3e (%lld/%lld), %.1f s", pt.snr_db,
                    static_cast<long long>(pt.blocks), last.info_bits ? double(last.info_errors) / last.info_bits : 0.0,
                    static_cast<long long>(last.info_errors), static_cast<long long>(last.info_bits), pt.wall_seconds);
      log(buf);
    }
    res.points.push_back(std::move(pt));
  }
  return res;
}

inline constexpr const char* kCsvHeader =
    "snr_db,scheme,mapping,iteration,ber_total,ber_bit1,ber_bit2,ber_bit3,bits,errors,blocks,ci_low,ci_high";

/// One row per (SNR point, iteration). An aborted point leaves a single row
/// with iteration 0 and nan rates.
inline std::string format_csv(const SimResult& r, const ExperimentConfig& c) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  const char* scheme = scheme_name(c.scheme.kind);
  const char* mapping = mapping_name(c.scheme.mapper.kind);
  char buf[512];
  auto rate = [](std::int64_t e, std::int64_t n) { return n > 0 ? static_cast<double>(e) / n : std::nan(""); };
  for (const auto& p : r.points) {
    if (!p.error.empty()) {
      std::snprintf(buf, sizeof buf, "%.6g,%s,%s,0,nan,nan,nan,nan,0,0,%lld,nan,nan\n", p.snr_db, scheme, mapping,
                    static_cast<long long>(p.blocks));
      os << buf;
      continue;
    }
    for (std::size_t it = 0; it < p.iterations.size(); ++it) {
      const auto& s = p.iterations[it];
      const auto ci = wilson_interval(s.info_errors, s.info_bits);
      std::snprintf(buf, sizeof buf, "%.6g,%s,%s,%zu,%.6e,%.6e,%.6e,%.6e,%lld,%lld,%lld,%.6e,%.6e\n", p.snr_db, scheme,
                    mapping, it + 1, rate(s.info_errors, s.info_bits), rate(s.sub_errors[0], s.sub_bits[0]),
                    rate(s.sub_errors[1], s.sub_bits[1]), rate(s.sub_errors[2], s.sub_bits[2]),
                    static_cast<long long>(s.info_bits), static_cast<long long>(s.info_errors),
                    static_cast<long long>(p.blocks), ci.low, ci.high);
      os << buf;
    }
  }
  return os.str();
}

/// Out-of-process plotting instructions for the CSV.
inline nlohmann::json plot_recipe(const ExperimentConfig& c, const SimResult& r, const std::string& csv_name) {
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
  return {{"csv", csv_name},
          {"x", "snr_db"},
          {"x_label", "SNR = Es/(Ts B90 N0) [dB]"},
          {"y", "ber_total"},
          {"y_scale", "log"},
          {"y_label", "BER"},
          {"error_band", {"ci_low", "ci_high"}},
          {"series_by", {"scheme", "mapping", "iteration"}},
          {"sub_channel_columns", {"ber_bit1", "ber_bit2", "ber_bit3"}},
          {"title", std::string(scheme_name(c.scheme.kind)) + ", " + mapping_name(c.scheme.mapper.kind) + " mapping"},
          {"b90_ts", r.b90},
          {"config_hash", hash},
          {"seed", r.seed},
          {"version", r.version}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace cpm1bit
