#pragma once

// Auxiliary channel law W(y_k | s_{k-1}, s_k): one row of 4^{M(N+1)} orthant
// probabilities per trellis transition, plus the on-disk table cache.
//
// Cache file layout (all integers and floats little-endian):
//   offset  size  field
//        0     8  magic "CPM1BTBL"
//        8     4  u32 format version (1)
//       12     4  u32 flags (bit 0: some integrals missed the tolerance)
//       16     8  u64 key: hash of CPM config, filter, N, SNR and integration settings
//       24     8  f64 SNR in dB
//       32     8  f64 noise variance per high-rate sample
//       40     4  u32 M (samples per symbol)
//       44     4  u32 number of rows (transitions)
//       48     4  u32 number of columns (output patterns)
//       52     4  u32 reserved (0)
//       56     -  rows*cols f64 probabilities, row-major, row = transition id

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>
#include <vector>

#include "cpm1bit/frontend.hpp"
#include "cpm1bit/mvn.hpp"
#include "cpm1bit/trellis.hpp"

namespace cpm1bit {

inline constexpr double kProbFloor = 1e-300;

struct TableOptions {
  double tolerance = 1e-5;       // absolute, per integral
  std::size_t max_points = 8192; // lattice points per randomization
  int randomizations = 12;
  bool symmetry = true;          // derive rows from the quarter-turn rotation of beta
  bool reorder = true;
  std::uint64_t seed = 0x6a09e667f3bcc908ULL;
  int threads = 1;
};

struct ChannelLawTable {
  int rows = 0;     // transitions
  int cols = 0;     // output patterns
  int oversampling = 0;
  double snr_db = 0.0;
  double noise_variance = 0.0;
  std::uint64_t key = 0;
  int unconverged = 0;         // integrals that exhausted the point budget
  double max_row_error = 0.0;  // largest |row sum - 1| before renormalization
  std::vector<double> prob;    // rows*cols
  std::vector<double> log_prob;

  std::span<const double> row(int t) const {
    return std::span<const double>(prob).subspan(static_cast<std::size_t>(t) * cols, cols);
  }
  double log_w(int t, std::uint32_t y) const { return log_prob[static_cast<std::size_t>(t) * cols + y]; }

  void finalize_logs() {
    log_prob.resize(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) log_prob[i] = std::log(std::max(prob[i], kProbFloor));
  }
};

struct TableShape {
  int states;
  int transitions;
  int patterns;
  int dim;
};

inline TableShape table_shape(const FrontendModel& model) {
  const Trellis tr(model.cfg(), model.total_memory());
  const int dim = model.window_dim();
  if (dim / 2 > 15) throw ConfigError("observation window too large for pattern indexing");
  return {tr.num_states(), tr.num_transitions(), 1 << dim, dim};
}

/// Image of an output pattern when every sample is multiplied by j:
/// (Re<0, Im<0) -> (Im>=0, Re<0).
inline std::uint32_t rotate_pattern(std::uint32_t p, int samples) {
  std::uint32_t out = 0;
  for (int m = 0; m < samples; ++m) {
    const std::uint32_t re = (p >> (2 * m)) & 1u, im = (p >> (2 * m + 1)) & 1u;
    out |= (1u - im) << (2 * m);
    out |= re << (2 * m + 1);
  }
  return out;
}

inline std::uint64_t table_key(const FrontendModel& model, double snr_db, const TableOptions& opt) {
  std::uint64_t h = model.cfg().hash();
  auto add = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  auto add_d = [&add](double d) { add(std::bit_cast<std::uint64_t>(d)); };
  add_d(model.filter_spec().duration);
  add(static_cast<std::uint64_t>(model.output_memory()));
  add(static_cast<std::uint64_t>(model.decimation_offset()));
  add_d(snr_db);
  add_d(model.noise_variance());
  add_d(opt.tolerance);
  add(opt.max_points);
  add(static_cast<std::uint64_t>(opt.randomizations));
  add(opt.symmetry ? 1 : 0);
  add(opt.reorder ? 1 : 0);
  add(opt.seed);
  return h;
}

/// Computes W for every transition. Rows are renormalized to sum to 1; a row
/// whose raw sum is off by more than 10x the row tolerance (patterns * tol)
/// aborts with NumericalError.
inline ChannelLawTable build_channel_law_table(const FrontendModel& model, double snr_db,
                                               const TableOptions& opt = {}) {
  const Trellis tr(model.cfg(), model.total_memory());
  const auto shape = table_shape(model);
  const int d = shape.dim;
  const int samples = d / 2;
  ChannelLawTable tab;
  tab.rows = shape.transitions;
  tab.cols = shape.patterns;
  tab.oversampling = model.cfg().oversampling;
  tab.snr_db = snr_db;
  tab.noise_variance = model.noise_variance();
  tab.key = table_key(model, snr_db, opt);
  tab.prob.assign(static_cast<std::size_t>(tab.rows) * tab.cols, 0.0);

  const int P = model.cfg().h_den;
  const bool sym = opt.symmetry && P % 4 == 0;
  const int quarter = P / 4;
  // Rows computed directly: all of them, or only beta_{k-L} < P/4.
  std::vector<int> direct;
  for (int t = 0; t < tab.rows; ++t)
    if (!sym || tr.transition(t).window_beta < quarter) direct.push_back(t);

  if (model.noise_variance() == 0.0) {
    for (int t : direct) {
      const auto& tt = tr.transition(t);
      const auto mu = model.window_mean(tt.window_beta, tt.window);
      std::uint32_t p = 0;
      for (int i = 0; i < d; ++i)
        if (mu[i] < 0) p |= 1u << i;
      tab.prob[static_cast<std::size_t>(t) * tab.cols + p] = 1.0;
    }
  } else {
    const Matrix R = model.covariance();
    cholesky(R);
    Rng rng(opt.seed);
    const LatticeShifts shifts(static_cast<std::size_t>(d - 1), opt.randomizations, rng);
    QmcOptions q;
    q.target_tol = opt.tolerance;
    q.max_points = opt.max_points;
    q.randomizations = opt.randomizations;
    q.reorder = opt.reorder;
    std::vector<std::vector<int>> signs(static_cast<std::size_t>(tab.cols));
    for (int p = 0; p < tab.cols; ++p) signs[p] = pattern_signs(static_cast<std::uint32_t>(p), d);

    std::atomic<std::size_t> next{0};
    std::atomic<int> unconverged{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= direct.size()) return;
        const int t = direct[i];
        const auto& tt = tr.transition(t);
        const auto mu = model.window_mean(tt.window_beta, tt.window);
        for (int p = 0; p < tab.cols; ++p) {
          const auto r = orthant_probability(R, mu, signs[p], shifts, q);
          if (!r.converged) unconverged.fetch_add(1);
          tab.prob[static_cast<std::size_t>(t) * tab.cols + p] = r.probability;
        }
      }
    };
    const int nthreads = std::max(1, std::min<int>(opt.threads, static_cast<int>(direct.size())));
    if (nthreads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    tab.unconverged = unconverged.load();
  }

  const double row_tol = opt.tolerance * tab.cols;
  for (int t : direct) {
    double* row = &tab.prob[static_cast<std::size_t>(t) * tab.cols];
    double s = 0.0;
    for (int p = 0; p < tab.cols; ++p) s += row[p];
    const double err = std::abs(s - 1.0);
    tab.max_row_error = std::max(tab.max_row_error, err);
    if (!(err <= 10.0 * row_tol))
      throw NumericalError("channel law row " + std::to_string(t) + " sums to " + std::to_string(s));
    for (int p = 0; p < tab.cols; ++p) row[p] = std::max(row[p] / s, kProbFloor);
  }

  if (sym) {
    // Row(beta0 + q P/4)[p] = Row(beta0)[rot^{-q}(p)], equivalently
    // Row(beta0 + q P/4)[rot^q(p)] = Row(beta0)[p].
    for (int t = 0; t < tab.rows; ++t) {
      const auto& tt = tr.transition(t);
      if (tt.window_beta < quarter) continue;
      const int qturns = tt.window_beta / quarter;
      TrellisState base = tr.state(tt.from);
      base.beta = tt.window_beta % quarter;
      int base_t = -1;
      for (int id : tr.outgoing(tr.index(base)))
        if (tr.transition(id).x == tt.x) base_t = id;
      for (int p = 0; p < tab.cols; ++p) {
        std::uint32_t img = static_cast<std::uint32_t>(p);
        for (int k = 0; k < qturns; ++k) img = rotate_pattern(img, samples);
        tab.prob[static_cast<std::size_t>(t) * tab.cols + img] =
            tab.prob[static_cast<std::size_t>(base_t) * tab.cols + p];
      }
    }
  }
  tab.finalize_logs();
  return tab;
}

namespace detail {

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline constexpr char kTableMagic[8] = {'C', 'P', 'M', '1', 'B', 'T', 'B', 'L'};
inline constexpr std::uint32_t kTableVersion = 1;
inline constexpr std::size_t kTableHeader = 56;

}  // namespace detail

inline void save_table(const ChannelLawTable& tab, const std::filesystem::path& path) {
  std::vector<unsigned char> buf;
  buf.reserve(detail::kTableHeader + tab.prob.size() * 8);
  buf.insert(buf.end(), detail::kTableMagic, detail::kTableMagic + 8);
  detail::put_u32(buf, detail::kTableVersion);
  detail::put_u32(buf, tab.unconverged > 0 ? 1u : 0u);
  detail::put_u64(buf, tab.key);
  detail::put_u64(buf, std::bit_cast<std::uint64_t>(tab.snr_db));
  detail::put_u64(buf, std::bit_cast<std::uint64_t>(tab.noise_variance));
  detail::put_u32(buf, static_cast<std::uint32_t>(tab.oversampling));
  detail::put_u32(buf, static_cast<std::uint32_t>(tab.rows));
  detail::put_u32(buf, static_cast<std::uint32_t>(tab.cols));
  detail::put_u32(buf, 0);
  for (double v : tab.prob) detail::put_u64(buf, std::bit_cast<std::uint64_t>(v));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write then rename so concurrent readers never see a partial file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write table cache " + tmp);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw Error("short write on table cache " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

/// Loads a cached table; nullopt when missing or when the header does not
/// match the expected key and dimensions.
inline std::optional<ChannelLawTable> load_table(const std::filesystem::path& path, std::uint64_t key,
                                                 int rows, int cols) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < detail::kTableHeader) return std::nullopt;
  if (std::memcmp(buf.data(), detail::kTableMagic, 8) != 0) return std::nullopt;
  const unsigned char* p = buf.data();
  if (detail::get_u32(p + 8) != detail::kTableVersion) return std::nullopt;
  ChannelLawTable tab;
  tab.unconverged = (detail::get_u32(p + 12) & 1u) ? 1 : 0;
  tab.key = detail::get_u64(p + 16);
  tab.snr_db = std::bit_cast<double>(detail::get_u64(p + 24));
  tab.noise_variance = std::bit_cast<double>(detail::get_u64(p + 32));
  tab.oversampling = static_cast<int>(detail::get_u32(p + 40));
  tab.rows = static_cast<int>(detail::get_u32(p + 44));
  tab.cols = static_cast<int>(detail::get_u32(p + 48));
  if (tab.key != key || tab.rows != rows || tab.cols != cols) return std::nullopt;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (buf.size() != detail::kTableHeader + n * 8) return std::nullopt;
  tab.prob.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    tab.prob[i] = std::bit_cast<double>(detail::get_u64(p + detail::kTableHeader + 8 * i));
  tab.finalize_logs();
  return tab;
}

/// Loads the table from cache_dir when present, otherwise builds and stores it.
/// An empty cache_dir disables caching.
inline ChannelLawTable cached_channel_law_table(const FrontendModel& model, double snr_db,
                                                const TableOptions& opt, const std::filesystem::path& cache_dir) {
  const auto shape = table_shape(model);
  const auto key = table_key(model, snr_db, opt);
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    char name[64];
    std::snprintf(name, sizeof name, "table_%016llx.bin", static_cast<unsigned long long>(key));
    file = cache_dir / name;
    if (auto t = load_table(file, key, shape.transitions, shape.patterns)) return *t;
  }
  auto tab = build_channel_law_table(model, snr_db, opt);
  if (!file.empty()) save_table(tab, file);
  return tab;
}

}  // namespace cpm1bit
