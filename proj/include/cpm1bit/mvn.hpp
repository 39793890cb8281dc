#pragma once

// Multivariate normal orthant probabilities by Genz's sequential conditioning
// transformation to the unit cube, integrated with randomly shifted
// Richtmyer lattice rules (periodized with the baker's transform).

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cpm1bit/common.hpp"

namespace cpm1bit {

/// Dense square matrix, row-major.
class Matrix {
public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  const std::vector<double>& data() const { return a_; }

private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Thrown by cholesky() for a matrix that is not symmetric positive definite.
class NotPositiveDefinite : public NumericalError {
public:
  NotPositiveDefinite(std::size_t pivot)
      : NumericalError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

private:
  std::size_t pivot_;
};

/// Lower-triangular L with L L^T = cov.
inline Matrix cholesky(const Matrix& cov) {
  const std::size_t n = cov.size();
  if (n > 64) throw ConfigError("cholesky: dimension above 64");
  Matrix L(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = cov(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = cov(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return L;
}

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

/// Inverse standard normal CDF (Wichura, AS241 PPND16; relative accuracy ~1e-16).
inline double norm_ppf(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

/// Integration controls. Defaults: 1e-5 absolute, up to 2^13 lattice points per
/// randomization, 12 randomizations.
struct QmcOptions {
  double target_tol = 1e-5;
  std::size_t min_points = 256;
  std::size_t max_points = 8192;
  int randomizations = 12;
  bool reorder = true;
};

/// P(Z in orthant), Z ~ N(mean, chol chol^T); signs[i] = +1 selects (0, inf), -1 selects (-inf, 0).
struct OrthantQuery {
  std::vector<double> mean;
  const Matrix* chol = nullptr;
  std::vector<int> signs;
  double target_tol = 1e-5;
  std::size_t max_points = 8192;
};

struct OrthantResult {
  double probability = 0.0;
  double error = 0.0;      // ~3 sigma over randomizations
  bool converged = true;   // false when the point budget ran out before target_tol
};

/// Random shifts shared by every integral of a batch.
class LatticeShifts {
public:
  LatticeShifts(std::size_t dim, int randomizations, Rng& rng) : dim_(dim), count_(randomizations) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    shifts_.resize(dim * static_cast<std::size_t>(randomizations));
    for (auto& s : shifts_) s = u(rng);
    static constexpr std::array<int, 64> primes = {
        2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
        59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
        137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
        227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};
    if (dim > primes.size()) throw ConfigError("lattice dimension above 64");
    gen_.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double s = std::sqrt(static_cast<double>(primes[i]));
      gen_[i] = s - std::floor(s);
    }
  }

  std::size_t dim() const { return dim_; }
  int count() const { return count_; }
  double generator(std::size_t i) const { return gen_[i]; }
  double shift(int r, std::size_t i) const { return shifts_[static_cast<std::size_t>(r) * dim_ + i]; }

private:
  std::size_t dim_;
  int count_;
  std::vector<double> gen_;
  std::vector<double> shifts_;
};

namespace detail {

/// Lower orthant {v < c} of N(0, S) in Genz form: Cholesky factor with rows
/// permuted by the variable-ordering heuristic and limits permuted alike.
struct GenzProblem {
  std::size_t d = 0;
  std::vector<double> L;  // row-major d*d lower triangle
  std::vector<double> c;  // permuted upper limits
};

/// Covariance S_ij = s_i s_j Sigma_ij and limits c_i = s_i mu_i turn the
/// orthant into P(v < c). With reorder, each step selects the remaining
/// variable with the smallest conditional probability given the truncated
/// means of those already placed (Genz & Bretz heuristic).
inline GenzProblem prepare(const Matrix& sigma, std::span<const double> mean, std::span<const int> signs,
                           bool reorder) {
  const std::size_t d = sigma.size();
  GenzProblem g;
  g.d = d;
  std::vector<double> S(d * d);
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) {
    c[i] = signs[i] * mean[i];
    for (std::size_t j = 0; j < d; ++j) S[i * d + j] = signs[i] * signs[j] * sigma(i, j);
  }
  std::vector<double> L(d * d, 0.0);
  std::vector<double> y(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (reorder) {
      std::size_t best = i;
      double best_p = std::numeric_limits<double>::infinity();
      for (std::size_t j = i; j < d; ++j) {
        double var = S[j * d + j];
        double m = 0.0;
        for (std::size_t k = 0; k < i; ++k) {
          var -= L[j * d + k] * L[j * d + k];
          m += L[j * d + k] * y[k];
        }
        if (var <= 0) continue;
        const double p = norm_cdf((c[j] - m) / std::sqrt(var));
        if (p < best_p) {
          best_p = p;
          best = j;
        }
      }
      if (best != i) {
        std::swap(c[i], c[best]);
        for (std::size_t k = 0; k < d; ++k) std::swap(S[i * d + k], S[best * d + k]);
        for (std::size_t k = 0; k < d; ++k) std::swap(S[k * d + i], S[k * d + best]);
        for (std::size_t k = 0; k < i; ++k) std::swap(L[i * d + k], L[best * d + k]);
      }
    }
    double diag = S[i * d + i];
    for (std::size_t k = 0; k < i; ++k) diag -= L[i * d + k] * L[i * d + k];
    if (!(diag > 0.0)) throw NotPositiveDefinite(i);
    const double lii = std::sqrt(diag);
    L[i * d + i] = lii;
    for (std::size_t j = i + 1; j < d; ++j) {
      double s = S[j * d + i];
      for (std::size_t k = 0; k < i; ++k) s -= L[j * d + k] * L[i * d + k];
      L[j * d + i] = s / lii;
    }
    // Expected value of the truncated standard normal below the current limit.
    double m = 0.0;
    for (std::size_t k = 0; k < i; ++k) m += L[i * d + k] * y[k];
    const double b = (c[i] - m) / lii;
    const double pb = norm_cdf(b);
    y[i] = pb > 1e-300 ? -norm_pdf(b) / pb : b;
  }
  g.L = std::move(L);
  g.c = std::move(c);
  return g;
}

/// Genz integrand at one point of [0,1)^{d-1}.
inline double integrand(const GenzProblem& g, const double* u, double* y) {
  const std::size_t d = g.d;
  const double* L = g.L.data();
  double e = norm_cdf(g.c[0] / L[0]);
  double f = e;
  for (std::size_t i = 1; i < d; ++i) {
    if (f == 0.0) return 0.0;
    double w = u[i - 1] * e;
    if (w < 1e-300) w = 1e-300;
    y[i - 1] = norm_ppf(w);
    double m = 0.0;
    for (std::size_t k = 0; k < i; ++k) m += L[i * d + k] * y[k];
    e = norm_cdf((g.c[i] - m) / L[i * d + i]);
    f *= e;
  }
  return f;
}

}  // namespace detail

/// Orthant probability against a shared lattice randomization.
inline OrthantResult orthant_probability(const Matrix& sigma, std::span<const double> mean,
                                         std::span<const int> signs, const LatticeShifts& shifts,
                                         const QmcOptions& opt) {
  const std::size_t d = sigma.size();
  if (mean.size() != d || signs.size() != d) throw ConfigError("orthant query dimension mismatch");
  for (int s : signs)
    if (s != 1 && s != -1) throw ConfigError("orthant signs must be +1 or -1");
  const auto g = detail::prepare(sigma, mean, signs, opt.reorder);
  OrthantResult res;
  if (d == 1) {
    res.probability = norm_cdf(g.c[0] / g.L[0]);
    res.error = 0.0;
    return res;
  }
  if (shifts.dim() < d - 1) throw ConfigError("lattice shifts have too few dimensions");
  const int R = shifts.count();
  std::vector<double> sums(static_cast<std::size_t>(R), 0.0);
  std::vector<double> u(d - 1), y(d);
  std::size_t done = 0;
  std::size_t target = std::min(opt.min_points, opt.max_points);
  for (;;) {
    for (int r = 0; r < R; ++r) {
      double acc = 0.0;
      for (std::size_t n = done + 1; n <= target; ++n) {
        for (std::size_t i = 0; i + 1 < d; ++i) {
          double x = static_cast<double>(n) * shifts.generator(i) + shifts.shift(r, i);
          x -= std::floor(x);
          u[i] = std::abs(2.0 * x - 1.0);
        }
        acc += detail::integrand(g, u.data(), y.data());
      }
      sums[static_cast<std::size_t>(r)] += acc;
    }
    done = target;
    double mean_est = 0.0;
    for (double s : sums) mean_est += s / static_cast<double>(done);
    mean_est /= R;
    double var = 0.0;
    for (double s : sums) {
      const double dv = s / static_cast<double>(done) - mean_est;
      var += dv * dv;
    }
    var /= static_cast<double>(R) * (R - 1);
    res.probability = std::clamp(mean_est, 0.0, 1.0);
    res.error = 3.0 * std::sqrt(var);
    if (res.error <= opt.target_tol) {
      res.converged = true;
      return res;
    }
    if (done >= opt.max_points) {
      res.converged = false;
      return res;
    }
    target = std::min(done * 2, opt.max_points);
  }
}

/// Single query; draws one lattice randomization from rng.
inline OrthantResult orthant_probability(const OrthantQuery& q, Rng& rng, QmcOptions opt = {}) {
  if (q.chol == nullptr) throw ConfigError("orthant query without a Cholesky factor");
  const Matrix& L = *q.chol;
  const std::size_t d = L.size();
  for (std::size_t i = 0; i < d; ++i) {
    if (!(L(i, i) > 0)) throw ConfigError("Cholesky factor needs a positive diagonal");
    for (std::size_t j = i + 1; j < d; ++j)
      if (L(i, j) != 0.0) throw ConfigError("Cholesky factor must be lower triangular");
  }
  Matrix sigma(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= std::min(i, j); ++k) s += L(i, k) * L(j, k);
      sigma(i, j) = s;
    }
  opt.target_tol = q.target_tol;
  opt.max_points = q.max_points;
  LatticeShifts shifts(std::max<std::size_t>(d, 2) - 1, opt.randomizations, rng);
  return orthant_probability(sigma, q.mean, q.signs, shifts, opt);
}

/// Many orthant queries against one covariance. All entries share one lattice
/// randomization, so a permuted batch yields the permuted results.
inline std::vector<OrthantResult> orthant_probability_batch(const Matrix& sigma,
                                                            std::span<const std::vector<double>> means,
                                                            std::span<const std::vector<int>> signs, Rng& rng,
                                                            const QmcOptions& opt = {}) {
  if (means.size() != signs.size()) throw ConfigError("batch means/signs length mismatch");
  cholesky(sigma);  // reject non-SPD input up front
  const std::size_t d = sigma.size();
  LatticeShifts shifts(std::max<std::size_t>(d, 2) - 1, opt.randomizations, rng);
  std::vector<OrthantResult> out;
  out.reserve(means.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    out.push_back(orthant_probability(sigma, means[i], signs[i], shifts, opt));
  return out;
}

}  // namespace cpm1bit
