#pragma once

// Probability model of data separation under the balls-into-bins
// idealization: S cells, N uniformly placed points.
//
//   complete separation     every point alone in its cell
//   separation ratio gamma  fraction of points alone in their cell
//   ensemble index b        S = b N^2; the only input of the accuracy map
//
// Everything is evaluated in the log domain; S may reach ~1e9 and beyond.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "partacc/error.hpp"
#include "partacc/special_functions.hpp"

namespace partacc {

/// One estimation instance: input dimensionality d, dataset size N (even,
/// balanced classes) and hidden-layer width L.
struct ProblemSpec {
  int d = 2;
  std::int64_t N = 2;
  std::int64_t L = 1;

  /// d, N, L >= 1. Enough for the estimator formulas, which also serve
  /// published grids with odd N.
  void validate_sizes() const {
    if (d < 1) fail(errc::invalid_argument, "d must be >= 1");
    if (N < 1) fail(errc::invalid_argument, "N must be >= 1");
    if (L < 1) fail(errc::invalid_argument, "L must be >= 1");
  }

  /// Full invariant, including balanced classes (N even, N >= 2).
  void validate() const {
    validate_sizes();
    if (N < 2 || N % 2 != 0) fail(errc::invalid_argument, "N must be an even integer >= 2");
  }

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

/// The ensemble index b > 0, or the saturation marker (b = +inf, 1/b = 0)
/// standing for a measured accuracy of exactly one.
class EnsembleIndex {
 public:
  EnsembleIndex() = default;
  explicit EnsembleIndex(double b) : b_(b) {
    if (!(b > 0.0) || std::isnan(b)) fail(errc::invalid_argument, "ensemble index must be > 0");
  }

  static EnsembleIndex saturated() {
    EnsembleIndex e;
    e.b_ = std::numeric_limits<double>::infinity();
    return e;
  }

  bool is_saturated() const noexcept { return std::isinf(b_); }
  double value() const noexcept { return b_; }
  double inverse() const noexcept { return is_saturated() ? 0.0 : 1.0 / b_; }

 private:
  double b_ = 1.0;
};

/// Growth law S = b N^a used for the N -> infinity limits.
struct LimitRegime {
  double a = 2.0;
  double b = 1.0;
};

/// Exact probability that N points fall into N distinct cells out of S:
/// S! / ((S-N)! S^N), computed as the product prod_{i<N} (1 - i/S).
/// Returns 0 when S < N.
inline double p_complete_exact(std::uint64_t S, std::uint64_t N) {
  if (S == 0 || N == 0) fail(errc::invalid_argument, "p_complete_exact requires S, N >= 1");
  if (S < N) return 0.0;
  const double inv_s = 1.0 / static_cast<double>(S);
  double log_p = 0.0;
  for (std::uint64_t i = 1; i < N; ++i) log_p += std::log1p(-static_cast<double>(i) * inv_s);
  return std::exp(log_p);
}

/// Stirling form (1/e)^N (S/(S-N))^{S-N+1/2}; S may be real.
inline double p_complete_stirling(double S, std::uint64_t N) {
  const double n = static_cast<double>(N);
  if (N == 0 || !(S > n)) fail(errc::invalid_argument, "p_complete_stirling requires S > N >= 1");
  const double log_ratio = -std::log1p(-n / S);  // ln(S/(S-N))
  return std::exp((S - n + 0.5) * log_ratio - n);
}

/// N -> infinity limit of the complete-separation probability with S = b N^a.
inline double p_complete_limit(const LimitRegime& regime) {
  if (std::isnan(regime.a) || regime.a < 1.0) fail(errc::invalid_argument, "limit regime requires a >= 1");
  if (!(regime.b > 0.0)) fail(errc::invalid_argument, "limit regime requires b > 0");
  if (regime.a < 2.0) return 0.0;
  if (regime.a > 2.0) return 1.0;
  return std::exp(-1.0 / (2.0 * regime.b));
}

/// Incomplete-separation probability S! (S-m)^{N-m} / ((S-m)! S^N) with
/// m = round(gamma N). It equals the probability that a designated set of m
/// points each occupies a cell on its own.
inline double p_incomplete_exact(std::uint64_t S, std::uint64_t N, double gamma) {
  if (S == 0 || N == 0) fail(errc::invalid_argument, "p_incomplete_exact requires S, N >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(errc::invalid_argument, "gamma must lie in [0, 1]");
  const auto m = static_cast<std::uint64_t>(std::llround(gamma * static_cast<double>(N)));
  if (S < m) fail(errc::invalid_argument, "p_incomplete_exact requires S >= gamma N");
  const double inv_s = 1.0 / static_cast<double>(S);
  double log_p = 0.0;
  for (std::uint64_t i = 1; i < m; ++i) log_p += std::log1p(-static_cast<double>(i) * inv_s);
  if (N > m) {
    if (S == m) return 0.0;
    log_p += static_cast<double>(N - m) * std::log1p(-static_cast<double>(m) * inv_s);
  }
  return std::exp(log_p);
}

/// Large-N incomplete-separation probability exp(gamma (gamma - 2) / (2b)).
inline double p_incomplete_limit(EnsembleIndex b, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(errc::invalid_argument, "gamma must lie in [0, 1]");
  if (b.is_saturated()) return 1.0;
  return std::exp(gamma * (gamma - 2.0) / (2.0 * b.value()));
}

/// Continuous part of the separation-ratio law on [0, 1):
/// ((1 - gamma) / b) exp(gamma (gamma - 2) / (2b)).
inline double gamma_density(EnsembleIndex b, double gamma) {
  if (gamma == 1.0) fail(errc::use_point_mass, "gamma = 1 carries a point mass; use gamma_point_mass");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(errc::invalid_argument, "gamma must lie in [0, 1)");
  if (b.is_saturated()) return 0.0;
  return (1.0 - gamma) / b.value() * std::exp(gamma * (gamma - 2.0) / (2.0 * b.value()));
}

/// Probability mass of complete separation, exp(-1/(2b)).
inline double gamma_point_mass(EnsembleIndex b) {
  if (b.is_saturated()) return 1.0;
  return std::exp(-1.0 / (2.0 * b.value()));
}

/// E[gamma] = (sqrt(2 pi b) / 2) erfi(1/sqrt(2b)) exp(-1/(2b)).
inline double expected_gamma(EnsembleIndex b) {
  if (b.is_saturated()) return 1.0;
  const double bv = b.value();
  return 0.5 * std::sqrt(2.0 * std::numbers::pi * bv) * erfi_scaled(1.0 / std::sqrt(2.0 * bv));
}

inline double expected_gamma(double b) {
  if (!(b > 0.0)) fail(errc::invalid_argument, "ensemble index must be > 0");
  return expected_gamma(EnsembleIndex(b));
}

/// Expected training accuracy (1 + E[gamma]) / 2. Strictly increasing in b,
/// range (0.5, 1); the saturation marker maps to 1.
inline double expected_accuracy(EnsembleIndex b) { return (1.0 + expected_gamma(b)) / 2.0; }

inline double expected_accuracy(double b) {
  if (!(b > 0.0)) fail(errc::invalid_argument, "ensemble index must be > 0");
  return expected_accuracy(EnsembleIndex(b));
}

/// Inverse of expected_accuracy by geometric bisection over [1e-12, 1e12].
/// alpha >= 1 yields the saturation marker.
inline EnsembleIndex invert_expected_accuracy(double alpha) {
  if (std::isnan(alpha) || alpha <= 0.5) {
    fail(errc::below_range, "accuracy must exceed 0.5 to be inverted (got " + std::to_string(alpha) + ")");
  }
  if (alpha >= 1.0) return EnsembleIndex::saturated();

  constexpr double lo_bound = 1e-12;
  constexpr double hi_bound = 1e12;
  constexpr int max_iterations = 200;
  // Bisect on the gamma scale, which keeps resolution near alpha = 0.5.
  const double target = 2.0 * alpha - 1.0;
  double lo = lo_bound;
  double hi = hi_bound;
  if (expected_gamma(hi) <= target) return EnsembleIndex(hi);
  if (expected_gamma(lo) >= target) return EnsembleIndex(lo);
  for (int it = 0; it < max_iterations; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (expected_gamma(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 < 1e-15) break;
  }
  return EnsembleIndex(std::sqrt(lo * hi));
}

}  // namespace partacc
