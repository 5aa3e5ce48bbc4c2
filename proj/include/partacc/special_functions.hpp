#pragma once

// Scalar special functions used by the separation model: log-factorial and
// log-binomial for the occupancy products, and the imaginary error function
// together with its exponentially scaled (Dawson-type) form.
//
// Internal accumulation is done in long double; results are returned as
// double. Nothing here allocates or keeps state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "partacc/error.hpp"

namespace partacc {

namespace detail {

inline const std::array<double, 21>& log_factorial_table() {
  static const std::array<double, 21> table = [] {
    std::array<double, 21> t{};
    std::uint64_t f = 1;
    t[0] = 0.0;
    for (std::uint64_t k = 1; k <= 20; ++k) {
      f *= k;
      t[k] = static_cast<double>(std::log(static_cast<long double>(f)));
    }
    return t;
  }();
  return table;
}

// Maclaurin series of erfi on x >= 0 with the term-ratio recurrence
//   t_{n+1} = t_n * x^2 * (2n+1) / ((n+1)(2n+3)),  t_0 = x.
inline long double erfi_series(long double x) {
  const long double x2 = x * x;
  long double term = x;
  long double sum = x;
  for (int n = 0; n < 2000; ++n) {
    term *= x2 * static_cast<long double>(2 * n + 1) /
            (static_cast<long double>(n + 1) * static_cast<long double>(2 * n + 3));
    sum += term;
    if (term <= std::numeric_limits<long double>::epsilon() * sum) break;
  }
  return sum * 2.0L / std::sqrt(std::numbers::pi_v<long double>);
}

// Asymptotic expansion of the Dawson integral,
//   F(x) ~ 1/(2x) * sum_n (2n-1)!! / (2x^2)^n,
// truncated at its smallest term. Accurate to ~1e-18 relative for x >= 6.5.
inline long double dawson_asymptotic(long double x) {
  const long double inv = 1.0L / (2.0L * x * x);
  long double term = 1.0L;
  long double sum = 1.0L;
  for (int n = 1; n < 500; ++n) {
    const long double next = term * static_cast<long double>(2 * n - 1) * inv;
    if (next >= term) break;
    term = next;
    sum += term;
    if (term <= std::numeric_limits<long double>::epsilon() * sum) break;
  }
  return sum / (2.0L * x);
}

}  // namespace detail

/// Upper end of the argument range where erfi itself is evaluated. Beyond it
/// erfi grows like e^{x^2} and callers should use erfi_scaled.
inline constexpr double erfi_safe_limit = 3.0;

/// Crossover between the series-times-exponential branch and the asymptotic
/// branch of erfi_scaled. Both agree to better than 1e-15 here.
inline constexpr double erfi_scaled_crossover = 6.5;

/// ln(n!). Exact table for n <= 20, Stirling series with four correction
/// terms above that; relative error below 1e-15 throughout.
inline double log_factorial(std::uint64_t n) {
  if (n <= 20) return detail::log_factorial_table()[n];
  const long double x = static_cast<long double>(n);
  const long double inv = 1.0L / x;
  const long double inv2 = inv * inv;
  const long double correction =
      inv * (1.0L / 12.0L -
             inv2 * (1.0L / 360.0L - inv2 * (1.0L / 1260.0L - inv2 * (1.0L / 1680.0L))));
  const long double half_log_two_pi =
      0.5L * std::log(2.0L * std::numbers::pi_v<long double>);
  return static_cast<double>((x + 0.5L) * std::log(x) - x + half_log_two_pi + correction);
}

/// ln C(n, k). Evaluated through min(k, n-k) so that the result is bitwise
/// symmetric in k <-> n-k.
inline double log_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) {
    fail(errc::invalid_argument,
         "log_binomial requires k <= n (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  }
  const std::uint64_t small = std::min(k, n - k);
  if (small == 0) return 0.0;
  if (small <= 32) {
    // Short product sum avoids cancellation between three large log-factorials.
    long double acc = 0.0L;
    for (std::uint64_t i = 0; i < small; ++i) {
      acc += std::log(static_cast<long double>(n - i)) - std::log(static_cast<long double>(i + 1));
    }
    return static_cast<double>(acc);
  }
  return log_factorial(n) - log_factorial(small) - log_factorial(n - small);
}

/// Imaginary error function erfi(x) = -i erf(ix), for |x| <= 3.
/// Odd by construction: the series is summed on |x| and the sign reapplied.
inline double erfi(double x) {
  if (std::isnan(x)) fail(errc::invalid_argument, "erfi of NaN");
  if (std::abs(x) > erfi_safe_limit) {
    fail(errc::out_of_safe_range, "erfi argument |x| > 3; use erfi_scaled");
  }
  const double magnitude = static_cast<double>(detail::erfi_series(std::abs(x)));
  return std::copysign(magnitude, x);
}

/// erfi(x) * exp(-x^2) for x >= 0, i.e. (2/sqrt(pi)) times the Dawson
/// integral. Finite and positive for every finite x > 0, ~ 1/(x sqrt(pi))
/// for large x.
inline double erfi_scaled(double x) {
  if (std::isnan(x) || x < 0.0) fail(errc::invalid_argument, "erfi_scaled requires x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 0.0;
  const long double xl = x;
  if (x <= erfi_scaled_crossover) {
    return static_cast<double>(detail::erfi_series(xl) * std::exp(-xl * xl));
  }
  return static_cast<double>(2.0L / std::sqrt(std::numbers::pi_v<long double>) *
                             detail::dawson_asymptotic(xl));
}

}  // namespace partacc
