#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include "partacc/special_functions.hpp"

using namespace partacc;

namespace {

// Plain Maclaurin series of erfi with a fixed term count.
long double erfi_series_oracle(long double x, int terms) {
  long double sum = 0.0L, power = x, factorial = 1.0L;
  for (int n = 0; n < terms; ++n) {
    if (n > 0) {
      factorial *= n;
      power *= x * x;
    }
    sum += power / (factorial * (2 * n + 1));
  }
  return 2.0L / std::sqrt(std::numbers::pi_v<long double>) * sum;
}

double ulp(double x) { return std::nextafter(x, INFINITY) - x; }

}  // namespace

TEST(LogFactorial, SmallValues) {
  EXPECT_EQ(log_factorial(0), 0.0);
  EXPECT_EQ(log_factorial(1), 0.0);
  EXPECT_NEAR(log_factorial(5), std::log(120.0), 1e-15);
  EXPECT_NEAR(log_factorial(20), std::log(2432902008176640000.0), 1e-14);
}

TEST(LogFactorial, MatchesLogSumAt20000) {
  long double sum = 0.0L;
  for (int k = 2; k <= 20000; ++k) sum += std::log(static_cast<long double>(k));
  const double got = log_factorial(20000);
  EXPECT_NEAR(got, static_cast<double>(sum), 1e-10 * static_cast<double>(sum));
  // 40-digit reference for ln(20000!).
  EXPECT_NEAR(got, 178075.6217371987003128679, 1e-12 * 178075.62);
}

TEST(LogFactorial, RelativeAccuracyUpToTenMillion) {
  EXPECT_NEAR(log_factorial(10'000'000), 151180965.4875695648984254, 1e-12 * 151180965.49);
  // Crossing from the table into the asymptotic series.
  long double sum = 0.0L;
  for (int k = 2; k <= 40; ++k) {
    sum += std::log(static_cast<long double>(k));
    EXPECT_NEAR(log_factorial(k), static_cast<double>(sum), 1e-12 * static_cast<double>(sum)) << k;
  }
}

TEST(LogFactorial, TelescopesToLogN) {
  // The difference of two doubles near 1e7 cannot resolve 1e-10, so the
  // tolerance is floored at two units in the last place of the operands.
  double worst = 0.0;
  double prev = log_factorial(0);
  for (std::uint64_t n = 1; n <= 1'000'000; ++n) {
    const double cur = log_factorial(n);
    const double err = std::abs((cur - prev) - std::log(static_cast<double>(n)));
    const double tol = std::max(1e-10, 2.0 * ulp(cur));
    if (err > tol) ADD_FAILURE() << "n=" << n << " err=" << err << " tol=" << tol;
    worst = std::max(worst, err / tol);
    prev = cur;
  }
  EXPECT_LE(worst, 1.0);
}

TEST(LogBinomial, SmallCases) {
  EXPECT_NEAR(log_binomial(4, 2), std::log(6.0), 1e-15);
  for (std::uint64_t n : {0u, 1u, 7u, 1000u, 123456789u}) EXPECT_EQ(log_binomial(n, 0), 0.0);
}

TEST(LogBinomial, MatchesExactBigInteger) {
  using boost::multiprecision::cpp_int;
  cpp_int c = 1;
  for (int i = 0; i < 25; ++i) c = c * (50 - i) / (i + 1);
  ASSERT_EQ(c, cpp_int("126410606437752"));
  const double expected = std::log(c.convert_to<double>());
  EXPECT_NEAR(log_binomial(50, 25), expected, 1e-10 * expected);

  for (std::uint64_t n : {60u, 200u, 1000u}) {
    cpp_int exact = 1;
    const std::uint64_t k = n / 3;
    for (std::uint64_t i = 0; i < k; ++i) exact = exact * (n - i) / (i + 1);
    // ln of a big integer via its bit length to stay in range.
    const auto bits = msb(exact);
    const double mant = static_cast<double>(exact >> (bits > 60 ? bits - 60 : 0));
    const double ln = std::log(mant) + (bits > 60 ? (bits - 60) * std::numbers::ln2 : 0.0);
    EXPECT_NEAR(log_binomial(n, k), ln, 1e-10 * ln) << n;
  }
}

TEST(LogBinomial, SymmetricExactly) {
  for (std::uint64_t n : {5u, 33u, 64u, 999u, 100000u}) {
    for (std::uint64_t k = 0; k <= n; k += std::max<std::uint64_t>(1, n / 17)) {
      EXPECT_EQ(log_binomial(n, k), log_binomial(n, n - k)) << n << "," << k;
    }
  }
}

TEST(LogBinomial, RejectsKGreaterThanN) {
  try {
    log_binomial(3, 4);
    FAIL() << "expected an error";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::invalid_argument);
  }
}

TEST(Erfi, ZeroAndUnitArgument) {
  EXPECT_EQ(erfi(0.0), 0.0);
  const auto oracle = static_cast<double>(erfi_series_oracle(1.0L, 30));
  EXPECT_NEAR(erfi(1.0), oracle, 1e-12);
  EXPECT_NEAR(erfi(1.0), 1.650426, 1e-6);
  EXPECT_NEAR(erfi(-1.0), -1.650426, 1e-6);
}

TEST(Erfi, MatchesHighPrecisionReferences) {
  const std::pair<double, double> refs[] = {
      {0.1, 0.11321517416959979296}, {0.5, 0.61495209469651098084}, {1.0, 1.650425758797542876},
      {2.0, 18.564802414575552599},  {2.5, 130.39575501324692681},  {3.0, 1629.9946226015656511},
  };
  for (const auto& [x, v] : refs) {
    EXPECT_NEAR(erfi(x), v, 1e-12) << x;
    EXPECT_NEAR(erfi(x), static_cast<double>(erfi_series_oracle(x, 80)), 1e-12) << x;
  }
}

TEST(Erfi, OddAndStrictlyIncreasing) {
  double prev = -INFINITY;
  for (int i = -3000; i <= 3000; ++i) {
    const double x = i / 1000.0;
    EXPECT_EQ(erfi(-x), -erfi(x)) << x;
    const double v = erfi(x);
    EXPECT_GT(v, prev) << x;
    prev = v;
  }
}

TEST(Erfi, RejectsLargeArguments) {
  for (double x : {3.0000001, -3.5, 10.0}) {
    try {
      erfi(x);
      FAIL() << x;
    } catch (const error& e) {
      EXPECT_EQ(e.code(), errc::out_of_safe_range);
    }
  }
  EXPECT_NO_THROW(erfi(3.0));
  EXPECT_NO_THROW(erfi(-3.0));
}

TEST(ErfiScaled, KnownValues) {
  EXPECT_EQ(erfi_scaled(0.0), 0.0);
  EXPECT_NEAR(erfi_scaled(1.0), static_cast<double>(erfi_series_oracle(1.0L, 30) * std::exp(-1.0L)), 1e-12);
  EXPECT_NEAR(erfi_scaled(1.0), 0.607158, 1e-6);
  const double asym = 1.0 / (50.0 * std::sqrt(std::numbers::pi));
  EXPECT_NEAR(erfi_scaled(50.0), asym, 0.01 * asym);
}

TEST(ErfiScaled, MatchesHighPrecisionReferences) {
  const std::pair<double, double> refs[] = {
      {0.5, 0.47892517290104347254},  {1.0, 0.60715770584139372912},  {3.0, 0.20115731703760038666},
      {3.5, 0.16882988857996770946},  {5.0, 0.11524596183093658848},  {6.0, 0.095396208969110766023},
      {6.5, 0.087864424731045661897}, {7.0, 0.081447508065002967563}, {10.0, 0.056705394232887594085},
      {50.0, 0.011286049784700271376}, {1000.0, 0.00056418986564297120407},
  };
  for (const auto& [x, v] : refs) EXPECT_NEAR(erfi_scaled(x), v, 1e-12 * std::max(1.0, v)) << x;
}

TEST(ErfiScaled, AgreesWithUnscaledUpToThree) {
  for (int i = 0; i <= 300; ++i) {
    const double x = i / 100.0;
    EXPECT_NEAR(erfi_scaled(x), erfi(x) * std::exp(-x * x), 1e-12) << x;
  }
}

TEST(ErfiScaled, BranchesAgreeAtCrossover) {
  const long double x = erfi_scaled_crossover;
  const long double series = detail::erfi_series(x) * std::exp(-x * x);
  const long double asym = 2.0L / std::sqrt(std::numbers::pi_v<long double>) * detail::dawson_asymptotic(x);
  EXPECT_LE(std::abs(static_cast<double>(series - asym)), 1e-10);
}

TEST(ErfiScaled, FiniteAndNonNegativeEverywhere) {
  for (double x = 0.0; x <= 1e6; x = x < 1.0 ? x + 0.01 : x * 1.01) {
    const double v = erfi_scaled(x);
    EXPECT_TRUE(std::isfinite(v)) << x;
    EXPECT_GE(v, 0.0) << x;
  }
}

TEST(ErfiScaled, RejectsNegativeArguments) {
  try {
    erfi_scaled(-0.1);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::invalid_argument);
  }
}
