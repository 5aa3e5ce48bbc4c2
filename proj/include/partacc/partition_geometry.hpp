#pragma once

// Region counts of hyperplane arrangements and the ensemble-index
// calculators built on them: the theoretical index L^d / (d! N^2) and the
// empirically corrected power law c_d L^{x_d} / N^{y_d}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "partacc/error.hpp"
#include "partacc/reference_data.hpp"
#include "partacc/separation_theory.hpp"
#include "partacc/special_functions.hpp"

namespace partacc {

namespace detail {

// log(sum_i exp(terms_i))
inline double log_sum_exp(const std::vector<double>& terms) {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(terms.begin(), terms.end());
  long double acc = 0.0L;
  for (double t : terms) acc += std::exp(static_cast<long double>(t - peak));
  return peak + static_cast<double>(std::log(acc));
}

}  // namespace detail

/// Maximum number of regions cut by L hyperplanes in general position in
/// R^d: sum_{i=0}^{d} C(L, i). Throws use_log_scale when the count does not
/// fit in 64 bits; log_max_partitions covers that range.
inline std::uint64_t max_partitions_exact(std::uint64_t L, std::uint64_t d) {
  if (L < 1 || d < 1) fail(errc::invalid_argument, "max_partitions_exact requires L, d >= 1");
  const std::uint64_t top = std::min(L, d);
  std::uint64_t binom = 1;  // C(L, 0)
  std::uint64_t sum = 1;
  for (std::uint64_t i = 0; i < top; ++i) {
    // C(L, i+1) = C(L, i) (L - i) / (i + 1); the division is exact.
    const unsigned __int128 next =
        static_cast<unsigned __int128>(binom) * (L - i) / (i + 1);
    if (next > std::numeric_limits<std::uint64_t>::max()) {
      fail(errc::use_log_scale, "region count exceeds 64-bit range");
    }
    binom = static_cast<std::uint64_t>(next);
    if (__builtin_add_overflow(sum, binom, &sum)) {
      fail(errc::use_log_scale, "region count exceeds 64-bit range");
    }
  }
  return sum;
}

/// ln of sum_{i=0}^{d} C(L, i); defined for every L, d >= 1.
inline double log_max_partitions(std::uint64_t L, std::uint64_t d) {
  if (L < 1 || d < 1) fail(errc::invalid_argument, "log_max_partitions requires L, d >= 1");
  std::vector<double> terms;
  const std::uint64_t top = std::min(L, d);
  terms.reserve(top + 1);
  for (std::uint64_t i = 0; i <= top; ++i) terms.push_back(log_binomial(L, i));
  return detail::log_sum_exp(terms);
}

/// Leading-order region count L^d / d!.
inline double max_partitions_approx(std::uint64_t L, std::uint64_t d) {
  if (L < 1 || d < 1) fail(errc::invalid_argument, "max_partitions_approx requires L, d >= 1");
  return std::exp(static_cast<double>(d) * std::log(static_cast<double>(L)) - log_factorial(d));
}

/// b = L^d / (d! N^2), evaluated through logs.
inline EnsembleIndex ensemble_index_theoretical(const ProblemSpec& spec) {
  spec.validate_sizes();
  const double log_b = spec.d * std::log(static_cast<double>(spec.L)) -
                       log_factorial(static_cast<std::uint64_t>(spec.d)) -
                       2.0 * std::log(static_cast<double>(spec.N));
  return EnsembleIndex(std::exp(log_b));
}

/// Power-law coefficients for one input dimensionality:
/// b = c L^x / N^y.
struct DimensionCoefficients {
  int d = 2;
  double x = 0.0;
  double y = 0.0;
  double c = 1.0;
  std::optional<double> r_squared;
  /// True when the row came from the linear-in-d laws rather than a fitted
  /// per-dimension table entry.
  bool from_linear_law = false;

  friend bool operator==(const DimensionCoefficients&, const DimensionCoefficients&) = default;
};

struct LinearLaw {
  double slope = 0.0;
  double intercept = 0.0;
  std::optional<double> r_squared;

  double operator()(double d) const { return slope * d + intercept; }

  friend bool operator==(const LinearLaw&, const LinearLaw&) = default;
};

/// Per-dimension coefficient table plus linear laws in d for x, y and c.
struct CoefficientModel {
  std::string version;
  std::vector<DimensionCoefficients> table;
  LinearLaw x_law;
  LinearLaw y_law;
  LinearLaw c_law;

  const DimensionCoefficients* find(int d) const {
    for (const auto& row : table)
      if (row.d == d) return &row;
    return nullptr;
  }

  /// Embedded default: the published d = 2..10 fits and linear laws.
  static CoefficientModel published() {
    CoefficientModel model;
    model.version = std::string(reference::model_version);
    for (const auto& row : reference::table3) {
      model.table.push_back({row.d, row.x, row.y, row.c, row.r_squared, false});
    }
    model.x_law = {reference::x_law.slope, reference::x_law.intercept, reference::x_law.r_squared};
    model.y_law = {reference::y_law.slope, reference::y_law.intercept, reference::y_law.r_squared};
    model.c_law = {reference::c_law.slope, reference::c_law.intercept, reference::c_law.r_squared};
    return model;
  }
};

enum class CoefficientMode { table_first, linear_law };

/// Coefficients for dimension d. In table_first mode the table row wins when
/// present; otherwise (and always in linear_law mode) the linear laws are
/// evaluated and the result is marked from_linear_law.
inline DimensionCoefficients coefficients_for_dimension(int d, const CoefficientModel& model,
                                                        CoefficientMode mode = CoefficientMode::table_first) {
  if (d < 2) {
    fail(errc::out_of_calibration_range, "coefficients are calibrated for d >= 2 (got d=" + std::to_string(d) + ")");
  }
  if (mode == CoefficientMode::table_first) {
    if (const auto* row = model.find(d)) return *row;
  }
  const double dd = d;
  DimensionCoefficients out{d, model.x_law(dd), model.y_law(dd), model.c_law(dd), std::nullopt, true};
  if (!(out.c > 0.0)) fail(errc::out_of_calibration_range, "linear law yields non-positive c_d");
  return out;
}

/// b = c_d L^{x_d} / N^{y_d}.
inline EnsembleIndex ensemble_index_empirical(const ProblemSpec& spec, const DimensionCoefficients& coeffs) {
  spec.validate_sizes();
  if (coeffs.d != spec.d) {
    fail(errc::invalid_argument, fmt::format("coefficients are for d={} but spec has d={}", coeffs.d, spec.d));
  }
  if (!(coeffs.c > 0.0)) fail(errc::invalid_argument, "coefficient c_d must be > 0");
  const double log_b = std::log(coeffs.c) + coeffs.x * std::log(static_cast<double>(spec.L)) -
                       coeffs.y * std::log(static_cast<double>(spec.N));
  return EnsembleIndex(std::exp(log_b));
}

/// Widths of a fully connected ReLU stack: input size n0 and hidden widths.
struct LayerWidths {
  std::uint64_t input = 1;
  std::vector<std::uint64_t> hidden;
};

/// Region-count estimate for a multi-layer network:
/// (prod_{i<k} floor(n_i / n_0)) * sum_{i=0}^{n_0} C(n_k, i).
inline std::uint64_t multilayer_regions(const LayerWidths& widths) {
  if (widths.input < 1 || widths.hidden.empty()) {
    fail(errc::invalid_argument, "multilayer_regions needs n0 >= 1 and at least one hidden layer");
  }
  for (auto w : widths.hidden)
    if (w < 1) fail(errc::invalid_argument, "hidden widths must be >= 1");
  std::uint64_t product = 1;
  for (std::size_t i = 0; i + 1 < widths.hidden.size(); ++i) {
    if (__builtin_mul_overflow(product, widths.hidden[i] / widths.input, &product)) {
      fail(errc::use_log_scale, "region count exceeds 64-bit range");
    }
  }
  std::uint64_t result = 0;
  if (__builtin_mul_overflow(product, max_partitions_exact(widths.hidden.back(), widths.input), &result)) {
    fail(errc::use_log_scale, "region count exceeds 64-bit range");
  }
  return result;
}

/// Probability that a random dichotomy of N points in general position in
/// R^d is linearly separable: 1 for N <= d+1, else 2^{1-N} sum_{i<=d} C(N-1, i).
inline double plane_capacity(std::uint64_t N, std::uint64_t d) {
  if (N < 1 || d < 1) fail(errc::invalid_argument, "plane_capacity requires N, d >= 1");
  if (N <= d + 1) return 1.0;
  std::vector<double> terms;
  terms.reserve(d + 1);
  for (std::uint64_t i = 0; i <= d; ++i) terms.push_back(log_binomial(N - 1, i));
  const double log_f = detail::log_sum_exp(terms) + (1.0 - static_cast<double>(N)) * std::numbers::ln2;
  return std::exp(log_f);
}

// --- CoefficientModel text format -------------------------------------------
//
//   d,x,y,c,r2
//   2,0.0744,0.6017,8.4531,0.998
//   ...
//   xlaw,<slope>,<intercept>
//   ylaw,<slope>,<intercept>
//   claw,<slope>,<intercept>

inline void write_coefficient_model(std::ostream& out, const CoefficientModel& model) {
  out << "d,x,y,c,r2\n";
  for (const auto& row : model.table) {
    out << fmt::format("{},{:.10g},{:.10g},{:.10g},", row.d, row.x, row.y, row.c);
    if (row.r_squared) out << fmt::format("{:.10g}", *row.r_squared);
    out << '\n';
  }
  out << fmt::format("xlaw,{:.10g},{:.10g}\n", model.x_law.slope, model.x_law.intercept);
  out << fmt::format("ylaw,{:.10g},{:.10g}\n", model.y_law.slope, model.y_law.intercept);
  out << fmt::format("claw,{:.10g},{:.10g}\n", model.c_law.slope, model.c_law.intercept);
}

inline CoefficientModel read_coefficient_model(std::istream& in, std::string version = "user") {
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
  };
  auto number = [](const std::string& s, int line_no) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(errc::parse_error, fmt::format("coefficient model line {}: bad number '{}'", line_no, s));
    }
  };

  CoefficientModel model;
  model.version = std::move(version);
  std::string line;
  int line_no = 0;
  bool header = false;
  bool laws[3] = {false, false, false};
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "d,x,y,c,r2") fail(errc::parse_error, "coefficient model must start with 'd,x,y,c,r2'");
      header = true;
      continue;
    }
    const auto fields = split(line);
    if (fields.size() == 3 && (fields[0] == "xlaw" || fields[0] == "ylaw" || fields[0] == "claw")) {
      LinearLaw law{number(fields[1], line_no), number(fields[2], line_no), std::nullopt};
      const int idx = fields[0] == "xlaw" ? 0 : fields[0] == "ylaw" ? 1 : 2;
      (idx == 0 ? model.x_law : idx == 1 ? model.y_law : model.c_law) = law;
      laws[idx] = true;
      continue;
    }
    if (fields.size() != 5) fail(errc::parse_error, fmt::format("coefficient model line {}: expected 5 fields", line_no));
    DimensionCoefficients row;
    const double d = number(fields[0], line_no);
    if (d != std::floor(d) || d < 1) fail(errc::parse_error, fmt::format("line {}: d must be a positive integer", line_no));
    row.d = static_cast<int>(d);
    row.x = number(fields[1], line_no);
    row.y = number(fields[2], line_no);
    row.c = number(fields[3], line_no);
    if (!fields[4].empty()) row.r_squared = number(fields[4], line_no);
    if (model.find(row.d)) fail(errc::parse_error, fmt::format("line {}: duplicate row for d={}", line_no, row.d));
    if (!(row.c > 0.0)) fail(errc::parse_error, fmt::format("line {}: c must be > 0", line_no));
    model.table.push_back(row);
  }
  if (!header) fail(errc::parse_error, "empty coefficient model");
  if (!(laws[0] && laws[1] && laws[2])) fail(errc::parse_error, "coefficient model is missing xlaw/ylaw/claw lines");
  return model;
}

}  // namespace partacc
