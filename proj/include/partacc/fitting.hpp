#pragma once

// Recovers power-law coefficients from measured accuracies.
//
// Each measured accuracy is mapped to an ensemble index through the inverse
// of the expected-accuracy curve; the power law 1/b = N^y / (c L^x) is then
// fitted by ordinary least squares in log space,
//
//     ln(1/b) = -ln c - x ln L + y ln N,
//
// and the per-dimension coefficients are regressed linearly on d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "partacc/error.hpp"
#include "partacc/partition_geometry.hpp"
#include "partacc/separation_theory.hpp"
#include "partacc/trainer.hpp"

namespace partacc {

/// Accuracy at or above this value counts as saturated (1/b = 0).
inline constexpr double saturation_threshold = 1.0 - 1e-12;

/// Largest accepted condition number of the [1, ln L, ln N] design matrix.
inline constexpr double max_design_condition = 1e8;

struct MeasuredAccuracy {
  ProblemSpec spec;
  double accuracy = 0.0;
};

struct FitSample {
  ProblemSpec spec;
  double measured_accuracy = 0.0;
  double inverse_b = 0.0;  // 0 encodes a saturated (accuracy 1) measurement
};

struct ExcludedSample {
  std::size_t index = 0;  // position in the input list
  ProblemSpec spec;
  double measured_accuracy = 0.0;
  std::string reason;
};

struct SampleSet {
  std::vector<FitSample> samples;
  std::vector<ExcludedSample> excluded;
};

inline SampleSet accuracy_grid_to_samples(std::span<const MeasuredAccuracy> measurements) {
  SampleSet out;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const auto& m = measurements[i];
    if (!std::isfinite(m.accuracy) || m.accuracy < 0.0 || m.accuracy > 1.0) {
      out.excluded.push_back({i, m.spec, m.accuracy, "invalid-accuracy"});
    } else if (m.accuracy <= 0.5) {
      out.excluded.push_back({i, m.spec, m.accuracy, "below-chance"});
    } else if (m.accuracy >= saturation_threshold) {
      out.samples.push_back({m.spec, m.accuracy, 0.0});
    } else {
      out.samples.push_back({m.spec, m.accuracy, invert_expected_accuracy(m.accuracy).inverse()});
    }
  }
  return out;
}

inline SampleSet accuracy_grid_to_samples(std::span<const TrainingRecord> records) {
  std::vector<MeasuredAccuracy> m;
  m.reserve(records.size());
  for (const auto& r : records) m.push_back({r.spec, r.training_accuracy()});
  return accuracy_grid_to_samples(std::span<const MeasuredAccuracy>(m));
}

struct FitResidual {
  std::size_t index = 0;  // position in the input list
  double observed_inverse_b = 0.0;
  double predicted_inverse_b = 0.0;

  double residual() const { return observed_inverse_b - predicted_inverse_b; }
};

struct FitReport {
  DimensionCoefficients coefficients;
  double r_squared = 0.0;      // on the 1/b scale
  double r_squared_log = 0.0;  // on the ln(1/b) scale
  std::vector<FitResidual> residuals;
  std::vector<ExcludedSample> excluded;
};

namespace detail {

inline double coefficient_of_determination(std::span<const double> observed, std::span<const double> predicted) {
  double mean = 0.0;
  for (double o : observed) mean += o;
  mean /= static_cast<double>(observed.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace detail

/// Least-squares fit of the dimension-d power law. Samples of another
/// dimension and saturated samples (1/b = 0) are excluded and reported.
inline FitReport fit_power_law(std::span<const FitSample> samples, int d) {
  FitReport report;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.spec.d != d) {
      report.excluded.push_back({i, s.spec, s.measured_accuracy, "dimension-mismatch"});
    } else if (!(s.inverse_b > 0.0) || !std::isfinite(s.inverse_b)) {
      report.excluded.push_back({i, s.spec, s.measured_accuracy, "saturated"});
    } else {
      used.push_back(i);
    }
  }
  if (used.size() < 4) {
    fail(errc::unidentifiable,
         fmt::format("power-law fit for d={} needs at least 4 unsaturated samples, got {}", d, used.size()));
  }

  const auto n = static_cast<Eigen::Index>(used.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd z(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[used[static_cast<std::size_t>(r)]];
    X(r, 0) = 1.0;
    X(r, 1) = std::log(static_cast<double>(s.spec.L));
    X(r, 2) = std::log(static_cast<double>(s.spec.N));
    z(r) = std::log(s.inverse_b);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(condition < max_design_condition)) {
    fail(errc::unidentifiable,
         fmt::format("design matrix [1, ln L, ln N] is degenerate (condition {:.3g}); vary N and L independently",
                     condition));
  }
  const Eigen::Vector3d beta = svd.solve(z);

  report.coefficients.d = d;
  report.coefficients.c = std::exp(-beta(0));
  report.coefficients.x = -beta(1);
  report.coefficients.y = beta(2);

  std::vector<double> obs, pred, obs_log, pred_log;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double zhat = X.row(r).dot(beta);
    obs_log.push_back(z(r));
    pred_log.push_back(zhat);
    obs.push_back(std::exp(z(r)));
    pred.push_back(std::exp(zhat));
    report.residuals.push_back({used[static_cast<std::size_t>(r)], obs.back(), pred.back()});
  }
  report.r_squared = detail::coefficient_of_determination(obs, pred);
  report.r_squared_log = detail::coefficient_of_determination(obs_log, pred_log);
  report.coefficients.r_squared = report.r_squared;
  return report;
}

/// Ordinary least squares of x_d, y_d and c_d against d.
inline CoefficientModel fit_linear_laws(std::span<const DimensionCoefficients> table) {
  std::set<int> dims;
  for (const auto& row : table) dims.insert(row.d);
  if (dims.size() < 3) {
    fail(errc::underdetermined, fmt::format("linear laws need rows for at least 3 distinct d, got {}", dims.size()));
  }
  auto fit = [&](auto field) {
    const auto n = static_cast<double>(table.size());
    double md = 0.0, mv = 0.0;
    for (const auto& row : table) {
      md += row.d;
      mv += field(row);
    }
    md /= n;
    mv /= n;
    double sdd = 0.0, sdv = 0.0;
    for (const auto& row : table) {
      sdd += (row.d - md) * (row.d - md);
      sdv += (row.d - md) * (field(row) - mv);
    }
    LinearLaw law;
    law.slope = sdv / sdd;
    law.intercept = mv - law.slope * md;
    std::vector<double> obs, pred;
    for (const auto& row : table) {
      obs.push_back(field(row));
      pred.push_back(law(row.d));
    }
    law.r_squared = detail::coefficient_of_determination(obs, pred);
    return law;
  };

  CoefficientModel model;
  model.version = "fitted";
  model.table.assign(table.begin(), table.end());
  std::sort(model.table.begin(), model.table.end(), [](const auto& a, const auto& b) { return a.d < b.d; });
  model.x_law = fit([](const DimensionCoefficients& r) { return r.x; });
  model.y_law = fit([](const DimensionCoefficients& r) { return r.y; });
  model.c_law = fit([](const DimensionCoefficients& r) { return r.c; });
  return model;
}

}  // namespace partacc
