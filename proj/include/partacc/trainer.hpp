#pragma once

// Ground truth for the estimator: trains a d-L-1 network (ReLU hidden layer,
// sigmoid output) on balanced, uniformly random two-class data with
// full-batch Adam on mean binary cross-entropy, and reports the converged
// training accuracy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "partacc/error.hpp"
#include "partacc/parallel.hpp"
#include "partacc/rng.hpp"
#include "partacc/separation_theory.hpp"

namespace partacc {

/// N points in [0,1)^d, row-major, with labels in {0, 1}: the first N/2 are
/// class 0 and the rest class 1.
struct Dataset {
  int d = 0;
  std::int64_t N = 0;
  std::vector<double> points;
  std::vector<std::uint8_t> labels;

  std::span<const double> point(std::int64_t j) const {
    return {points.data() + j * d, static_cast<std::size_t>(d)};
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Dataset generate_dataset(int d, std::int64_t N, RngSeed seed) {
  if (d < 1) fail(errc::invalid_argument, "dataset dimension must be >= 1");
  if (N < 2 || N % 2 != 0) fail(errc::invalid_argument, "dataset size N must be even and >= 2");
  Dataset ds;
  ds.d = d;
  ds.N = N;
  ds.points.resize(static_cast<std::size_t>(N) * d);
  Engine eng = make_engine(seed);
  for (auto& v : ds.points) v = uniform01(eng);
  ds.labels.assign(static_cast<std::size_t>(N), 0);
  std::fill(ds.labels.begin() + N / 2, ds.labels.end(), std::uint8_t{1});
  return ds;
}

/// Weights of the d-L-1 network. Hidden weights are stored input-major:
/// hidden_weights[i * L + k] is component i of neuron k's weight vector.
struct ModelParameters {
  int d = 0;
  std::int64_t L = 0;
  std::vector<double> hidden_weights;
  std::vector<double> hidden_biases;
  std::vector<double> output_weights;
  double output_bias = 0.0;

  static ModelParameters zeros(int d, std::int64_t L) {
    ModelParameters p;
    p.d = d;
    p.L = L;
    p.hidden_weights.assign(static_cast<std::size_t>(L) * d, 0.0);
    p.hidden_biases.assign(static_cast<std::size_t>(L), 0.0);
    p.output_weights.assign(static_cast<std::size_t>(L), 0.0);
    return p;
  }

  double& weight(std::int64_t k, int i) { return hidden_weights[static_cast<std::size_t>(i) * L + k]; }
  double weight(std::int64_t k, int i) const { return hidden_weights[static_cast<std::size_t>(i) * L + k]; }

  std::size_t parameter_count() const { return hidden_weights.size() + hidden_biases.size() + output_weights.size() + 1; }

  /// Flat view order: hidden weights, hidden biases, output weights, output bias.
  double& flat(std::size_t idx) {
    if (idx < hidden_weights.size()) return hidden_weights[idx];
    idx -= hidden_weights.size();
    if (idx < hidden_biases.size()) return hidden_biases[idx];
    idx -= hidden_biases.size();
    if (idx < output_weights.size()) return output_weights[idx];
    return output_bias;
  }
  double flat(std::size_t idx) const { return const_cast<ModelParameters*>(this)->flat(idx); }

  bool all_finite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(hidden_weights) && finite(hidden_biases) && finite(output_weights) && std::isfinite(output_bias);
  }

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

enum class InitScheme {
  glorot_uniform,  // hidden U(+-sqrt(6/(d+L))), output U(+-sqrt(6/(L+1))), zero biases
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::int64_t max_epochs = 50000;
  std::int64_t convergence_window = 1000;
  double convergence_delta = 1e-4;
  int repeats = 5;
  InitScheme init = InitScheme::glorot_uniform;
  bool record_loss_history = false;

  void validate() const {
    if (!(learning_rate > 0.0)) fail(errc::invalid_argument, "learning_rate must be > 0");
    if (max_epochs < 1) fail(errc::invalid_argument, "max_epochs must be >= 1");
    if (convergence_window < 1) fail(errc::invalid_argument, "convergence_window must be >= 1");
    if (!(convergence_delta > 0.0)) fail(errc::invalid_argument, "convergence_delta must be > 0");
    if (repeats < 1) fail(errc::invalid_argument, "repeats must be >= 1");
  }
};

/// Raised when the loss stops being finite.
class TrainingDiverged : public error {
 public:
  TrainingDiverged(std::int64_t epoch, int repeat)
      : error(errc::training_diverged, fmt::format("non-finite loss at epoch {} (repeat {})", epoch, repeat)),
        epoch_(epoch),
        repeat_(repeat) {}

  std::int64_t epoch() const noexcept { return epoch_; }
  int repeat() const noexcept { return repeat_; }

 private:
  std::int64_t epoch_;
  int repeat_;
};

struct RepeatResult {
  int repeat = 0;
  std::int64_t epochs = 0;
  double final_loss = 0.0;
  double accuracy = 0.0;
  double initial_accuracy = 0.0;
  bool converged = false;
  std::vector<double> loss_history;

  friend bool operator==(const RepeatResult&, const RepeatResult&) = default;
};

struct TrainingRecord {
  ProblemSpec spec;
  RngSeed seed;
  std::vector<RepeatResult> repeats;

  /// Mean of the per-repeat accuracies.
  double training_accuracy() const {
    if (repeats.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : repeats) s += r.accuracy;
    return s / static_cast<double>(repeats.size());
  }
  double accuracy_standard_error() const {
    if (repeats.size() < 2) return 0.0;
    const double m = training_accuracy();
    double ss = 0.0;
    for (const auto& r : repeats) ss += (r.accuracy - m) * (r.accuracy - m);
    const auto n = static_cast<double>(repeats.size());
    return std::sqrt(ss / (n - 1.0) / n);
  }
  std::int64_t epochs_run() const {
    std::int64_t e = 0;
    for (const auto& r : repeats) e = std::max(e, r.epochs);
    return e;
  }
  double final_loss() const {
    if (repeats.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : repeats) s += r.final_loss;
    return s / static_cast<double>(repeats.size());
  }

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

namespace detail {

inline double sigmoid(double o) {
  if (o >= 0.0) return 1.0 / (1.0 + std::exp(-o));
  const double e = std::exp(o);
  return e / (1.0 + e);
}

// log(1 + e^o)
inline double softplus(double o) { return std::max(o, 0.0) + std::log1p(std::exp(-std::abs(o))); }

struct Evaluation {
  double loss = 0.0;
  std::int64_t correct = 0;
};

// Hidden units are processed in tiles small enough for the working set of
// one tile (weights, biases, output weights and their gradients) to stay in
// L1 while every sample streams past it. Pre-activations are recomputed in
// the backward pass instead of stored.
inline constexpr std::size_t hidden_tile = 512;

// Gradient accumulation of one sample over hidden units [k0, k1) for a
// compile-time input dimension.
template <int... I>
inline void backward_tile(std::size_t k0, std::size_t k1, std::size_t L, const double* __restrict W,
                          const double* __restrict bias, const double* __restrict v, double* __restrict gW,
                          double* __restrict gb, double* __restrict gv, const double* x, double g,
                          std::integer_sequence<int, I...>) {
  const double xs[sizeof...(I)] = {x[I]...};
  for (std::size_t k = k0; k < k1; ++k) {
    const double z = (bias[k] + ... + (W[I * L + k] * xs[I]));
    const double gvk = g * v[k];
    gv[k] += g * (z > 0.0 ? z : 0.0);
    const double t = z > 0.0 ? gvk : 0.0;
    gb[k] += t;
    ((gW[I * L + k] += t * xs[I]), ...);
  }
}

// Kernel for input dimension D (D == 0: runtime d).
template <int D>
Evaluation evaluate_kernel(const ModelParameters& p, const Dataset& ds, ModelParameters* grad,
                           std::vector<double>& scratch) {
  const int d = D > 0 ? D : p.d;
  const auto L = static_cast<std::size_t>(p.L);
  const int dim = D > 0 ? D : d;
  const auto N = static_cast<std::size_t>(ds.N);
  scratch.assign(N, p.output_bias);
  double* __restrict logits = scratch.data();
  const double* __restrict X = ds.points.data();
  const double* __restrict W = p.hidden_weights.data();
  const double* __restrict bias = p.hidden_biases.data();
  const double* __restrict v = p.output_weights.data();

  // Forward: logits[j] = c + sum_k v_k relu(w_k . x_j + b_k), tile by tile.
  // Fixed-width partial sums keep the reduction vectorizable with a summation
  // order that does not depend on the compiler.
  constexpr std::size_t lanes = 8;
  for (std::size_t k0 = 0; k0 < L; k0 += hidden_tile) {
    const std::size_t k1 = std::min(L, k0 + hidden_tile);
    const std::size_t k_main = k0 + (k1 - k0) / lanes * lanes;
    for (std::size_t j = 0; j < N; ++j) {
      const double* x = X + j * d;
      double part[lanes] = {};
      for (std::size_t k = k0; k < k_main; k += lanes) {
        for (std::size_t q = 0; q < lanes; ++q) {
          double z = bias[k + q];
          if constexpr (D > 0) {
            for (int i = 0; i < D; ++i) z += W[i * L + k + q] * x[i];
          } else {
            for (int i = 0; i < dim; ++i) z += W[i * L + k + q] * x[i];
          }
          part[q] += v[k + q] * std::max(z, 0.0);
        }
      }
      double acc = 0.0;
      for (std::size_t q = 0; q < lanes; ++q) acc += part[q];
      for (std::size_t k = k_main; k < k1; ++k) {
        double z = bias[k];
        for (int i = 0; i < dim; ++i) z += W[i * L + k] * x[i];
        acc += v[k] * std::max(z, 0.0);
      }
      logits[j] += acc;
    }
  }

  Evaluation ev;
  double loss_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double o = logits[j];
    const double y = ds.labels[j];
    loss_sum += softplus(o) - y * o;
    if ((o > 0.0) == (y > 0.5)) ++ev.correct;
    logits[j] = (sigmoid(o) - y) * inv_n;  // now dLoss/dlogit
  }
  ev.loss = loss_sum * inv_n;
  if (!grad) return ev;

  double* __restrict gW = grad->hidden_weights.data();
  double* __restrict gb = grad->hidden_biases.data();
  double* __restrict gv = grad->output_weights.data();
  std::fill(grad->hidden_weights.begin(), grad->hidden_weights.end(), 0.0);
  std::fill(grad->hidden_biases.begin(), grad->hidden_biases.end(), 0.0);
  std::fill(grad->output_weights.begin(), grad->output_weights.end(), 0.0);
  double gc = 0.0;
  for (std::size_t j = 0; j < N; ++j) gc += logits[j];
  grad->output_bias = gc;

  for (std::size_t k0 = 0; k0 < L; k0 += hidden_tile) {
    const std::size_t k1 = std::min(L, k0 + hidden_tile);
    for (std::size_t j = 0; j < N; ++j) {
      const double* x = X + j * d;
      const double g = logits[j];
      if constexpr (D > 0) {
        backward_tile(k0, k1, L, W, bias, v, gW, gb, gv, x, g, std::make_integer_sequence<int, D>{});
      } else {
        for (std::size_t k = k0; k < k1; ++k) {
          double z = bias[k];
          for (int i = 0; i < dim; ++i) z += W[i * L + k] * x[i];
          const double gvk = g * v[k];
          gv[k] += g * (z > 0.0 ? z : 0.0);
          const double t = z > 0.0 ? gvk : 0.0;
          gb[k] += t;
          for (int i = 0; i < dim; ++i) gW[i * L + k] += t * x[i];
        }
      }
    }
  }
  return ev;
}

// Mean binary cross-entropy and number of correct predictions at threshold
// 0.5. When `grad` is non-null it receives the loss gradient (same layout as
// the parameters).
inline Evaluation evaluate(const ModelParameters& p, const Dataset& ds, ModelParameters* grad,
                           std::vector<double>& scratch) {
  switch (p.d) {
    case 1: return evaluate_kernel<1>(p, ds, grad, scratch);
    case 2: return evaluate_kernel<2>(p, ds, grad, scratch);
    case 3: return evaluate_kernel<3>(p, ds, grad, scratch);
    case 4: return evaluate_kernel<4>(p, ds, grad, scratch);
    default: return evaluate_kernel<0>(p, ds, grad, scratch);
  }
}

}  // namespace detail

/// sigmoid(sum_k v_k ReLU(w_k . x + b_k) + c).
inline double forward(const ModelParameters& p, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(p.d)) fail(errc::invalid_argument, "input dimension mismatch");
  double acc = p.output_bias;
  for (std::int64_t k = 0; k < p.L; ++k) {
    double z = p.hidden_biases[k];
    for (int i = 0; i < p.d; ++i) z += p.weight(k, i) * x[i];
    acc += p.output_weights[k] * std::max(z, 0.0);
  }
  return detail::sigmoid(acc);
}

/// Mean binary cross-entropy and its gradient.
inline std::pair<double, ModelParameters> loss_and_gradient(const ModelParameters& p, const Dataset& ds) {
  ModelParameters grad = ModelParameters::zeros(p.d, p.L);
  std::vector<double> z;
  const auto ev = detail::evaluate(p, ds, &grad, z);
  return {ev.loss, std::move(grad)};
}

inline double training_accuracy(const ModelParameters& p, const Dataset& ds) {
  std::vector<double> z;
  const auto ev = detail::evaluate(p, ds, nullptr, z);
  return static_cast<double>(ev.correct) / static_cast<double>(ds.N);
}

inline ModelParameters initialize_parameters(int d, std::int64_t L, InitScheme scheme, RngSeed seed) {
  ModelParameters p = ModelParameters::zeros(d, L);
  Engine eng = make_engine(seed);
  switch (scheme) {
    case InitScheme::glorot_uniform: {
      const double hidden = std::sqrt(6.0 / static_cast<double>(d + L));
      const double output = std::sqrt(6.0 / static_cast<double>(L + 1));
      for (auto& w : p.hidden_weights) w = uniform(eng, -hidden, hidden);
      for (auto& w : p.output_weights) w = uniform(eng, -output, output);
      break;
    }
  }
  return p;
}

/// Full-batch Adam from the given initial parameters. Stops once the spread
/// (max - min) of the loss over the trailing convergence_window epochs drops
/// below convergence_delta, or after max_epochs updates.
inline RepeatResult train_from(ModelParameters params, const Dataset& ds, const TrainingConfig& config,
                               int repeat = 0, ModelParameters* trained = nullptr) {
  config.validate();
  if (params.d != ds.d) fail(errc::invalid_argument, "parameter and dataset dimensions differ");

  const std::size_t P = params.parameter_count();
  std::vector<double> m(P, 0.0), s(P, 0.0);
  ModelParameters grad = ModelParameters::zeros(params.d, params.L);
  std::vector<double> z;

  const auto window = static_cast<std::size_t>(config.convergence_window);
  std::vector<double> recent(window, 0.0);
  RepeatResult result;
  result.repeat = repeat;

  double beta1_pow = 1.0, beta2_pow = 1.0;
  std::int64_t epoch = 0;
  for (;; ++epoch) {
    const auto ev = detail::evaluate(params, ds, &grad, z);
    if (!std::isfinite(ev.loss) || !params.all_finite()) throw TrainingDiverged(epoch, repeat);
    const double acc = static_cast<double>(ev.correct) / static_cast<double>(ds.N);
    if (epoch == 0) result.initial_accuracy = acc;
    if (config.record_loss_history) result.loss_history.push_back(ev.loss);
    result.final_loss = ev.loss;
    result.accuracy = acc;

    recent[static_cast<std::size_t>(epoch) % window] = ev.loss;
    if (static_cast<std::size_t>(epoch) + 1 >= window) {
      const auto [lo, hi] = std::minmax_element(recent.begin(), recent.end());
      if (*hi - *lo < config.convergence_delta) {
        result.converged = true;
        break;
      }
    }
    if (epoch >= config.max_epochs) break;

    beta1_pow *= config.beta1;
    beta2_pow *= config.beta2;
    const double step = config.learning_rate * std::sqrt(1.0 - beta2_pow) / (1.0 - beta1_pow);
    auto update = [&](std::span<double> param, std::span<const double> g, std::size_t offset) {
      double* mp = m.data() + offset;
      double* sp = s.data() + offset;
      for (std::size_t i = 0; i < param.size(); ++i) {
        mp[i] = config.beta1 * mp[i] + (1.0 - config.beta1) * g[i];
        sp[i] = config.beta2 * sp[i] + (1.0 - config.beta2) * g[i] * g[i];
        param[i] -= step * mp[i] / (std::sqrt(sp[i]) + config.adam_epsilon);
      }
    };
    std::size_t offset = 0;
    update(params.hidden_weights, grad.hidden_weights, offset);
    offset += params.hidden_weights.size();
    update(params.hidden_biases, grad.hidden_biases, offset);
    offset += params.hidden_biases.size();
    update(params.output_weights, grad.output_weights, offset);
    offset += params.output_weights.size();
    update(std::span<double>(&params.output_bias, 1), std::span<const double>(&grad.output_bias, 1), offset);
  }
  result.epochs = epoch;
  if (trained) *trained = std::move(params);
  return result;
}

/// One training repeat on `dataset` with freshly initialized parameters.
inline RepeatResult train_once(const Dataset& dataset, std::int64_t L, const TrainingConfig& config, RngSeed seed,
                               int repeat = 0) {
  if (L < 1) fail(errc::invalid_argument, "hidden width L must be >= 1");
  return train_from(initialize_parameters(dataset.d, L, config.init, seed), dataset, config, repeat);
}

/// Runs config.repeats independent repeats (fresh dataset and initialization
/// each) and collects them. Repeat r uses streams seed.derive(2r) for the
/// data and seed.derive(2r + 1) for the weights.
inline TrainingRecord measure_real_accuracy(const ProblemSpec& spec, const TrainingConfig& config, RngSeed seed,
                                            unsigned jobs = 1) {
  spec.validate();
  config.validate();
  TrainingRecord record;
  record.spec = spec;
  record.seed = seed;
  record.repeats.resize(static_cast<std::size_t>(config.repeats));
  parallel_for(record.repeats.size(), jobs, [&](std::size_t r) {
    const Dataset ds = generate_dataset(spec.d, spec.N, seed.derive(2 * r));
    record.repeats[r] = train_once(ds, spec.L, config, seed.derive(2 * r + 1), static_cast<int>(r));
  });
  return record;
}

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t flagged_kinks = 0;
  std::size_t worst_index = 0;
};

namespace detail {

// Independent long-double evaluation of the mean BCE used as the
// finite-difference oracle.
inline long double reference_loss(const ModelParameters& p, const Dataset& ds) {
  long double total = 0.0L;
  for (std::int64_t j = 0; j < ds.N; ++j) {
    const auto x = ds.point(j);
    long double o = p.output_bias;
    for (std::int64_t k = 0; k < p.L; ++k) {
      long double zk = p.hidden_biases[k];
      for (int i = 0; i < p.d; ++i) zk += static_cast<long double>(p.weight(k, i)) * x[i];
      if (zk > 0.0L) o += p.output_weights[k] * zk;
    }
    const long double y = ds.labels[j];
    total += std::max(o, 0.0L) + std::log1p(std::exp(-std::abs(o))) - y * o;
  }
  return total / static_cast<long double>(ds.N);
}

}  // namespace detail

/// Compares the analytic gradient with central differences of step epsilon.
/// Coordinates whose perturbation can move a hidden pre-activation across
/// zero (the ReLU kink) are flagged and skipped.
inline GradientCheckReport gradient_check(const ModelParameters& params, const Dataset& ds, double epsilon = 1e-5) {
  if (params.d != ds.d) fail(errc::invalid_argument, "parameter and dataset dimensions differ");
  if (!(epsilon > 0.0)) fail(errc::invalid_argument, "epsilon must be > 0");
  const auto [loss, grad] = loss_and_gradient(params, ds);
  (void)loss;

  // Unit k is near a kink if some sample's pre-activation is within the
  // largest change a single-coordinate perturbation can cause.
  std::vector<bool> near_kink(static_cast<std::size_t>(params.L), false);
  for (std::int64_t j = 0; j < ds.N; ++j) {
    const auto x = ds.point(j);
    double reach = 1.0;
    for (double xi : x) reach = std::max(reach, std::abs(xi));
    for (std::int64_t k = 0; k < params.L; ++k) {
      double zk = params.hidden_biases[k];
      for (int i = 0; i < params.d; ++i) zk += params.weight(k, i) * x[i];
      if (std::abs(zk) <= 2.0 * epsilon * reach) near_kink[k] = true;
    }
  }

  GradientCheckReport report;
  ModelParameters probe = params;
  const std::size_t n_weights = params.hidden_weights.size();
  const std::size_t n_hidden = n_weights + params.hidden_biases.size();
  for (std::size_t idx = 0; idx < params.parameter_count(); ++idx) {
    std::int64_t unit = -1;
    if (idx < n_weights) {
      unit = static_cast<std::int64_t>(idx % static_cast<std::size_t>(params.L));
    } else if (idx < n_hidden) {
      unit = static_cast<std::int64_t>(idx - n_weights);
    }
    if (unit >= 0 && near_kink[static_cast<std::size_t>(unit)]) {
      ++report.flagged_kinks;
      continue;
    }
    const double original = probe.flat(idx);
    const double hi = original + epsilon;
    const double lo = original - epsilon;
    probe.flat(idx) = hi;
    const long double up = detail::reference_loss(probe, ds);
    probe.flat(idx) = lo;
    const long double down = detail::reference_loss(probe, ds);
    probe.flat(idx) = original;
    const double numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
    const double analytic = grad.flat(idx);
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    const double rel = scale < 1e-10 ? std::abs(numeric - analytic) : std::abs(numeric - analytic) / scale;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = idx;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace partacc
