#pragma once

// Stochastic oracles for the separation model.
//
// simulate_bins        N balls into S equally likely bins (the idealized model)
// simulate_hyperplanes N uniform points in [0,1)^d cut by L random hyperplanes
//
// Both report, per trial, the separation ratio (fraction of points alone in
// their cell), the number of occupied cells and whether separation was
// complete. Trials are grouped into fixed-size blocks with one random stream
// per block, so results do not depend on the number of worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "partacc/error.hpp"
#include "partacc/parallel.hpp"
#include "partacc/rng.hpp"
#include "partacc/separation_theory.hpp"

namespace partacc {

struct TrialOutcome {
  double gamma = 0.0;
  std::uint64_t distinct_cells = 0;
  bool complete = false;

  friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

/// Per-trial results plus aggregate statistics. Immutable once built.
class SeparationOutcome {
 public:
  SeparationOutcome() = default;
  explicit SeparationOutcome(std::vector<TrialOutcome> trials) : trials_(std::move(trials)) {
    for (const auto& t : trials_) {
      if (!(t.gamma >= 0.0 && t.gamma <= 1.0)) fail(errc::invalid_argument, "gamma sample outside [0, 1]");
      complete_count_ += t.complete ? 1 : 0;
      gamma_sum_ += t.gamma;
      cells_sum_ += static_cast<double>(t.distinct_cells);
    }
  }

  std::uint64_t trials() const noexcept { return trials_.size(); }
  std::span<const TrialOutcome> per_trial() const noexcept { return trials_; }
  std::uint64_t complete_count() const noexcept { return complete_count_; }

  double complete_fraction() const noexcept {
    return trials_.empty() ? 0.0 : static_cast<double>(complete_count_) / static_cast<double>(trials_.size());
  }
  /// sqrt(p (1 - p) / trials) for the complete fraction.
  double standard_error() const noexcept {
    if (trials_.empty()) return 0.0;
    const double p = complete_fraction();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials_.size()));
  }
  double mean_gamma() const noexcept { return trials_.empty() ? 0.0 : gamma_sum_ / static_cast<double>(trials_.size()); }
  double gamma_standard_error() const {
    if (trials_.size() < 2) return 0.0;
    const double m = mean_gamma();
    double ss = 0.0;
    for (const auto& t : trials_) ss += (t.gamma - m) * (t.gamma - m);
    const auto n = static_cast<double>(trials_.size());
    return std::sqrt(ss / (n - 1.0) / n);
  }
  double distinct_cells_mean() const noexcept {
    return trials_.empty() ? 0.0 : cells_sum_ / static_cast<double>(trials_.size());
  }
  std::vector<double> gamma_samples() const {
    std::vector<double> out;
    out.reserve(trials_.size());
    for (const auto& t : trials_) out.push_back(t.gamma);
    return out;
  }

  friend bool operator==(const SeparationOutcome& a, const SeparationOutcome& b) { return a.trials_ == b.trials_; }

 private:
  std::vector<TrialOutcome> trials_;
  std::uint64_t complete_count_ = 0;
  double gamma_sum_ = 0.0;
  double cells_sum_ = 0.0;
};

/// Trials sharing one random stream.
inline constexpr std::uint64_t trials_per_stream = 256;

namespace detail {

// Counts runs in a sorted sequence: (#runs, #runs of length one).
template <class It, class Eq>
std::pair<std::uint64_t, std::uint64_t> count_runs(It first, It last, Eq eq) {
  std::uint64_t runs = 0, singles = 0;
  while (first != last) {
    It next = first;
    std::uint64_t len = 0;
    while (next != last && eq(*next, *first)) {
      ++next;
      ++len;
    }
    ++runs;
    if (len == 1) ++singles;
    first = next;
  }
  return {runs, singles};
}

template <class TrialFn>
SeparationOutcome run_blocked_trials(std::uint64_t trials, RngSeed seed, unsigned jobs, TrialFn trial_fn) {
  std::vector<TrialOutcome> results(trials);
  const std::uint64_t blocks = (trials + trials_per_stream - 1) / trials_per_stream;
  parallel_for(blocks, jobs, [&](std::size_t block) {
    Engine eng = make_engine(seed.derive(block));
    const std::uint64_t begin = block * trials_per_stream;
    const std::uint64_t end = std::min(trials, begin + trials_per_stream);
    for (std::uint64_t t = begin; t < end; ++t) results[t] = trial_fn(eng);
  });
  return SeparationOutcome(std::move(results));
}

}  // namespace detail

/// Throws N balls uniformly into S bins, `trials` times.
inline SeparationOutcome simulate_bins(std::uint64_t S, std::uint64_t N, std::uint64_t trials, RngSeed seed,
                                       unsigned jobs = 1) {
  if (S < 1 || N < 1 || trials < 1) fail(errc::invalid_argument, "simulate_bins requires S, N, trials >= 1");
  return detail::run_blocked_trials(trials, seed, jobs, [S, N](Engine& eng) {
    std::vector<std::uint64_t> bins(N);
    for (auto& b : bins) b = uniform_index(eng, S);
    std::sort(bins.begin(), bins.end());
    const auto [runs, singles] = detail::count_runs(bins.begin(), bins.end(), std::equal_to<>{});
    return TrialOutcome{static_cast<double>(singles) / static_cast<double>(N), runs, singles == N};
  });
}

/// L hyperplanes w_k . x + b_k = 0 in R^d with unit normals, stored row-major.
struct HyperplaneArrangement {
  int d = 0;
  std::vector<double> normals;
  std::vector<double> offsets;

  std::size_t size() const noexcept { return offsets.size(); }
  std::span<const double> normal(std::size_t k) const {
    return {normals.data() + k * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

/// Draws unit normals uniformly on the sphere; each plane passes through an
/// independent uniform point of [0,1)^d.
inline HyperplaneArrangement sample_arrangement(int d, std::int64_t L, Engine& eng) {
  if (d < 1 || L < 1) fail(errc::invalid_argument, "sample_arrangement requires d, L >= 1");
  HyperplaneArrangement arr;
  arr.d = d;
  arr.normals.resize(static_cast<std::size_t>(L) * d);
  arr.offsets.resize(static_cast<std::size_t>(L));
  for (std::int64_t k = 0; k < L; ++k) {
    double* w = arr.normals.data() + k * d;
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (int j = 0; j < d; ++j) {
        w[j] = standard_normal(eng);
        norm2 += w[j] * w[j];
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    double dot = 0.0;
    for (int j = 0; j < d; ++j) {
      w[j] *= inv;
      dot += w[j] * uniform01(eng);
    }
    arr.offsets[k] = -dot;
  }
  return arr;
}

inline HyperplaneArrangement sample_arrangement(int d, std::int64_t L, RngSeed seed) {
  Engine eng = make_engine(seed);
  return sample_arrangement(d, L, eng);
}

/// Side-of-plane signature of a point: bit k set iff w_k . x + b_k > 0.
/// Points on a plane get bit 0.
class RegionCode {
 public:
  RegionCode() = default;
  explicit RegionCode(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

  std::size_t size() const noexcept { return bits_; }
  bool test(std::size_t k) const { return (words_[k / 64] >> (k % 64)) & 1u; }
  void set(std::size_t k) { words_[k / 64] |= std::uint64_t{1} << (k % 64); }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  /// Bit k as the k-th character, '1' or '0'.
  std::string to_string() const {
    std::string s(bits_, '0');
    for (std::size_t k = 0; k < bits_; ++k)
      if (test(k)) s[k] = '1';
    return s;
  }

  friend bool operator==(const RegionCode&, const RegionCode&) = default;
  friend auto operator<=>(const RegionCode& a, const RegionCode& b) { return a.words_ <=> b.words_; }

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

inline RegionCode region_code(std::span<const double> x, const HyperplaneArrangement& arr) {
  if (x.size() != static_cast<std::size_t>(arr.d)) {
    fail(errc::invalid_argument, "point dimension does not match the arrangement");
  }
  RegionCode code(arr.size());
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const auto w = arr.normal(k);
    double s = arr.offsets[k];
    for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
    if (s > 0.0) code.set(k);
  }
  return code;
}

/// Per trial: N uniform points in [0,1)^d, a fresh arrangement of L planes,
/// and the separation ratio of the resulting cell assignment.
inline SeparationOutcome simulate_hyperplanes(const ProblemSpec& spec, std::uint64_t trials, RngSeed seed,
                                              unsigned jobs = 1) {
  if (spec.d < 1 || spec.N < 1 || spec.L < 1) fail(errc::invalid_argument, "simulate_hyperplanes requires d, N, L >= 1");
  if (trials < 1) fail(errc::invalid_argument, "simulate_hyperplanes requires trials >= 1");
  const int d = spec.d;
  const auto n = static_cast<std::size_t>(spec.N);
  const auto L = static_cast<std::size_t>(spec.L);
  const std::size_t words = (L + 63) / 64;
  return detail::run_blocked_trials(trials, seed, jobs, [=](Engine& eng) {
    std::vector<double> points(n * d);
    for (auto& v : points) v = uniform01(eng);
    const HyperplaneArrangement arr = sample_arrangement(d, spec.L, eng);

    std::vector<std::uint64_t> codes(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = points.data() + i * d;
      std::uint64_t* code = codes.data() + i * words;
      for (std::size_t k = 0; k < L; ++k) {
        const double* w = arr.normals.data() + k * d;
        double s = arr.offsets[k];
        for (int j = 0; j < d; ++j) s += w[j] * x[j];
        if (s > 0.0) code[k / 64] |= std::uint64_t{1} << (k % 64);
      }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(codes.begin() + a * words, codes.begin() + (a + 1) * words,
                                          codes.begin() + b * words, codes.begin() + (b + 1) * words);
    };
    auto same = [&](std::size_t a, std::size_t b) {
      return std::equal(codes.begin() + a * words, codes.begin() + (a + 1) * words, codes.begin() + b * words);
    };
    std::sort(order.begin(), order.end(), less);
    const auto [runs, singles] = detail::count_runs(order.begin(), order.end(), same);
    return TrialOutcome{static_cast<double>(singles) / static_cast<double>(n), runs, singles == n};
  });
}

/// Histogram of the continuous part of the separation ratio on [0, 1) plus
/// the frequency of gamma = 1.
struct GammaHistogram {
  std::uint64_t trials = 0;
  std::vector<std::uint64_t> counts;  // per bin, gamma < 1 only
  std::uint64_t point_count = 0;      // gamma == 1

  std::size_t bins() const noexcept { return counts.size(); }
  double bin_width() const { return 1.0 / static_cast<double>(counts.size()); }
  double bin_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_width(); }
  double mass(std::size_t i) const { return static_cast<double>(counts[i]) / static_cast<double>(trials); }
  /// Mass per unit gamma, comparable with gamma_density.
  double density(std::size_t i) const { return mass(i) / bin_width(); }
  double point_mass() const { return static_cast<double>(point_count) / static_cast<double>(trials); }
};

inline GammaHistogram empirical_gamma_distribution(const SeparationOutcome& outcome, std::size_t bins = 50) {
  if (outcome.trials() == 0) fail(errc::invalid_argument, "histogram needs at least one gamma sample");
  if (bins < 1) fail(errc::invalid_argument, "histogram needs at least one bin");
  GammaHistogram h;
  h.trials = outcome.trials();
  h.counts.assign(bins, 0);
  for (const auto& t : outcome.per_trial()) {
    if (t.gamma >= 1.0) {
      ++h.point_count;
      continue;
    }
    auto idx = static_cast<std::size_t>(t.gamma * static_cast<double>(bins));
    h.counts[std::min(idx, bins - 1)] += 1;
  }
  return h;
}

}  // namespace partacc
