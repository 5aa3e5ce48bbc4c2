#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "partacc/monte_carlo.hpp"
#include "partacc/partition_geometry.hpp"
#include "partacc/separation_theory.hpp"

using namespace partacc;

namespace {

void expect_consistent(const SeparationOutcome& out, std::uint64_t N) {
  for (const auto& t : out.per_trial()) {
    ASSERT_GE(t.gamma, 0.0);
    ASSERT_LE(t.gamma, 1.0);
    ASSERT_EQ(t.gamma == 1.0, t.distinct_cells == N);
    ASSERT_EQ(t.complete, t.gamma == 1.0);
  }
  const double p = out.complete_fraction();
  EXPECT_DOUBLE_EQ(out.standard_error(), std::sqrt(p * (1.0 - p) / static_cast<double>(out.trials())));
}

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Engine a = make_engine({5, 1}), b = make_engine({5, 1}), c = make_engine({5, 2});
  for (int i = 0; i < 100; ++i) {
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
  }
  EXPECT_NE((RngSeed{5, 1}.derive(0)), (RngSeed{5, 1}.derive(1)));
  Engine e = make_engine({1, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(e);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(uniform_index(e, 7), 7u);
  }
}

TEST(SimulateBins, TwoBallsFourCells) {
  const auto out = simulate_bins(4, 2, 1'000'000, {1, 0});
  EXPECT_EQ(out.trials(), 1'000'000u);
  EXPECT_NEAR(out.complete_fraction(), 0.75, 0.0015);
  expect_consistent(out, 2);
}

TEST(SimulateBins, Pigeonhole) {
  const auto out = simulate_bins(1, 2, 1000, {2, 0});
  EXPECT_EQ(out.complete_fraction(), 0.0);
  for (const auto& t : out.per_trial()) EXPECT_EQ(t.gamma, 0.0);
}

TEST(SimulateBins, QuadraticCellCountLimit) {
  const auto out = simulate_bins(10'000'000, 1000, 10000, {3, 0});
  EXPECT_NEAR(out.complete_fraction(), 0.9512, 0.01);
  EXPECT_NEAR(out.complete_fraction(), p_complete_exact(10'000'000, 1000), 0.01);
}

TEST(SimulateBins, ConvergesToExactProbability) {
  const std::pair<std::uint64_t, std::uint64_t> grid[] = {{10, 3}, {100, 10}, {1000, 30}};
  int within = 0, total = 0;
  for (const auto& [S, N] : grid) {
    const double p = p_complete_exact(S, N);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto out = simulate_bins(S, N, 100'000, {1000 + seed, 0});
      within += std::abs(out.complete_fraction() - p) <= 4.0 * out.standard_error() ? 1 : 0;
      ++total;
    }
  }
  EXPECT_GE(within, static_cast<int>(std::ceil(0.99 * total)));
}

TEST(SimulateBins, IndependentOfThreadCount) {
  const auto one = simulate_bins(500, 20, 5000, {42, 7}, 1);
  for (unsigned jobs : {2u, 3u, 8u}) EXPECT_TRUE(one == simulate_bins(500, 20, 5000, {42, 7}, jobs)) << jobs;
  EXPECT_FALSE(one == simulate_bins(500, 20, 5000, {43, 7}, 1));
}

TEST(Arrangement, ReproducibleAndUnitNormals) {
  const auto a = sample_arrangement(2, 3, RngSeed{11, 0});
  const auto b = sample_arrangement(2, 3, RngSeed{11, 0});
  EXPECT_EQ(a.normals, b.normals);
  EXPECT_EQ(a.offsets, b.offsets);
  const auto big = sample_arrangement(2, 1000, RngSeed{12, 0});
  ASSERT_EQ(big.size(), 1000u);
  for (std::size_t k = 0; k < big.size(); ++k) {
    const auto w = big.normal(k);
    EXPECT_NEAR(std::hypot(w[0], w[1]), 1.0, 1e-12);
  }
}

TEST(Arrangement, EveryPlaneCutsTheCube) {
  const int d = 5;
  const auto arr = sample_arrangement(d, 10, RngSeed{13, 0});
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const auto w = arr.normal(k);
    bool pos = false, neg = false;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double s = arr.offsets[k];
      for (int j = 0; j < d; ++j) s += w[j] * ((corner >> j) & 1);
      pos = pos || s > 0.0;
      neg = neg || s < 0.0;
    }
    EXPECT_TRUE(pos && neg) << k;
  }
}

TEST(RegionCodes, SignConvention) {
  HyperplaneArrangement arr;
  arr.d = 2;
  arr.normals = {1.0, 0.0};
  arr.offsets = {0.0};
  const double x[] = {0.7, 0.2};
  EXPECT_EQ(region_code(x, arr).to_string(), "1");
  const double on_plane[] = {0.0, 0.5};
  EXPECT_EQ(region_code(on_plane, arr).to_string(), "0");
  const double wrong[] = {0.1, 0.2, 0.3};
  try {
    region_code(wrong, arr);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::invalid_argument);
  }
}

TEST(RegionCodes, ThreeLinesGiveAtMostSevenCells) {
  const auto arr = sample_arrangement(2, 3, RngSeed{21, 0});
  Engine eng = make_engine({22, 0});
  std::set<RegionCode> codes;
  for (int i = 0; i < 100; ++i) {
    const double x[] = {uniform01(eng), uniform01(eng)};
    codes.insert(region_code(x, arr));
  }
  EXPECT_LE(codes.size(), 7u);
}

TEST(SimulateHyperplanes, TwoPointsOnePlane) {
  const std::uint64_t trials = 100'000;
  const auto out = simulate_hyperplanes({2, 2, 1}, trials, {31, 0});
  for (const auto& t : out.per_trial()) EXPECT_TRUE(t.gamma == 0.0 || t.gamma == 1.0);
  // Direct estimate of the probability that one random plane separates two
  // random points, from an independent stream.
  Engine eng = make_engine({32, 0});
  std::uint64_t split = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const double p[] = {uniform01(eng), uniform01(eng)};
    const double q[] = {uniform01(eng), uniform01(eng)};
    const auto arr = sample_arrangement(2, 1, eng);
    split += region_code(p, arr) == region_code(q, arr) ? 0 : 1;
  }
  const double direct = static_cast<double>(split) / trials;
  const double se = std::sqrt(2.0 * direct * (1.0 - direct) / trials);
  EXPECT_NEAR(out.mean_gamma(), direct, 4.0 * se);
}

TEST(SimulateHyperplanes, ManyPlanesFewPoints) {
  const auto out = simulate_hyperplanes({2, 10, 500}, 1000, {33, 0});
  EXPECT_GE(out.complete_fraction(), 0.9);
  std::cout << "hyperplanes complete fraction " << out.complete_fraction() << ", bins model "
            << p_complete_exact(max_partitions_exact(500, 2), 10) << "\n";
  expect_consistent(out, 10);
}

TEST(SimulateHyperplanes, TooFewCells) {
  const auto out = simulate_hyperplanes({2, 100, 2}, 50, {34, 0});
  EXPECT_EQ(out.complete_fraction(), 0.0);
  for (const auto& t : out.per_trial()) EXPECT_LE(t.distinct_cells, 4u);
}

TEST(SimulateHyperplanes, DistinctCodesBoundedByRegionCount) {
  const ProblemSpec specs[] = {{1, 200, 20}, {2, 200, 5}, {2, 50, 20}, {3, 200, 20}, {3, 100, 3}};
  for (const auto& s : specs) {
    const auto out = simulate_hyperplanes(s, 1000, {35, 0});
    const auto bound = max_partitions_exact(s.L, s.d);
    for (const auto& t : out.per_trial()) ASSERT_LE(t.distinct_cells, bound);
    expect_consistent(out, s.N);
  }
}

TEST(SimulateHyperplanes, SeparationGrowsWithPlanes) {
  double prev = -1.0, prev_se = 0.0;
  for (std::int64_t L : {10, 50, 250, 1250}) {
    const auto out = simulate_hyperplanes({2, 100, L}, 200, {36, 0});
    const double se = out.gamma_standard_error();
    EXPECT_GE(out.mean_gamma(), prev - 2.0 * std::hypot(se, prev_se)) << L;
    prev = out.mean_gamma();
    prev_se = se;
  }
}

TEST(SimulateHyperplanes, IndependentOfThreadCount) {
  const auto one = simulate_hyperplanes({3, 60, 40}, 700, {37, 0}, 1);
  EXPECT_TRUE(one == simulate_hyperplanes({3, 60, 40}, 700, {37, 0}, 4));
}

TEST(GammaHistogramTest, AllComplete) {
  const auto out = simulate_bins(1'000'000, 3, 500, {41, 0});
  ASSERT_EQ(out.complete_fraction(), 1.0);
  const auto h = empirical_gamma_distribution(out);
  EXPECT_EQ(h.point_mass(), 1.0);
  EXPECT_EQ(h.bins(), 50u);
  for (auto c : h.counts) EXPECT_EQ(c, 0u);
}

TEST(GammaHistogramTest, PointMassMatchesLimit) {
  const auto out = simulate_bins(250'000, 500, 100'000, {42, 0});
  const auto h = empirical_gamma_distribution(out, 50);
  EXPECT_NEAR(h.point_mass(), std::exp(-0.5), 0.01);
  EXPECT_NEAR(h.point_mass(), p_complete_exact(250'000, 500), 0.01);
  const auto total = std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}) + h.point_count;
  EXPECT_EQ(total, h.trials);
  double mass = h.point_mass();
  for (std::size_t i = 0; i < h.bins(); ++i) mass += h.mass(i);
  EXPECT_NEAR(mass, 1.0, 1e-12);
}
