#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ism/audit.hpp"
#include "ism/invsens.hpp"
#include "ism/median.hpp"

namespace ism {
namespace {

FiniteProblem five_point_median() {
  return median_problem({1, 2, 3, 4, 5, 3.5, 4.5}, 5, {3.0, 3.5, 4.5});
}

const std::vector<double> kFive{1, 2, 3, 4, 5};

TEST(BruteForceLengthTest, MedianOfFivePoints) {
  const FiniteProblem p = five_point_median();
  EXPECT_EQ(inverse_sensitivity_bruteforce(p, kFive, 3.0).value, 0);
  EXPECT_EQ(inverse_sensitivity_bruteforce(p, kFive, 3.5).value, 1);
  EXPECT_EQ(inverse_sensitivity_bruteforce(p, kFive, 4.5).value, 2);
}

TEST(BruteForceLengthTest, UnreachableTargetIsInfinite) {
  const FiniteProblem p = five_point_median();
  EXPECT_FALSE(inverse_sensitivity_bruteforce(p, kFive, 7.0).is_finite());
}

TEST(BruteForceLengthTest, AgreesWithExhaustiveScan) {
  const FiniteProblem p = mean_problem({0, 1, 2}, 4);
  for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
    for (double t : p.target_grid) {
      ASSERT_EQ(inverse_sensitivity_bruteforce(p, x, t),
                inverse_sensitivity_exhaustive(p, x, t));
    }
  });
}

TEST(SmoothLengthTest, ZeroRadiusKeepsLength) {
  const LengthFn len = [](double s) { return Length{s < 3.0 ? 0 : 1}; };
  const std::vector<double> grid{3.0};
  EXPECT_EQ(smooth_inverse_sensitivity(len, 3.4, 0.0, grid).value, 1);
  EXPECT_EQ(smooth_inverse_sensitivity(len, 2.0, 0.0, grid).value, 0);
}

TEST(SmoothLengthTest, BallTouchingZeroRegion) {
  const LengthFn len = [](double s) { return Length{s < 3.0 ? 0 : 1}; };
  const std::vector<double> grid{3.0};
  EXPECT_EQ(smooth_inverse_sensitivity(len, 3.4, 0.5, grid).value, 0);
  EXPECT_EQ(smooth_inverse_sensitivity(len, 3.6, 0.5, grid).value, 1);
}

TEST(SmoothLengthTest, MedianNearThreePointSix) {
  // Targets in [3.55, 3.65] need to be representable to be reachable.
  const FiniteProblem p =
      median_problem({1, 2, 3, 4, 5, 3.5, 4.5, 3.55, 3.6, 3.65}, 5, {});
  const LengthFn len = [&](double t) {
    return inverse_sensitivity_bruteforce(p, kFive, t);
  };
  const std::vector<double> grid{3.55, 3.6, 3.65};
  EXPECT_EQ(smooth_inverse_sensitivity(len, 3.6, 0.05, grid).value, 1);
}

TEST(SmoothLengthTest, EmptyProbeGridThrows) {
  const LengthFn len = [](double) { return Length{0}; };
  EXPECT_THROW(smooth_inverse_sensitivity(len, 0.0, 0.1, {}), std::invalid_argument);
}

TEST(SmoothLengthTest, NeverExceedsLength) {
  const FiniteProblem p = median_problem({0, 1, 2}, 4, {});
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back(i / 6.0);
  for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
    const LengthFn len = [&](double t) {
      return Length{static_cast<std::int64_t>(median_len(x, t))};
    };
    for (double t : grid) {
      for (double rho : {0.0, 0.1, 0.4}) {
        ASSERT_LE(smooth_inverse_sensitivity(len, t, rho, grid), len(t));
      }
      ASSERT_EQ(smooth_inverse_sensitivity(len, t, 0.0, grid), len(t));
    }
  });
}

TEST(ModulusTest, ZeroDistance) {
  const FiniteProblem p = five_point_median();
  EXPECT_EQ(modulus_bruteforce(p, kFive, 0), 0.0);
}

TEST(ModulusTest, MeanOfBits) {
  const FiniteProblem p = mean_problem({0, 1}, 3);
  const std::vector<double> x{0, 0, 0};
  EXPECT_NEAR(modulus_bruteforce(p, x, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(modulus_bruteforce(p, x, 3), 1.0, 1e-15);
}

TEST(ModulusTest, StepFunctionAtBoundary) {
  const FiniteProblem p = step_problem(8, 5.0);
  const std::vector<double> x{1, 1, 1, 1, 0, 0, 0, 0};
  EXPECT_EQ(modulus_bruteforce(p, x, 1), 1.0);
}

TEST(DiscreteMechanismTest, TwoPointProbability) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length{1}}};
  const auto p = discrete_mechanism_probabilities(lengths, 2.0);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(DiscreteMechanismTest, LargeEpsilonConcentrates) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length{1}}, {2.0, Length{2}}};
  EXPECT_NEAR(prob_correct(lengths, 100.0), 1.0, 1e-15);
}

TEST(DiscreteMechanismTest, MatchesFiniteExponentialMechanism) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length{1}}, {2.0, Length{2}}};
  EXPECT_NEAR(discrete_mechanism_probabilities(lengths, 2.0)[0], 0.66524, 1e-5);
  const std::vector<double> scores{0, 1, 2};
  EXPECT_NEAR(discrete_mechanism_probabilities(lengths, 2.0)[0],
              exponential_probabilities(scores, 2.0)[0], 1e-15);
}

TEST(DiscreteMechanismTest, InfiniteLengthsNeverSelected) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length::infinite()}};
  SeededRng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(discrete_mechanism(lengths, 0.01, rng), 0.0);
}

TEST(DiscreteMechanismTest, RejectsEmptyOrZeroFreeMaps) {
  SeededRng rng(2);
  EXPECT_THROW(discrete_mechanism(LengthMap{}, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(discrete_mechanism(LengthMap{{1.0, Length{1}}}, 1.0, rng),
               std::invalid_argument);
}

TEST(ProbCorrectTest, ClosedForm) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length{1}}, {2.0, Length{2}}};
  EXPECT_NEAR(prob_correct(lengths, 2.0), 0.66524, 1e-5);
  EXPECT_EQ(prob_correct(LengthMap{{4.0, Length{0}}}, 0.3), 1.0);
}

TEST(ProbCorrectTest, SamplerFrequencyWithinThreeStandardErrors) {
  const LengthMap lengths{{0.0, Length{0}}, {1.0, Length{1}}, {2.0, Length{3}},
                          {3.0, Length{1}}};
  const double eps = 0.8;
  const double p = prob_correct(lengths, eps);
  SeededRng rng(3);
  const int draws = 1000000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += discrete_mechanism(lengths, eps, rng) == 0.0;
  EXPECT_NEAR(static_cast<double>(hits) / draws, p, 3 * std::sqrt(p * (1 - p) / draws));
}

TEST(LipschitzPropertyTest, LengthsAcrossNeighbors) {
  const FiniteProblem p = mean_problem({0, 1, 2}, 3);
  const DatasetLengthFn len = [&](std::span<const double> x, double t) {
    return inverse_sensitivity_bruteforce(p, x, t);
  };
  EXPECT_LE(lipschitz_audit(len, p, p.target_grid), 1.0);
}

TEST(LipschitzPropertyTest, SmoothedLengthsAcrossNeighbors) {
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back(i / 6.0);
  const FiniteProblem p = median_problem({0, 1, 2}, 4, grid);
  const DatasetLengthFn smoothed = [&](std::span<const double> x, double t) {
    const LengthFn len = [&](double s) {
      return Length{static_cast<std::int64_t>(median_len(x, s))};
    };
    return smooth_inverse_sensitivity(len, t, 0.3, grid);
  };
  EXPECT_LE(lipschitz_audit(smoothed, p, grid), 1.0);
}

LengthMap lengths_for(const FiniteProblem& p, std::span<const double> x) {
  LengthMap out;
  for (double t : p.target_grid) out[t] = inverse_sensitivity_bruteforce(p, x, t);
  return out;
}

TEST(DiscreteMechanismPrivacyTest, NeighborRatiosWithinBudget) {
  const double eps = 0.9;
  for (const auto& entry : problem_catalog()) {
    const FiniteProblem& p = entry.problem;
    double worst = 0.0;
    for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
      const auto px = discrete_mechanism_probabilities(lengths_for(p, x), eps);
      for (const auto& y : enumerate_neighbors(x, p.alphabet)) {
        const auto py = discrete_mechanism_probabilities(lengths_for(p, y), eps);
        for (std::size_t i = 0; i < px.size(); ++i) {
          if (px[i] == 0.0 && py[i] == 0.0) continue;
          worst = std::max(worst, std::abs(std::log(px[i] / py[i])));
        }
      }
    });
    EXPECT_LE(worst, eps + 1e-12) << entry.name;
  }
}

TEST(DiscreteMechanismPrivacyTest, BinaryRangeHalvesTheRatio) {
  FiniteProblem p;
  p.alphabet = {0, 1};
  p.n = 3;
  p.estimand = [](std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) >= 2 ? 1.0 : 0.0;
  };
  p.target_grid = {0.0, 1.0};
  const double eps = 1.2;
  double worst = 0.0;
  for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
    const auto px = discrete_mechanism_probabilities(lengths_for(p, x), eps);
    for (const auto& y : enumerate_neighbors(x, p.alphabet)) {
      const auto py = discrete_mechanism_probabilities(lengths_for(p, y), eps);
      for (std::size_t i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(std::log(px[i] / py[i])));
      }
    }
  });
  EXPECT_LE(worst, eps / 2 + 1e-12);
  EXPECT_GT(worst, 0.0);
}

TEST(ContinuousMechanismTest, SingleSliceIsUniform) {
  SliceProfile profile;
  profile.range_low = 0.0;
  profile.range_high = 1.0;
  profile.slices = {{0, {{0.0, 1.0}}}};
  SeededRng rng(4);
  std::vector<int> bins(10, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double t = continuous_mechanism(profile, 1.0, rng);
    ASSERT_GE(t, 0.0);
    ASSERT_LT(t, 1.0);
    ++bins[static_cast<int>(t * 10)];
  }
  for (int b : bins) EXPECT_NEAR(b, draws / 10, 400);
  EXPECT_NEAR(std::exp(profile_log_density(profile, 1.0, 0.3)), 1.0, 1e-12);
}

TEST(ContinuousMechanismTest, SliceMassesBalance) {
  const double rho = 0.1;
  SliceProfile profile;
  profile.rho = rho;
  profile.range_low = 0.0;
  profile.range_high = rho + rho * std::exp(1.0);
  profile.slices = {{0, {{0.0, rho}}}, {1, {{rho, profile.range_high}}}};
  const auto probs = slice_probabilities(profile, 2.0);
  EXPECT_NEAR(probs[1], 0.5, 1e-12);
  SeededRng rng(5);
  int in_one = 0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) in_one += continuous_mechanism(profile, 2.0, rng) >= rho;
  EXPECT_NEAR(static_cast<double>(in_one) / draws, 0.5, 4 * std::sqrt(0.25 / draws));
}

TEST(ContinuousMechanismTest, AllMassesZeroThrows) {
  SliceProfile profile;
  profile.range_low = 0.0;
  profile.range_high = 1.0;
  SeededRng rng(6);
  EXPECT_THROW(continuous_mechanism(profile, 1.0, rng), std::invalid_argument);
}

TEST(ContinuousMechanismTest, GridBaseMeasureCountsPoints) {
  SliceProfile profile;
  profile.range_low = 0.0;
  profile.range_high = 1.0;
  profile.grid_points = 11;  // 0, 0.1, ..., 1
  profile.slices = {{0, {{0.0, 0.5}}}, {2, {{0.5, 1.0}}}};
  const auto masses = profile.slice_masses();
  EXPECT_EQ(masses[0], 5.0);
  EXPECT_EQ(masses[1], 6.0);
  SeededRng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double t = continuous_mechanism(profile, 1.0, rng);
    const double scaled = t * 10.0;
    ASSERT_NEAR(scaled, std::round(scaled), 1e-9);
  }
  const double z = 5.0 + 6.0 * std::exp(-1.0);
  EXPECT_NEAR(std::exp(profile_log_density(profile, 1.0, 0.2)), 1.0 / z, 1e-12);
  EXPECT_NEAR(std::exp(profile_log_density(profile, 1.0, 1.0)), std::exp(-1.0) / z,
              1e-12);
}

TEST(SampleMonotoneTest, MedianInstances) {
  const FiniteProblem p = median_problem({0, 1, 2}, 3, {0, 1, 2});
  for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
    EXPECT_TRUE(check_sample_monotone(p, x, p.target_grid));
  });
}

TEST(SampleMonotoneTest, MeanOfBits) {
  const FiniteProblem p = mean_problem({0, 1}, 3);
  for_each_dataset(p.alphabet, p.n, [&](std::span<const double> x) {
    EXPECT_TRUE(check_sample_monotone(p, x, p.target_grid));
  });
}

TEST(SampleMonotoneTest, ConstructedViolation) {
  // f(00) = 0, f(11) = 1, f(01) = f(10) = 2: from 00, target 1 needs two
  // changes but target 2 only one.
  FiniteProblem p;
  p.alphabet = {0, 1};
  p.n = 2;
  p.estimand = [](std::span<const double> x) {
    if (x[0] == x[1]) return x[0];
    return 2.0;
  };
  p.target_grid = {0, 1, 2};
  const std::vector<double> x{0, 0};
  EXPECT_EQ(inverse_sensitivity_bruteforce(p, x, 1.0).value, 2);
  EXPECT_EQ(inverse_sensitivity_bruteforce(p, x, 2.0).value, 1);
  EXPECT_FALSE(check_sample_monotone(p, x, p.target_grid));
}

}  // namespace
}  // namespace ism
