#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ism/regression.hpp"

namespace ism {
namespace {

RegressionDataset random_instance(std::size_t n, int d, SeededRng& rng,
                                  double noise = 0.5) {
  RegressionDataset data;
  data.features.resize(static_cast<Eigen::Index>(n), d);
  data.targets.resize(static_cast<Eigen::Index>(n));
  data.norm_bound = 1.0;
  Vector theta_star(d);
  for (int j = 0; j < d; ++j) theta_star(j) = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = rng.uniform(-1.0, 1.0);
    if (x.norm() > 1.0) x /= x.norm();
    data.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    data.targets(static_cast<Eigen::Index>(i)) =
        x.dot(theta_star) + rng.uniform(-noise, noise);
  }
  return data;
}

Vector vec1(double v) { return Vector::Constant(1, v); }

TEST(RobustLossTest, ValueAndDerivatives) {
  const RobustLoss h{1.0};
  EXPECT_NEAR(h.value(0.0), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(h.value(0.0), 1.38629, 1e-5);
  EXPECT_EQ(h.derivative(0.0), 0.0);
  EXPECT_NEAR(h.second_derivative(0.0), 0.5, 1e-15);
  // Direct formula where it does not overflow.
  for (double t : {-3.0, -0.4, 0.7, 5.0}) {
    for (double a : {0.5, 1.0, 4.0}) {
      const RobustLoss l{a};
      const double direct =
          a * std::log(1 + std::exp(t / a)) + a * std::log(1 + std::exp(-t / a));
      EXPECT_NEAR(l.value(t), direct, 1e-12);
      EXPECT_NEAR(l.derivative(t), (l.value(t + 1e-6) - l.value(t - 1e-6)) / 2e-6, 1e-8);
      EXPECT_LE(l.second_derivative(t), 1.0 / (2.0 * a) + 1e-15);
    }
  }
}

TEST(RobustLossTest, OverflowSafe) {
  const RobustLoss h{0.5};
  EXPECT_TRUE(std::isfinite(h.value(1e6)));
  EXPECT_NEAR(h.value(1e6), 1e6, 1e-6);
  EXPECT_NEAR(h.value(-1e6), 1e6, 1e-6);
  EXPECT_EQ(h.derivative(1e6), 1.0);
  EXPECT_EQ(h.second_derivative(1e6), 0.0);
  EXPECT_THROW(RobustLoss{0.0}.validate(), std::invalid_argument);
  EXPECT_THROW(RobustLoss{-1.0}.validate(), std::invalid_argument);
}

TEST(LossEvalTest, ZeroResidualsGiveZeroGradient) {
  RegressionDataset data;
  data.features = Matrix(2, 2);
  data.features << 0.5, 0.1, -0.3, 0.6;
  Vector theta(2);
  theta << 1.0, -2.0;
  data.targets = data.features * theta;
  const LossEval ev = loss_eval(RobustLoss{1.0}, theta, data);
  EXPECT_NEAR(ev.gradient.norm(), 0.0, 1e-15);
  EXPECT_NEAR(ev.value, 2.0 * std::log(2.0), 1e-15);
}

TEST(LossEvalTest, MatchesFiniteDifferences) {
  SeededRng rng(21);
  for (int d : {1, 2, 3}) {
    for (double alpha : {0.5, 1.0, 4.0}) {
      const RegressionDataset data = random_instance(30, d, rng);
      const RobustLoss loss{alpha};
      Vector theta(d);
      for (int j = 0; j < d; ++j) theta(j) = rng.uniform(-2.0, 2.0);
      const LossEval ev = loss_eval(loss, theta, data);
      EXPECT_NEAR(ev.value, loss_value(loss, theta, data), 1e-14);
      EXPECT_NEAR((loss_gradient_sum(loss, theta, data) / 30.0 - ev.gradient).norm(), 0.0,
                  1e-14);
      const double step = 1e-5;
      for (int j = 0; j < d; ++j) {
        Vector e = Vector::Zero(d);
        e(j) = step;
        const double g =
            (loss_value(loss, theta + e, data) - loss_value(loss, theta - e, data)) /
            (2 * step);
        EXPECT_NEAR(g, ev.gradient(j), 1e-6);
        const Vector hcol =
            (loss_eval(loss, theta + e, data).gradient -
             loss_eval(loss, theta - e, data).gradient) /
            (2 * step);
        EXPECT_LT((hcol - ev.hessian.col(j)).cwiseAbs().maxCoeff(), 1e-4);
      }
    }
  }
}

TEST(RegressionDatasetTest, Validation) {
  RegressionDataset data;
  data.features = Matrix::Constant(2, 1, 0.5);
  data.targets = Vector::Zero(3);
  EXPECT_THROW(data.validate(), std::invalid_argument);
  data.targets = Vector::Zero(2);
  EXPECT_NO_THROW(data.validate());
  data.features(0, 0) = 1.5;
  EXPECT_THROW(data.validate(), std::invalid_argument);
  data.features(0, 0) = 0.5;
  const RegressionDataset more = data.with_row(vec1(-0.2), 3.0);
  EXPECT_EQ(more.size(), 3u);
  EXPECT_EQ(more.targets(2), 3.0);
}

TEST(ParamDomainTest, VolumesAndMembership) {
  const ParamDomain box = ParamDomain::box(Vector::Constant(2, -1.0), Vector::Constant(2, 2.0));
  EXPECT_NEAR(box.volume(), 9.0, 1e-12);
  EXPECT_TRUE(box.contains(Vector::Constant(2, 2.0)));
  EXPECT_FALSE(box.contains(Vector::Constant(2, 2.1)));
  EXPECT_TRUE(box.on_boundary(Vector::Constant(2, 2.0), 1e-12));
  EXPECT_NEAR((box.project(Vector::Constant(2, 5.0)) - Vector::Constant(2, 2.0)).norm(), 0, 0);
  const ParamDomain ball = ParamDomain::ball(Vector::Zero(3), 2.0);
  EXPECT_NEAR(ball.volume(), 4.0 / 3.0 * M_PI * 8.0, 1e-12);
  EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-15);
  EXPECT_NEAR(ball.project(Vector::Constant(3, 10.0)).norm(), 2.0, 1e-12);
}

TEST(ParamDomainTest, MonteCarloHitRateMatchesVolume) {
  SeededRng rng(22);
  for (int d : {1, 2, 3}) {
    const ParamDomain ball = ParamDomain::ball(Vector::Constant(d, 0.3), 1.5);
    const Vector lo = ball.lower(), hi = ball.upper();
    double box_volume = 1.0;
    for (int j = 0; j < d; ++j) box_volume *= hi(j) - lo(j);
    const int draws = 400000;
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
      Vector p(d);
      for (int j = 0; j < d; ++j) p(j) = rng.uniform(lo(j), hi(j));
      hits += ball.contains(p);
    }
    EXPECT_NEAR(box_volume * hits / draws, ball.volume(), 0.01 * ball.volume()) << d;
    for (int i = 0; i < 1000; ++i) ASSERT_TRUE(ball.contains(ball.sample_uniform(rng)));
  }
}

TEST(ParamDomainTest, EllipsoidContainment) {
  const ParamDomain box = ParamDomain::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  Matrix a(2, 2);
  a << 2.0, 0.0, 0.0, 4.0;
  // Semi-axes r / 2 and r / 4.
  EXPECT_TRUE(box.contains_ellipsoid(Vector::Zero(2), a, 1.9));
  EXPECT_FALSE(box.contains_ellipsoid(Vector::Zero(2), a, 2.1));
  const ParamDomain ball = ParamDomain::ball(Vector::Zero(2), 1.0);
  EXPECT_TRUE(ball.contains_ellipsoid(Vector::Zero(2), a, 1.9));
  EXPECT_FALSE(ball.contains_ellipsoid(Vector::Zero(2), a, 2.1));
}

TEST(SolveErmTest, SymmetricTwoPointInstance) {
  RegressionDataset data;
  data.features = Matrix(2, 1);
  data.features << 1.0, -1.0;
  data.targets = Vector(2);
  data.targets << 2.0, -2.0;
  const ParamDomain domain = ParamDomain::box(vec1(-10), vec1(10));
  const ErmSolution sol = solve_erm(RobustLoss{1.0}, data, domain);
  EXPECT_NEAR(sol.theta(0), 2.0, 1e-9);
  EXPECT_LE(sol.grad_norm, 1e-10);
  EXPECT_FALSE(sol.on_boundary);
}

TEST(SolveErmTest, DegenerateZeroRow) {
  RegressionDataset data;
  data.features = Matrix::Zero(1, 2);
  data.targets = Vector::Constant(1, 7.0);
  const ParamDomain domain = ParamDomain::box(Vector::Constant(2, 1.0), Vector::Constant(2, 3.0));
  const ErmSolution sol = solve_erm(RobustLoss{1.0}, data, domain);
  EXPECT_NEAR((sol.theta - Vector::Constant(2, 2.0)).norm(), 0.0, 0.0);
  EXPECT_EQ(sol.grad_norm, 0.0);
}

TEST(SolveErmTest, MinimalityOnRandomInstances) {
  SeededRng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + rep % 3;
    const RegressionDataset data = random_instance(50, d, rng);
    const RobustLoss loss{rep % 2 == 0 ? 1.0 : 0.5};
    const ParamDomain domain = ParamDomain::box(Vector::Constant(d, -10), Vector::Constant(d, 10));
    const ErmSolution sol = solve_erm(loss, data, domain);
    EXPECT_LE(sol.grad_norm, 1e-10);
    for (int j = 0; j < d; ++j) {
      for (double s : {-0.1, 0.1}) {
        Vector t = sol.theta;
        t(j) += s;
        EXPECT_LE(sol.value, loss_value(loss, t, data));
      }
    }
    EXPECT_GT(sol.lambda_min, 0.0);
  }
}

TEST(SolveErmTest, BoundaryMinimizerIsFlagged) {
  RegressionDataset data;
  data.features = Matrix::Constant(3, 1, 1.0);
  data.targets = Vector::Constant(3, 5.0);
  const ParamDomain domain = ParamDomain::box(vec1(-1), vec1(1));
  const ErmSolution sol = solve_erm(RobustLoss{1.0}, data, domain);
  EXPECT_NEAR(sol.theta(0), 1.0, 1e-12);
  EXPECT_TRUE(sol.on_boundary);
}

TEST(UserAdditionLenTest, ZeroAtMinimizer) {
  SeededRng rng(24);
  const RegressionDataset data = random_instance(40, 2, rng);
  const RobustLoss loss{1.0};
  const ParamDomain domain = ParamDomain::box(Vector::Constant(2, -10), Vector::Constant(2, 10));
  const ErmSolution sol = solve_erm(loss, data, domain);
  EXPECT_EQ(user_addition_len(data, sol.theta, loss), 0);
  EXPECT_EQ(target_log_density(data, sol.theta, 0.5, loss, domain), 0.0);
}

TEST(UserAdditionLenTest, QuarterGradientGivesThree) {
  // Ten rows x = 1, theta = 0 and residual r with tanh(r / 2) = 1/4: the
  // gradient of L_n is exactly 0.25, so n ||grad|| / Bx = 2.5.
  const double r = 2.0 * std::atanh(0.25);
  RegressionDataset data;
  data.features = Matrix::Constant(10, 1, 1.0);
  data.targets = Vector::Constant(10, -r);
  data.norm_bound = 1.0;
  const RobustLoss loss{1.0};
  EXPECT_NEAR(loss_eval(loss, vec1(0.0), data).gradient(0), 0.25, 1e-15);
  EXPECT_EQ(user_addition_len(data, vec1(0.0), loss), 3);
}

TEST(UserAdditionLenTest, ConstructiveOracleInOneDimension) {
  SeededRng rng(25);
  const RobustLoss loss{1.0};
  for (int rep = 0; rep < 50; ++rep) {
    const RegressionDataset data = random_instance(20, 1, rng, 2.0);
    const Vector theta = vec1(rng.uniform(-3.0, 3.0));
    const std::int64_t k = user_addition_len(data, theta, loss);
    if (k == 0) continue;
    const double g = loss_gradient_sum(loss, theta, data)(0);
    const double bx = data.norm_bound;
    // k rows at x' = -Bx sign(g), each with h' = |g| / (k Bx) < 1.
    const double xp = g > 0 ? -bx : bx;
    const double target_slope = std::abs(g) / (static_cast<double>(k) * bx);
    ASSERT_LT(target_slope, 1.0);
    const double residual = 2.0 * loss.alpha * std::atanh(target_slope);
    RegressionDataset grown = data;
    for (std::int64_t i = 0; i < k; ++i) grown = grown.with_row(vec1(xp), theta(0) * xp - residual);
    EXPECT_NEAR(loss_gradient_sum(loss, theta, grown)(0), 0.0, 1e-9);
    // k - 1 rows contribute at most (k - 1) Bx, which is not enough.
    EXPECT_GT(std::abs(g), static_cast<double>(k - 1) * bx);
  }
}

TEST(UserAdditionLenTest, LipschitzUnderAddedRow) {
  SeededRng rng(26);
  const RobustLoss loss{1.0};
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 1 + rep % 2;
    const RegressionDataset data = random_instance(15, d, rng, 3.0);
    Vector theta(d), x(d);
    for (int j = 0; j < d; ++j) {
      theta(j) = rng.uniform(-2.0, 2.0);
      x(j) = rng.uniform(-1.0, 1.0);
    }
    if (x.norm() > 1.0) x /= x.norm();
    const RegressionDataset grown = data.with_row(x, rng.uniform(-10.0, 10.0));
    const auto a = user_addition_len(data, theta, loss);
    const auto b = user_addition_len(grown, theta, loss);
    ASSERT_LE(std::abs(a - b), 1);
  }
}

TEST(TargetLogDensityTest, StepsInHalfEpsilonAndMonotone) {
  SeededRng rng(27);
  const RegressionDataset data = random_instance(30, 2, rng);
  const RobustLoss loss{1.0};
  const ParamDomain domain = ParamDomain::ball(Vector::Zero(2), 5.0);
  const double eps = 0.8;
  std::vector<std::pair<double, double>> seen;
  for (int i = 0; i < 300; ++i) {
    const Vector theta = domain.sample_uniform(rng);
    const double lp = target_log_density(data, theta, eps, loss, domain);
    const double k = lp / (-eps / 2.0);
    ASSERT_NEAR(k, std::round(k), 1e-9);
    seen.emplace_back(loss_gradient_sum(loss, theta, data).norm(), lp);
  }
  for (const auto& [g1, l1] : seen) {
    for (const auto& [g2, l2] : seen) {
      if (g1 <= g2) ASSERT_GE(l1, l2);
    }
  }
  EXPECT_EQ(target_log_density(data, Vector::Constant(2, 6.0), eps, loss, domain),
            -std::numeric_limits<double>::infinity());
}

TEST(OneDimLengthIndexTest, MatchesDirectLength) {
  SeededRng rng(28);
  const RobustLoss loss{1.0};
  const RegressionDataset data = random_instance(200, 1, rng);
  const OneDimLengthIndex index(data, loss, -4.0, 4.0);
  for (int i = 0; i < 5000; ++i) {
    const double t = rng.uniform(-4.0, 4.0);
    ASSERT_EQ(index.length(t), user_addition_len(data, vec1(t), loss)) << t;
  }
  const auto bp = index.breakpoints();
  EXPECT_EQ(bp.front(), -4.0);
  EXPECT_EQ(bp.back(), 4.0);
  // Integral against a fine midpoint rule.
  const double eps = 0.3;
  const int cells = 200000;
  double riemann = 0.0;
  for (int i = 0; i < cells; ++i) {
    const double t = -1.0 + (i + 0.5) * 3.0 / cells;
    riemann += std::exp(-eps / 2.0 * static_cast<double>(index.length(t)));
  }
  riemann *= 3.0 / cells;
  EXPECT_NEAR(index.integrate(-1.0, 2.0, eps), riemann, 1e-3);
}

}  // namespace
}  // namespace ism
