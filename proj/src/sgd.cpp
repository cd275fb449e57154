#include "ism/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ism {

Vector private_sgd(const RobustLoss& loss, const RegressionDataset& data,
                   const SgdParams& params, const Vector& theta0,
                   SeededRng& rng) {
  loss.validate();
  if (!(params.sample_rate > 0.0 && params.sample_rate <= 1.0)) {
    throw std::invalid_argument("private sgd: sample rate must lie in (0, 1]");
  }
  if (!(params.sigma >= 0.0) || !(params.clip_bound > 0.0) ||
      params.steps < 0 || !(params.eta0 > 0.0)) {
    throw std::invalid_argument("private sgd: invalid parameters");
  }
  if (theta0.size() != data.dim()) {
    throw std::invalid_argument("private sgd: dimension mismatch");
  }
  const int d = data.dim();
  const auto n = static_cast<Eigen::Index>(data.size());
  const double noise_std = params.sigma * params.clip_bound;
  Vector theta = theta0;
  Vector sum(d);
  const double log_skip = std::log1p(-std::min(params.sample_rate, 1.0 - 1e-16));
  const auto next_member = [&](Eigen::Index i) -> Eigen::Index {
    if (params.sample_rate >= 1.0) return i + 1;
    const double gap = std::floor(std::log(rng.uniform_open()) / log_skip);
    return gap >= static_cast<double>(n) ? n
                                         : i + 1 + static_cast<Eigen::Index>(gap);
  };
  for (std::int64_t t = 1; t <= params.steps; ++t) {
    sum.setZero();
    std::int64_t batch = 0;
    // Bernoulli(q) subsample drawn through geometric gaps between members.
    for (Eigen::Index i = next_member(-1); i < n; i = next_member(i)) {
      ++batch;
      const double r = data.features.row(i).dot(theta) - data.targets(i);
      Vector g = loss.derivative(r) * data.features.row(i).transpose();
      const double norm = g.norm();
      if (norm > params.clip_bound) g *= params.clip_bound / norm;
      sum += g;
    }
    if (batch == 0) continue;
    if (noise_std > 0.0) {
      for (int k = 0; k < d; ++k) sum(k) += noise_std * rng.normal();
    }
    const double eta = params.eta0 / std::sqrt(static_cast<double>(t));
    theta -= (eta / static_cast<double>(batch)) * sum;
  }
  return theta;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double gaussian_delta(double sigma, double epsilon) {
  if (!(sigma > 0.0)) return 1.0;
  const double a = 1.0 / (2.0 * sigma);
  const double b = epsilon * sigma;
  // The second term as exp(eps + log Phi(.)) to keep it finite for large eps.
  const double tail = normal_cdf(-a - b);
  const double second = tail > 0.0 ? std::exp(epsilon + std::log(tail)) : 0.0;
  return std::max(0.0, normal_cdf(a - b) - second);
}

double gaussian_epsilon(double sigma, double delta) {
  if (!(delta > 0.0)) return std::numeric_limits<double>::infinity();
  if (!(sigma > 0.0)) return std::numeric_limits<double>::infinity();
  if (gaussian_delta(sigma, 0.0) <= delta) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (gaussian_delta(sigma, hi) > delta) {
    hi *= 2.0;
    if (hi > 1e6) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gaussian_delta(sigma, mid) > delta ? lo : hi) = mid;
  }
  return hi;
}

double sgd_privacy_accountant(double sample_rate, double sigma,
                              std::int64_t steps, double delta) {
  if (!(sample_rate > 0.0 && sample_rate <= 1.0) || !(sigma >= 0.0) ||
      steps < 0 || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("sgd accountant: invalid parameters");
  }
  if (steps == 0) return 0.0;
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  const double t = static_cast<double>(steps);
  const double delta_composition = 0.5 * delta;
  const double delta_step = 0.5 * delta / t;
  const double delta0 = std::min(delta_step / sample_rate, 0.5);
  const double eps0 = gaussian_epsilon(sigma, delta0);
  const double eps_step = std::log1p(sample_rate * std::expm1(eps0));
  const double basic = t * eps_step;
  const double advanced =
      std::sqrt(2.0 * t * std::log(1.0 / delta_composition)) * eps_step +
      t * eps_step * std::expm1(eps_step);
  return std::min(basic, advanced);
}

std::int64_t max_sgd_steps(double sample_rate, double sigma, double delta,
                           double target_epsilon, std::int64_t cap) {
  const auto fits = [&](std::int64_t t) {
    return sgd_privacy_accountant(sample_rate, sigma, t, delta) <=
           target_epsilon;
  };
  if (cap < 1 || !fits(1)) return 0;
  std::int64_t lo = 1, hi = 2;
  while (hi <= cap && fits(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi > cap) {
    if (fits(cap)) return cap;
    hi = cap;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace ism
