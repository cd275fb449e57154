#pragma once

#include <cstdint>

#include "ism/regression.hpp"
#include "ism/rng.hpp"

namespace ism {

struct SgdParams {
  double sample_rate = 0.01;  // q
  double sigma = 2.0;
  std::int64_t steps = 100;   // T
  double eta0 = 1.0;
  double clip_bound = 1.0;    // L
};

// theta_{t+1} = theta_t - (eta_t / |S|) (sum_{i in S} grad h + N(0, sigma^2
// L^2 I)), eta_t = eta0 / sqrt(t), S a Bernoulli(q) subsample. Steps with an
// empty subsample are skipped. Per-example gradients are clipped to norm L.
Vector private_sgd(const RobustLoss& loss, const RegressionDataset& data,
                   const SgdParams& params, const Vector& theta0,
                   SeededRng& rng);

// Standard normal CDF.
double normal_cdf(double x);

// Exact privacy profile of the Gaussian mechanism with noise multiplier
// sigma (noise std / sensitivity):
//   delta(eps) = Phi(1/(2 sigma) - eps sigma) - e^eps Phi(-1/(2 sigma) - eps sigma).
double gaussian_delta(double sigma, double epsilon);
// Smallest eps with gaussian_delta(sigma, eps) <= delta.
double gaussian_epsilon(double sigma, double delta);

// Conservative (eps, delta) accountant for T subsampled Gaussian steps.
// Half of delta goes to advanced composition, the other half is spread over
// the steps; each step is amplified by subsampling,
//   eps_step = log(1 + q (e^{eps0} - 1)),  delta_step = q delta0,
// and the result is the smaller of advanced and basic composition.
double sgd_privacy_accountant(double sample_rate, double sigma,
                              std::int64_t steps, double delta);

// Largest T <= cap with sgd_privacy_accountant(...) <= target; 0 when even a
// single step is too expensive.
std::int64_t max_sgd_steps(double sample_rate, double sigma, double delta,
                           double target_epsilon, std::int64_t cap);

}  // namespace ism
