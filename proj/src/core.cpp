#include "ism/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ism {

void PrivacyBudget::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("privacy budget: epsilon must be positive");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("privacy budget: delta must lie in [0, 1)");
  }
}

void PrivacyBudget::validate_pure() const {
  validate();
  if (delta != 0.0) {
    throw std::invalid_argument("privacy budget: pure DP requires delta = 0");
  }
}

void Dataset1D::validate() const {
  if (!(range_low <= range_high)) {
    throw std::invalid_argument("dataset: range_low exceeds range_high");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("dataset: non-finite value at index " +
                                  std::to_string(i));
    }
  }
}

Dataset1D Dataset1D::clamped() const {
  Dataset1D out = *this;
  for (double& v : out.values) v = std::clamp(v, range_low, range_high);
  return out;
}

double laplace_inverse_cdf(double u) {
  if (u < 0.5) return std::log(2.0 * u);
  return -std::log(2.0 * (1.0 - u));
}

double laplace_log_density(double x, double center, double scale) {
  return -std::abs(x - center) / scale - std::log(2.0 * scale);
}

double sample_laplace(SeededRng& rng) {
  return laplace_inverse_cdf(rng.uniform_open());
}

double sample_gamma_radius(int shape_d, SeededRng& rng) {
  if (shape_d < 1) {
    throw std::invalid_argument("gamma radius: shape must be >= 1");
  }
  double total = 0.0;
  for (int i = 0; i < shape_d; ++i) total -= std::log(rng.uniform_open());
  return total;
}

std::vector<double> sample_unit_sphere(int dim, SeededRng& rng) {
  if (dim < 1) throw std::invalid_argument("unit sphere: dim must be >= 1");
  if (dim == 1) return {rng.uniform() < 0.5 ? -1.0 : 1.0};
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& c : v) {
      c = rng.normal();
      norm2 += c * c;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& c : v) c *= inv;
  return v;
}

namespace {

void require_positive_epsilon(double epsilon, const char* who) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument(std::string(who) + ": epsilon must be positive");
  }
}

}  // namespace

double laplace_mechanism(double value, double global_sensitivity,
                         double epsilon, SeededRng& rng) {
  require_positive_epsilon(epsilon, "laplace mechanism");
  if (!(global_sensitivity >= 0.0) || !std::isfinite(global_sensitivity)) {
    throw std::invalid_argument(
        "laplace mechanism: sensitivity must be finite and nonnegative");
  }
  if (global_sensitivity == 0.0) return value;
  return value + (global_sensitivity / epsilon) * sample_laplace(rng);
}

double smooth_laplace_mechanism(double value, double smooth_bound,
                                double epsilon, SeededRng& rng) {
  require_positive_epsilon(epsilon, "smooth laplace mechanism");
  if (!(smooth_bound >= 0.0) || !std::isfinite(smooth_bound)) {
    throw std::invalid_argument(
        "smooth laplace mechanism: bound must be finite and nonnegative");
  }
  if (smooth_bound == 0.0) return value;
  return value + (2.0 * smooth_bound / epsilon) * sample_laplace(rng);
}

std::vector<double> exponential_probabilities(std::span<const double> scores,
                                              double epsilon) {
  if (scores.empty()) {
    throw std::invalid_argument("exponential mechanism: empty score set");
  }
  require_positive_epsilon(epsilon, "exponential mechanism");
  double min_score = std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("exponential mechanism: invalid score");
    }
    min_score = std::min(min_score, s);
  }
  if (!std::isfinite(min_score)) {
    throw std::invalid_argument("exponential mechanism: all scores infinite");
  }
  std::vector<double> probs(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::isfinite(scores[i])
                   ? std::exp(-(scores[i] - min_score) * epsilon / 2.0)
                   : 0.0;
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

ExponentialSampler::ExponentialSampler(std::span<const double> scores,
                                       double epsilon)
    : probs_(exponential_probabilities(scores, epsilon)),
      cumulative_(probs_.size()) {
  std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

std::size_t ExponentialSampler::sample(SeededRng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t index = static_cast<std::size_t>(it - cumulative_.begin());
  if (index >= probs_.size()) index = probs_.size() - 1;
  // Skip zero-probability entries that share a cumulative value.
  while (probs_[index] == 0.0 && index > 0) --index;
  return index;
}

}  // namespace ism
