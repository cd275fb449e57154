#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "ism/rng.hpp"

namespace ism {

enum class NeighborMode { Substitution, UserAddition };

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 0.0;
  NeighborMode neighbor_mode = NeighborMode::Substitution;

  // Throws std::invalid_argument unless epsilon > 0 and delta in [0, 1).
  void validate() const;
  // As validate(), and additionally requires delta == 0.
  void validate_pure() const;
};

struct Dataset1D {
  std::vector<double> values;
  double range_low = 0.0;
  double range_high = 1.0;

  void validate() const;
  // Copy with every value clamped into [range_low, range_high].
  Dataset1D clamped() const;
  std::size_t size() const { return values.size(); }
};

// Inverse CDF of the standard Laplace law at u in (0, 1).
double laplace_inverse_cdf(double u);
double laplace_log_density(double x, double center, double scale);

double sample_laplace(SeededRng& rng);
// Gamma(shape_d, 1) as a sum of shape_d unit exponentials.
double sample_gamma_radius(int shape_d, SeededRng& rng);
std::vector<double> sample_unit_sphere(int dim, SeededRng& rng);

// value + (GS / epsilon) * Lap(1). A zero sensitivity releases the value.
double laplace_mechanism(double value, double global_sensitivity,
                         double epsilon, SeededRng& rng);
// value + (2 S / epsilon) * Lap(1).
double smooth_laplace_mechanism(double value, double smooth_bound,
                                double epsilon, SeededRng& rng);

// Probabilities proportional to exp(-score * epsilon / 2). Scores are shifted
// by their minimum before exponentiation; +inf scores get probability zero.
std::vector<double> exponential_probabilities(std::span<const double> scores,
                                              double epsilon);

// Precomputed sampler over indices of a finite score vector.
class ExponentialSampler {
 public:
  ExponentialSampler(std::span<const double> scores, double epsilon);

  std::size_t sample(SeededRng& rng) const;
  const std::vector<double>& probabilities() const { return probs_; }

 private:
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

template <typename Target>
Target exponential_mechanism_finite(const std::map<Target, double>& scores,
                                    double epsilon, SeededRng& rng) {
  if (scores.empty()) {
    throw std::invalid_argument("exponential mechanism: empty score map");
  }
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& [target, score] : scores) values.push_back(score);
  const std::size_t index = ExponentialSampler(values, epsilon).sample(rng);
  auto it = scores.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(index));
  return it->first;
}

}  // namespace ism
