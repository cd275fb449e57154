#include "ism/median.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace ism {

double MedianConfig::rho_for(std::size_t n) const {
  if (rho) return *rho;
  return n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
}

void MedianConfig::validate(std::size_t n) const {
  if (!(range_high > range_low)) {
    throw std::invalid_argument("median config: range must have positive width");
  }
  const double r = rho_for(n);
  if (!(r >= 0.0) || !(r < range_high - range_low)) {
    throw std::invalid_argument("median config: rho must lie in [0, R)");
  }
  if (grid_points == 1) {
    throw std::invalid_argument("median config: grid needs K >= 2 points");
  }
}

std::size_t median_rank(std::size_t n) { return (n + 1) / 2; }

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty dataset");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t j = median_rank(v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(j - 1),
                   v.end());
  return v[j - 1];
}

double median(const Dataset1D& dataset) { return median(dataset.values); }

std::size_t median_len_sorted(std::span<const double> sorted, double t) {
  if (sorted.empty()) throw std::invalid_argument("median_len: empty dataset");
  const auto j = static_cast<std::int64_t>(median_rank(sorted.size()));
  const auto below = static_cast<std::int64_t>(
      std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  const auto at_or_below = static_cast<std::int64_t>(
      std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  const std::int64_t len =
      std::max<std::int64_t>({0, below - (j - 1), j - at_or_below});
  return static_cast<std::size_t>(len);
}

std::size_t median_len(std::span<const double> values, double t) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return median_len_sorted(sorted, t);
}

namespace {

std::vector<double> sorted_clamped(std::span<const double> values, double lo,
                                   double hi) {
  std::vector<double> v(values.begin(), values.end());
  for (double& x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("median: non-finite value in dataset");
    }
    x = std::clamp(x, lo, hi);
  }
  std::sort(v.begin(), v.end());
  return v;
}

void add_region(std::map<std::int64_t, std::vector<Interval>>& by_k,
                std::int64_t k, double low, double high) {
  if (!(low < high)) return;
  auto& regions = by_k[k];
  if (!regions.empty() && regions.back().high == low) {
    regions.back().high = high;
  } else {
    regions.push_back({low, high});
  }
}

}  // namespace

SliceProfile build_median_slices(std::span<const double> values,
                                 const MedianConfig& config) {
  if (values.empty()) throw std::invalid_argument("median: empty dataset");
  config.validate(values.size());
  const double lo = config.range_low;
  const double hi = config.range_high;
  const double rho = config.rho_for(values.size());
  const std::vector<double> x = sorted_clamped(values, lo, hi);
  const auto n = static_cast<std::int64_t>(x.size());
  const auto j = static_cast<std::int64_t>(median_rank(x.size()));
  const double m = x[static_cast<std::size_t>(j - 1)];

  // Distinct values with counts of points at or below each.
  std::vector<double> distinct;
  std::vector<std::int64_t> at_or_below;
  for (std::int64_t i = 0; i < n; ++i) {
    if (distinct.empty() || x[static_cast<std::size_t>(i)] != distinct.back()) {
      distinct.push_back(x[static_cast<std::size_t>(i)]);
      at_or_below.push_back(0);
    }
    at_or_below.back() = i + 1;
  }

  std::map<std::int64_t, std::vector<Interval>> by_k;
  const auto clip = [&](double a) { return std::clamp(a, lo, hi); };

  // Left of the median: on [v_a, v_{a+1}) the length is j - #{x <= v_a};
  // smoothing moves each piece left by rho.
  {
    double start = lo;
    std::int64_t count = 0;
    for (std::size_t a = 0; a < distinct.size() && distinct[a] <= m; ++a) {
      add_region(by_k, j - count, clip(start - rho), clip(distinct[a] - rho));
      start = distinct[a];
      count = at_or_below[a];
    }
  }
  // The zero region around the median.
  add_region(by_k, 0, clip(m - rho), clip(m + rho));
  // Right of the median: on [v_a, v_{a+1}) with v_a >= m the length is
  // #{x <= v_a} - j + 1; smoothing moves each piece right by rho.
  {
    for (std::size_t a = 0; a < distinct.size(); ++a) {
      if (distinct[a] < m) continue;
      const double end = a + 1 < distinct.size() ? distinct[a + 1] : hi;
      add_region(by_k, at_or_below[a] - j + 1, clip(distinct[a] + rho),
                 clip(end + rho));
    }
  }

  SliceProfile profile;
  profile.rho = rho;
  profile.range_low = lo;
  profile.range_high = hi;
  profile.grid_points = config.grid_points;
  for (auto& [k, regions] : by_k) {
    if (!regions.empty()) profile.slices.push_back({k, std::move(regions)});
  }
  return profile;
}

double median_mechanism(std::span<const double> values, double epsilon,
                        const MedianConfig& config, SeededRng& rng) {
  return continuous_mechanism(build_median_slices(values, config), epsilon,
                              rng);
}

double median_log_density(std::span<const double> values, double epsilon,
                          const MedianConfig& config, double t) {
  return profile_log_density(build_median_slices(values, config), epsilon, t);
}

double median_density(std::span<const double> values, double epsilon,
                      const MedianConfig& config, double t) {
  return std::exp(median_log_density(values, epsilon, config, t));
}

namespace {

// 1-based order statistic with the boundary convention.
double order_stat(const std::vector<double>& x, std::int64_t i, double lo,
                  double hi) {
  if (i < 1) return lo;
  if (i > static_cast<std::int64_t>(x.size())) return hi;
  return x[static_cast<std::size_t>(i - 1)];
}

}  // namespace

double local_sensitivity_median(std::span<const double> values,
                                double range_low, double range_high) {
  return smooth_sensitivity_median(values, std::numeric_limits<double>::infinity(),
                                   range_low, range_high);
}

double smooth_sensitivity_median(std::span<const double> values, double beta,
                                 double range_low, double range_high) {
  if (values.empty()) throw std::invalid_argument("median: empty dataset");
  if (!(beta > 0.0)) {
    throw std::invalid_argument("smooth sensitivity: beta must be positive");
  }
  const std::vector<double> x = sorted_clamped(values, range_low, range_high);
  const auto n = static_cast<std::int64_t>(x.size());
  const auto j = static_cast<std::int64_t>(median_rank(x.size()));
  const double width = range_high - range_low;
  double best = 0.0;
  for (std::int64_t k = 0; k <= n + 1; ++k) {
    const double decay =
        std::isinf(beta) ? (k == 0 ? 1.0 : 0.0)
                         : std::exp(-static_cast<double>(k) * beta);
    if (decay * width <= best || decay == 0.0) break;
    double gap = 0.0;
    for (std::int64_t t = 0; t <= k + 1; ++t) {
      gap = std::max(gap, order_stat(x, j + t, range_low, range_high) -
                              order_stat(x, j + t - k - 1, range_low, range_high));
    }
    best = std::max(best, decay * gap);
  }
  return best;
}

double smooth_laplace_beta(double epsilon, double delta) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("smooth laplace: epsilon must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("smooth laplace: delta must lie in (0, 1)");
  }
  return epsilon / (2.0 * std::log(2.0 / delta));
}

double smooth_laplace_median(std::span<const double> values, double epsilon,
                             double delta, double range_low, double range_high,
                             SeededRng& rng) {
  const double beta = smooth_laplace_beta(epsilon, delta);
  const double s =
      smooth_sensitivity_median(values, beta, range_low, range_high);
  return smooth_laplace_mechanism(median(values), s, epsilon, rng);
}

double default_median_delta(std::size_t n) {
  return std::pow(static_cast<double>(n), -1.1);
}

double median_tail_bound(std::size_t n, double epsilon, double u, double gamma,
                         double rho, double range_width, double p_min) {
  if (!(u > 0.0) || !(gamma > 0.0) || !(rho > 0.0) || u > gamma / 4.0) {
    throw std::invalid_argument(
        "median tail bound: need rho > 0 and 0 < u <= gamma / 4");
  }
  const double nn = static_cast<double>(n);
  return range_width / rho * std::exp(-nn * p_min * u * epsilon / 4.0) +
         4.0 * std::exp(-nn * gamma * gamma * p_min * p_min / 4.0) +
         2.0 * gamma / u * std::exp(-nn * p_min * u / 8.0);
}

}  // namespace ism
