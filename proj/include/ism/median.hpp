#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ism/core.hpp"
#include "ism/invsens.hpp"

namespace ism {

struct MedianConfig {
  double range_low = 0.0;
  double range_high = 1.0;  // R
  // Smoothing radius; unset means 1/n.
  std::optional<double> rho;
  // 0 selects the Lebesgue (continuous) output measure; K >= 2 restricts
  // outputs to K equi-spaced points of [range_low, range_high].
  std::size_t grid_points = 0;

  double rho_for(std::size_t n) const;
  void validate(std::size_t n) const;
};

// Rank (1-based) of the released order statistic: ceil(n / 2), i.e. the
// lower median for even n.
std::size_t median_rank(std::size_t n);

double median(std::span<const double> values);
double median(const Dataset1D& dataset);

// Exact inverse sensitivity of the (lower) median at target t:
//   max(0, #{x_i < t} - (j - 1), j - #{x_i <= t}),  j = median_rank(n).
// For data without ties this is the count of points in (t, m] or [m, t).
std::size_t median_len(std::span<const double> values, double t);
// Same, for values already sorted ascending.
std::size_t median_len_sorted(std::span<const double> sorted, double t);

// Slice partition of [range_low, range_high] by the rho-smoothed median
// length. Values are clamped into the range first. O(n log n).
SliceProfile build_median_slices(std::span<const double> values,
                                 const MedianConfig& config);

double median_mechanism(std::span<const double> values, double epsilon,
                        const MedianConfig& config, SeededRng& rng);

// Normalized output density of median_mechanism (probability of grid point t
// for a grid configuration). Throws std::out_of_range outside the range.
double median_density(std::span<const double> values, double epsilon,
                      const MedianConfig& config, double t);
double median_log_density(std::span<const double> values, double epsilon,
                          const MedianConfig& config, double t);

// max(x_(j+1) - x_(j), x_(j) - x_(j-1)) with x_(0) = range_low and
// x_(n+1) = range_high.
double local_sensitivity_median(std::span<const double> values,
                                double range_low, double range_high);

// Smooth sensitivity of the median:
//   S(x) = max_k exp(-k beta) max_{0<=t<=k+1} (x_(j+t) - x_(j+t-k-1)),
// order statistics outside 1..n clamped to range_low / range_high.
double smooth_sensitivity_median(std::span<const double> values, double beta,
                                 double range_low, double range_high);

// beta = epsilon / (2 log(2 / delta)).
double smooth_laplace_beta(double epsilon, double delta);

// median(x) + (2 S(x) / epsilon) Lap(1) with beta from (epsilon, delta).
double smooth_laplace_median(std::span<const double> values, double epsilon,
                             double delta, double range_low, double range_high,
                             SeededRng& rng);

// delta = n^-1.1 and rho = 1/n, the experiment defaults.
double default_median_delta(std::size_t n);

// Tail bound on P(|M(x) - median(x)| > 2u + rho) for x_i iid with density at
// least p_min within 2 gamma of the population median.
double median_tail_bound(std::size_t n, double epsilon, double u, double gamma,
                         double rho, double range_width, double p_min);

}  // namespace ism
