#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "ism/core.hpp"
#include "ism/finite.hpp"

namespace ism {

inline constexpr double kDefaultTargetTolerance = 1e-9;

// len_f(x; t): fewest substitutions turning `dataset` into some x' with
// |f(x') - target| <= tol. Breadth-first over Hamming shells; infinite when
// no dataset over the alphabet reaches the target.
Length inverse_sensitivity_bruteforce(const FiniteProblem& problem,
                                      std::span<const double> dataset,
                                      double target,
                                      double tol = kDefaultTargetTolerance);

// Same quantity by scanning all of alphabet^n. Independent of the shell walk
// above; used as a cross-check.
Length inverse_sensitivity_exhaustive(const FiniteProblem& problem,
                                      std::span<const double> dataset,
                                      double target,
                                      double tol = kDefaultTargetTolerance);

using LengthFn = std::function<Length(double)>;

// min of len_fn over [t - rho, t + rho]. The probe set (grid points inside the
// ball, the ball endpoints, t itself, and midpoints between consecutive
// probes) is exact when probe_grid lists every breakpoint of a piecewise
// constant len_fn.
Length smooth_inverse_sensitivity(const LengthFn& len_fn, double target,
                                  double rho,
                                  std::span<const double> probe_grid);

// omega_f(x; k) = max |f(x') - f(x)| over d_ham(x, x') <= k.
double modulus_bruteforce(const FiniteProblem& problem,
                          std::span<const double> dataset, std::size_t k);

using LengthMap = std::map<double, Length>;

// Discrete inverse-sensitivity mechanism: P(t) proportional to
// exp(-len(t) * epsilon / 2). Infinite lengths are never selected.
double discrete_mechanism(const LengthMap& lengths, double epsilon,
                          SeededRng& rng);

// Output probabilities of discrete_mechanism, in map order.
std::vector<double> discrete_mechanism_probabilities(const LengthMap& lengths,
                                                     double epsilon);

// P(M(x) = f(x)) = 1 / sum_t exp(-len(t) * epsilon / 2).
double prob_correct(const LengthMap& lengths, double epsilon);

// Half-open interval [low, high).
struct Interval {
  double low = 0.0;
  double high = 0.0;

  double length() const { return high - low; }
  bool contains(double t) const { return low <= t && t < high; }
};

struct Slice {
  std::int64_t k = 0;
  std::vector<Interval> regions;

  double measure() const;
};

// Partition of [range_low, range_high] into slices of equal (smoothed)
// inverse sensitivity. grid_points == 0 selects Lebesgue base measure;
// otherwise the base measure counts the grid_points equi-spaced points
// range_low + i * (range_high - range_low) / (grid_points - 1).
struct SliceProfile {
  std::vector<Slice> slices;
  double rho = 0.0;
  double range_low = 0.0;
  double range_high = 1.0;
  std::size_t grid_points = 0;

  // Checks that regions are nonempty, inside the range, pairwise disjoint and
  // cover it. Throws std::invalid_argument otherwise.
  void validate(double tol = 1e-9) const;

  bool uses_grid() const { return grid_points != 0; }
  double grid_point(std::size_t i) const;
  // Number of grid points inside `region`; an interval ending at range_high
  // also owns the last grid point.
  std::size_t grid_count(const Interval& region) const;

  // Base-measure mass of each slice (length or grid count).
  std::vector<double> slice_masses() const;

  // Smoothed length of the region containing t (t in [range_low,
  // range_high]); the right end of the range belongs to the region ending
  // there. Throws std::out_of_range outside the range.
  std::int64_t length_at(double t) const;

  // Sorted region endpoints.
  std::vector<double> breakpoints() const;
};

// Generic slice sampler: pick slice k with probability proportional to
// exp(-k * epsilon / 2) * |I_k|, then draw uniformly inside I_k.
double continuous_mechanism(const SliceProfile& profile, double epsilon,
                            SeededRng& rng);

// Normalized log density of continuous_mechanism at t: with respect to
// Lebesgue measure, or the log probability of grid point t for a grid
// profile. -inf when t carries no mass.
double profile_log_density(const SliceProfile& profile, double epsilon,
                           double t);

// Probability that continuous_mechanism lands in each slice.
std::vector<double> slice_probabilities(const SliceProfile& profile,
                                        double epsilon);

// True iff len_f(x; .) is nondecreasing moving away from f(x) on both sides
// of the target grid (brute-force lengths).
bool check_sample_monotone(const FiniteProblem& problem,
                           std::span<const double> dataset,
                           std::span<const double> target_grid,
                           double tol = kDefaultTargetTolerance);

}  // namespace ism
