#include "ism/invsens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ism {

Length inverse_sensitivity_bruteforce(const FiniteProblem& problem,
                                      std::span<const double> dataset,
                                      double target, double tol) {
  problem.validate();
  const std::size_t n = dataset.size();
  for (std::size_t k = 0; k <= n; ++k) {
    const bool hit = for_each_at_distance(
        dataset, problem.alphabet, k, [&](std::span<const double> candidate) {
          return std::abs(problem.evaluate(candidate) - target) <= tol;
        });
    if (hit) return Length{static_cast<std::int64_t>(k)};
  }
  return Length::infinite();
}

Length inverse_sensitivity_exhaustive(const FiniteProblem& problem,
                                      std::span<const double> dataset,
                                      double target, double tol) {
  problem.validate();
  Length best = Length::infinite();
  for_each_dataset(problem.alphabet, dataset.size(),
                   [&](std::span<const double> candidate) {
                     if (std::abs(problem.evaluate(candidate) - target) > tol) {
                       return;
                     }
                     std::int64_t distance = 0;
                     for (std::size_t i = 0; i < dataset.size(); ++i) {
                       distance += candidate[i] != dataset[i];
                     }
                     best = std::min(best, Length{distance});
                   });
  return best;
}

Length smooth_inverse_sensitivity(const LengthFn& len_fn, double target,
                                  double rho,
                                  std::span<const double> probe_grid) {
  if (probe_grid.empty()) {
    throw std::invalid_argument("smooth inverse sensitivity: empty probe set");
  }
  if (!(rho >= 0.0)) {
    throw std::invalid_argument("smooth inverse sensitivity: rho must be >= 0");
  }
  if (rho == 0.0) return len_fn(target);
  std::vector<double> probes{target - rho, target, target + rho};
  for (double g : probe_grid) {
    if (std::abs(g - target) <= rho) probes.push_back(g);
  }
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
  Length best = Length::infinite();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    best = std::min(best, len_fn(probes[i]));
    if (i + 1 < probes.size()) {
      best = std::min(best, len_fn(0.5 * (probes[i] + probes[i + 1])));
    }
  }
  return best;
}

double modulus_bruteforce(const FiniteProblem& problem,
                          std::span<const double> dataset, std::size_t k) {
  problem.validate();
  const double base = problem.evaluate(dataset);
  double worst = 0.0;
  for (std::size_t j = 1; j <= std::min(k, dataset.size()); ++j) {
    for_each_at_distance(dataset, problem.alphabet, j,
                         [&](std::span<const double> candidate) {
                           worst = std::max(
                               worst, std::abs(problem.evaluate(candidate) - base));
                           return false;
                         });
  }
  return worst;
}

namespace {

std::vector<double> length_scores(const LengthMap& lengths) {
  if (lengths.empty()) {
    throw std::invalid_argument("discrete mechanism: empty length map");
  }
  std::vector<double> scores;
  scores.reserve(lengths.size());
  bool has_zero = false;
  for (const auto& [target, len] : lengths) {
    if (len.is_finite() && len.value < 0) {
      throw std::invalid_argument("discrete mechanism: negative length");
    }
    has_zero = has_zero || len.value == 0;
    scores.push_back(len.as_double());
  }
  if (!has_zero) {
    throw std::invalid_argument(
        "discrete mechanism: no target with length 0 (f(x) missing)");
  }
  return scores;
}

}  // namespace

std::vector<double> discrete_mechanism_probabilities(const LengthMap& lengths,
                                                     double epsilon) {
  return exponential_probabilities(length_scores(lengths), epsilon);
}

double discrete_mechanism(const LengthMap& lengths, double epsilon,
                          SeededRng& rng) {
  const ExponentialSampler sampler(length_scores(lengths), epsilon);
  auto it = lengths.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(sampler.sample(rng)));
  return it->first;
}

double prob_correct(const LengthMap& lengths, double epsilon) {
  const std::vector<double> scores = length_scores(lengths);
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("prob_correct: epsilon must be positive");
  }
  double total = 0.0;
  for (double s : scores) {
    if (std::isfinite(s)) total += std::exp(-s * epsilon / 2.0);
  }
  return 1.0 / total;
}

double Slice::measure() const {
  double total = 0.0;
  for (const Interval& r : regions) total += r.length();
  return total;
}

void SliceProfile::validate(double tol) const {
  if (!(range_low < range_high)) {
    throw std::invalid_argument("slice profile: empty range");
  }
  if (grid_points == 1) {
    throw std::invalid_argument("slice profile: grid needs at least 2 points");
  }
  std::vector<Interval> all;
  for (const Slice& s : slices) {
    if (s.k < 0) throw std::invalid_argument("slice profile: negative k");
    for (const Interval& r : s.regions) {
      if (!(r.low < r.high)) {
        throw std::invalid_argument("slice profile: empty region");
      }
      if (r.low < range_low - tol || r.high > range_high + tol) {
        throw std::invalid_argument("slice profile: region outside range");
      }
      all.push_back(r);
    }
  }
  if (all.empty()) throw std::invalid_argument("slice profile: no regions");
  std::sort(all.begin(), all.end(),
            [](const Interval& a, const Interval& b) { return a.low < b.low; });
  if (std::abs(all.front().low - range_low) > tol ||
      std::abs(all.back().high - range_high) > tol) {
    throw std::invalid_argument("slice profile: regions do not cover range");
  }
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (std::abs(all[i].low - all[i - 1].high) > tol) {
      throw std::invalid_argument(
          "slice profile: regions overlap or leave a gap");
    }
  }
}

double SliceProfile::grid_point(std::size_t i) const {
  if (i + 1 >= grid_points) return range_high;
  const double step =
      (range_high - range_low) / static_cast<double>(grid_points - 1);
  return range_low + static_cast<double>(i) * step;
}

std::size_t SliceProfile::grid_count(const Interval& region) const {
  if (!uses_grid()) return 0;
  const double step =
      (range_high - range_low) / static_cast<double>(grid_points - 1);
  const auto first_at_or_after = [&](double x) -> std::size_t {
    if (x <= range_low) return 0;
    double guess = std::ceil((x - range_low) / step);
    auto i = static_cast<std::size_t>(std::max(0.0, guess));
    while (i > 0 && grid_point(i - 1) >= x) --i;
    while (i < grid_points && grid_point(i) < x) ++i;
    return i;
  };
  const std::size_t begin = first_at_or_after(region.low);
  std::size_t end = first_at_or_after(region.high);
  if (region.high >= range_high) end = grid_points;
  return end > begin ? end - begin : 0;
}

std::vector<double> SliceProfile::slice_masses() const {
  std::vector<double> masses;
  masses.reserve(slices.size());
  for (const Slice& s : slices) {
    if (uses_grid()) {
      std::size_t count = 0;
      for (const Interval& r : s.regions) count += grid_count(r);
      masses.push_back(static_cast<double>(count));
    } else {
      masses.push_back(s.measure());
    }
  }
  return masses;
}

std::int64_t SliceProfile::length_at(double t) const {
  if (t < range_low || t > range_high) {
    throw std::out_of_range("slice profile: point outside the output range");
  }
  for (const Slice& s : slices) {
    for (const Interval& r : s.regions) {
      if (r.contains(t) || (t == range_high && r.high == range_high)) {
        return s.k;
      }
    }
  }
  // Floating slack at region seams: fall back to the nearest region.
  double best_gap = std::numeric_limits<double>::infinity();
  std::int64_t best_k = 0;
  for (const Slice& s : slices) {
    for (const Interval& r : s.regions) {
      const double gap = t < r.low ? r.low - t : t - r.high;
      if (gap < best_gap) {
        best_gap = gap;
        best_k = s.k;
      }
    }
  }
  return best_k;
}

std::vector<double> SliceProfile::breakpoints() const {
  std::vector<double> points;
  for (const Slice& s : slices) {
    for (const Interval& r : s.regions) {
      points.push_back(r.low);
      points.push_back(r.high);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

namespace {

struct WeightedSlices {
  std::vector<double> weights;  // exp(-(k - k0) eps / 2) * mass
  std::int64_t k0 = 0;          // smallest k carrying mass
  double total = 0.0;
};

WeightedSlices weigh_slices(const SliceProfile& profile, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("continuous mechanism: epsilon must be > 0");
  }
  const std::vector<double> masses = profile.slice_masses();
  std::int64_t k0 = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (masses[i] > 0.0) k0 = std::min(k0, profile.slices[i].k);
  }
  if (k0 == std::numeric_limits<std::int64_t>::max()) {
    throw std::invalid_argument("continuous mechanism: all slice masses zero");
  }
  WeightedSlices out;
  out.k0 = k0;
  out.weights.resize(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const double shift = static_cast<double>(profile.slices[i].k - k0);
    out.weights[i] = masses[i] > 0.0 ? std::exp(-shift * epsilon / 2.0) * masses[i]
                                     : 0.0;
    out.total += out.weights[i];
  }
  return out;
}

std::size_t pick_weighted(std::span<const double> weights, double total,
                          SeededRng& rng) {
  double u = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last_positive;
}

}  // namespace

std::vector<double> slice_probabilities(const SliceProfile& profile,
                                        double epsilon) {
  WeightedSlices ws = weigh_slices(profile, epsilon);
  for (double& w : ws.weights) w /= ws.total;
  return ws.weights;
}

double continuous_mechanism(const SliceProfile& profile, double epsilon,
                            SeededRng& rng) {
  const WeightedSlices ws = weigh_slices(profile, epsilon);
  const Slice& slice =
      profile.slices[pick_weighted(ws.weights, ws.total, rng)];

  std::vector<double> region_mass;
  region_mass.reserve(slice.regions.size());
  double total = 0.0;
  for (const Interval& r : slice.regions) {
    const double m = profile.uses_grid()
                         ? static_cast<double>(profile.grid_count(r))
                         : r.length();
    region_mass.push_back(m);
    total += m;
  }
  const Interval& region =
      slice.regions[pick_weighted(region_mass, total, rng)];

  if (!profile.uses_grid()) {
    return region.low + rng.uniform() * region.length();
  }
  const std::size_t count = profile.grid_count(region);
  // Index of the first grid point inside the region.
  std::size_t first = 0;
  {
    const double step = (profile.range_high - profile.range_low) /
                        static_cast<double>(profile.grid_points - 1);
    double guess = std::ceil((region.low - profile.range_low) / step);
    first = static_cast<std::size_t>(std::max(0.0, guess));
    while (first > 0 && profile.grid_point(first - 1) >= region.low) --first;
    while (first < profile.grid_points &&
           profile.grid_point(first) < region.low) {
      ++first;
    }
  }
  return profile.grid_point(first + rng.uniform_index(count));
}

double profile_log_density(const SliceProfile& profile, double epsilon,
                           double t) {
  const WeightedSlices ws = weigh_slices(profile, epsilon);
  const std::int64_t k = profile.length_at(t);
  return -static_cast<double>(k - ws.k0) * epsilon / 2.0 - std::log(ws.total);
}

bool check_sample_monotone(const FiniteProblem& problem,
                           std::span<const double> dataset,
                           std::span<const double> target_grid, double tol) {
  const double fx = problem.evaluate(dataset);
  std::vector<double> targets(target_grid.begin(), target_grid.end());
  std::sort(targets.begin(), targets.end());

  std::vector<Length> above, below;
  for (double t : targets) {
    if (t >= fx - tol) {
      above.push_back(inverse_sensitivity_bruteforce(problem, dataset, t, tol));
    }
  }
  for (auto it = targets.rbegin(); it != targets.rend(); ++it) {
    if (*it <= fx + tol) {
      below.push_back(inverse_sensitivity_bruteforce(problem, dataset, *it, tol));
    }
  }
  return std::is_sorted(above.begin(), above.end()) &&
         std::is_sorted(below.begin(), below.end());
}

}  // namespace ism
