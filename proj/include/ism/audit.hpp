#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ism/core.hpp"
#include "ism/finite.hpp"
#include "ism/invsens.hpp"

namespace ism {

// ---- toy problems --------------------------------------------------------

// floor(sum(x) / T) for x over {0, 1}.
double f_step(std::span<const double> x, double threshold);

// Closed-form length of f_step at an integer target j for a dataset of size n
// with sum s: distance from s to the nearest integer in [jT, (j+1)T) within
// [0, n]; infinite when there is none.
Length step_len(std::int64_t sum, std::size_t n, double threshold,
                std::int64_t target);

FiniteProblem step_problem(std::size_t n, double threshold);
FiniteProblem median_problem(std::vector<double> alphabet, std::size_t n,
                             std::vector<double> target_grid);
FiniteProblem mean_problem(std::vector<double> alphabet, std::size_t n);

struct CatalogEntry {
  std::string name;
  FiniteProblem problem;
};

// Small instances of the step function, the median and the mean.
std::vector<CatalogEntry> problem_catalog();

// ---- neighbors -----------------------------------------------------------

// Substitution: all n (|A| - 1) datasets differing in one position.
// UserAddition: the |A| datasets with one element appended.
std::vector<std::vector<double>> enumerate_neighbors(
    std::span<const double> dataset, std::span<const double> alphabet,
    NeighborMode mode = NeighborMode::Substitution);

// ---- density-ratio audit -------------------------------------------------

struct Violation {
  std::size_t pair_index = 0;
  std::size_t point_index = 0;
  double log_ratio = 0.0;
};

struct AuditReport {
  std::string mechanism;
  double epsilon = 0.0;
  double max_log_ratio = 0.0;
  std::optional<Violation> violating_pair;
  std::int64_t checks_run = 0;
  bool pass = true;
};

inline constexpr double kAuditSlack = 1e-9;

// {"mechanism", "epsilon", "max_log_ratio", "pass", "checks_run"}.
std::string audit_report_json(const AuditReport& report);

// Max over pairs and grid points of |log p(x, t) - log p(x', t)| for a
// normalized log-density. Points where both sides are -inf are skipped; one
// side alone at -inf is an infinite violation. The first point exceeding
// epsilon + kAuditSlack is recorded.
template <class Data, class Point, class LogDensity>
AuditReport audit_density_ratio(LogDensity&& log_density,
                                const std::vector<std::pair<Data, Data>>& pairs,
                                const std::vector<Point>& grid, double epsilon,
                                std::string mechanism = {}) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  AuditReport report;
  report.mechanism = std::move(mechanism);
  report.epsilon = epsilon;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double a = log_density(pairs[p].first, grid[g]);
      const double b = log_density(pairs[p].second, grid[g]);
      ++report.checks_run;
      if (a == kNegInf && b == kNegInf) continue;
      const double gap = (a == kNegInf || b == kNegInf)
                             ? std::numeric_limits<double>::infinity()
                             : std::abs(a - b);
      report.max_log_ratio = std::max(report.max_log_ratio, gap);
      if (gap > epsilon + kAuditSlack && !report.violating_pair) {
        report.violating_pair = Violation{p, g, gap};
      }
    }
  }
  report.pass = !report.violating_pair.has_value();
  return report;
}

// ---- exhaustive audits ---------------------------------------------------

using DatasetLengthFn =
    std::function<Length(std::span<const double> dataset, double target)>;

// max |len(x; t) - len(x'; t)| over all substitution neighbors in
// alphabet^n and all targets.
double lipschitz_audit(const DatasetLengthFn& len_fn,
                       const FiniteProblem& problem,
                       std::span<const double> targets);

using DatasetScalarFn = std::function<double(std::span<const double>)>;

// LS(x) <= S(x) for every x, and S(x) <= e^beta S(x') for every neighbor
// pair, over alphabet^n.
bool smooth_bound_audit(const DatasetScalarFn& smooth,
                        const DatasetScalarFn& local, double beta,
                        const FiniteProblem& problem);

// LS(x) = omega_f(x; 1) by enumeration.
DatasetScalarFn bruteforce_local_sensitivity(const FiniteProblem& problem);

// ---- intervals and distances ---------------------------------------------

struct ClosedInterval {
  double low = 0.0;
  double high = 0.0;
  double width() const { return high - low; }
  bool contains(double t) const { return low <= t && t <= high; }
  // Strict containment of `inner` in the interior of this interval.
  bool strictly_contains(const ClosedInterval& inner) const {
    return low < inner.low && inner.high < high;
  }
};

// Shortest [points[a], points[b]] with total mass >= level; points ascending.
ClosedInterval confidence_interval_mass(std::span<const double> points,
                                        std::span<const double> masses,
                                        double level);

// Shortest interval of probability >= level for the piecewise-constant
// density with value density[i] on [edges[i], edges[i+1]). Exact: an optimal
// interval has an endpoint at a breakpoint.
ClosedInterval confidence_interval_density(std::span<const double> edges,
                                           std::span<const double> density,
                                           double level);

// A general density discretized into `cells` equal cells of [low, high].
ClosedInterval confidence_interval_function(
    const std::function<double(double)>& density, double low, double high,
    std::size_t cells, double level);

// (1/2) sum_i |empirical_i - reference_i| over cells [edges[i], edges[i+1]),
// plus the sample and reference mass falling outside every cell.
double tv_distance(std::span<const double> samples,
                   std::span<const double> edges,
                   std::span<const double> reference_mass);

// Same, for categorical counts against reference probabilities.
double tv_distance_counts(std::span<const std::int64_t> counts,
                          std::span<const double> reference);

// ---- unbiased competitors ------------------------------------------------

struct UnbiasedCheck {
  std::int64_t mechanisms_checked = 0;
  // max over mechanisms and datasets of P_unb(M(x) = f(x)) minus
  // prob_correct(len(x; .), 4 epsilon); nonpositive when the check passes.
  double max_excess = -std::numeric_limits<double>::infinity();
  bool pass = true;
};

// Enumerates every epsilon-DP, 0-1-unbiased mechanism whose output
// probabilities lie on a grid of the given resolution, for a problem with at
// most 3 datasets and a two-element range, and compares its probability of
// the correct answer with the discrete mechanism run at 4 epsilon.
UnbiasedCheck check_unbiased_competitors(const FiniteProblem& problem,
                                         double epsilon, int resolution);

// ---- step-function figure ------------------------------------------------

struct StepFigureRow {
  std::int64_t sum = 0;
  double f = 0.0;
  bool discontinuity = false;
  ClosedInterval inverse_sensitivity;
  ClosedInterval smooth_laplace;
  ClosedInterval laplace;
};

// 0.9-intervals (in f units) of the discrete inverse-sensitivity mechanism,
// the smooth-Laplace mechanism with beta = epsilon / (2 log(2 / delta)), and
// the Laplace mechanism with GS = 1, for every sum 0..n.
std::vector<StepFigureRow> step_figure(std::size_t n, double threshold,
                                       double epsilon, double delta,
                                       double level = 0.9);

}  // namespace ism
