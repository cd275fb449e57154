#include "ism/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "ism/median.hpp"

namespace ism {

double f_step(std::span<const double> x, double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("f_step: threshold must be positive");
  }
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  return std::floor(sum / threshold);
}

Length step_len(std::int64_t sum, std::size_t n, double threshold,
                std::int64_t target) {
  const auto nn = static_cast<std::int64_t>(n);
  // Integers s' with floor(s' / T) = target: [ceil(jT), ceil((j+1)T) - 1].
  const auto first = std::max<std::int64_t>(
      0, static_cast<std::int64_t>(std::ceil(static_cast<double>(target) * threshold)));
  const auto last = std::min<std::int64_t>(
      nn, static_cast<std::int64_t>(
              std::ceil(static_cast<double>(target + 1) * threshold)) - 1);
  if (first > last) return Length::infinite();
  return Length{std::max<std::int64_t>({0, first - sum, sum - last})};
}

FiniteProblem step_problem(std::size_t n, double threshold) {
  FiniteProblem p;
  p.alphabet = {0.0, 1.0};
  p.n = n;
  p.estimand = [threshold](std::span<const double> x) {
    return f_step(x, threshold);
  };
  for (double j = 0; j * threshold <= static_cast<double>(n); ++j) {
    p.target_grid.push_back(j);
  }
  return p;
}

FiniteProblem median_problem(std::vector<double> alphabet, std::size_t n,
                             std::vector<double> target_grid) {
  FiniteProblem p;
  p.alphabet = std::move(alphabet);
  p.n = n;
  p.estimand = [](std::span<const double> x) { return median(x); };
  p.target_grid = std::move(target_grid);
  return p;
}

FiniteProblem mean_problem(std::vector<double> alphabet, std::size_t n) {
  FiniteProblem p;
  p.alphabet = std::move(alphabet);
  p.n = n;
  p.estimand = [](std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) /
           static_cast<double>(x.size());
  };
  // Every achievable mean.
  std::set<double> means;
  for_each_dataset(p.alphabet, n, [&](std::span<const double> x) {
    means.insert(p.estimand(x));
  });
  p.target_grid.assign(means.begin(), means.end());
  return p;
}

std::vector<CatalogEntry> problem_catalog() {
  std::vector<CatalogEntry> out;
  out.push_back({"step_n6_T2", step_problem(6, 2.0)});
  out.push_back({"step_n8_T3", step_problem(8, 3.0)});
  out.push_back({"median_012_n4",
                 median_problem({0, 1, 2}, 4, {0.0, 0.5, 1.0, 1.5, 2.0})});
  out.push_back({"median_0123_n3", median_problem({0, 1, 2, 3}, 3, {0, 1, 2, 3})});
  out.push_back({"mean_01_n3", mean_problem({0, 1}, 3)});
  out.push_back({"mean_012_n3", mean_problem({0, 1, 2}, 3)});
  return out;
}

std::vector<std::vector<double>> enumerate_neighbors(
    std::span<const double> dataset, std::span<const double> alphabet,
    NeighborMode mode) {
  std::vector<std::vector<double>> out;
  if (mode == NeighborMode::UserAddition) {
    for (double a : alphabet) {
      std::vector<double> x(dataset.begin(), dataset.end());
      x.push_back(a);
      out.push_back(std::move(x));
    }
    return out;
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double a : alphabet) {
      if (a == dataset[i]) continue;
      std::vector<double> x(dataset.begin(), dataset.end());
      x[i] = a;
      out.push_back(std::move(x));
    }
  }
  return out;
}

std::string audit_report_json(const AuditReport& report) {
  nlohmann::json j;
  j["mechanism"] = report.mechanism;
  j["epsilon"] = report.epsilon;
  // JSON has no infinity.
  if (std::isfinite(report.max_log_ratio)) {
    j["max_log_ratio"] = report.max_log_ratio;
  } else {
    j["max_log_ratio"] = "inf";
  }
  j["pass"] = report.pass;
  j["checks_run"] = report.checks_run;
  return j.dump();
}

namespace {

// All of alphabet^n indexed with position 0 as the most significant digit.
struct DatasetTable {
  std::size_t base = 0;
  std::size_t n = 0;
  std::size_t count = 0;
  std::vector<std::size_t> place;  // base^(n - 1 - p)

  DatasetTable(std::size_t alphabet_size, std::size_t size)
      : base(alphabet_size), n(size), count(1), place(size) {
    check_enumeration_size(alphabet_size, size);
    for (std::size_t p = size; p-- > 0;) {
      place[p] = count;
      count *= base;
    }
  }

  std::size_t digit(std::size_t index, std::size_t p) const {
    return (index / place[p]) % base;
  }

  std::vector<double> decode(std::size_t index,
                             std::span<const double> alphabet) const {
    std::vector<double> x(n);
    for (std::size_t p = 0; p < n; ++p) x[p] = alphabet[digit(index, p)];
    return x;
  }

  // Calls fn(j) for every neighbor index j > i.
  template <class Fn>
  void for_each_upper_neighbor(std::size_t i, Fn&& fn) const {
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t d = digit(i, p);
      for (std::size_t v = d + 1; v < base; ++v) fn(i + (v - d) * place[p]);
    }
  }
};

}  // namespace

double lipschitz_audit(const DatasetLengthFn& len_fn,
                       const FiniteProblem& problem,
                       std::span<const double> targets) {
  problem.validate();
  const DatasetTable table(problem.alphabet.size(), problem.n);
  const std::size_t nt = targets.size();
  std::vector<Length> lens(table.count * nt);
  for (std::size_t i = 0; i < table.count; ++i) {
    const std::vector<double> x = table.decode(i, problem.alphabet);
    for (std::size_t t = 0; t < nt; ++t) lens[i * nt + t] = len_fn(x, targets[t]);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < table.count; ++i) {
    table.for_each_upper_neighbor(i, [&](std::size_t j) {
      for (std::size_t t = 0; t < nt; ++t) {
        worst = std::max(worst, length_gap(lens[i * nt + t], lens[j * nt + t]));
      }
    });
  }
  return worst;
}

bool smooth_bound_audit(const DatasetScalarFn& smooth,
                        const DatasetScalarFn& local, double beta,
                        const FiniteProblem& problem) {
  problem.validate();
  if (!(beta > 0.0)) {
    throw std::invalid_argument("smooth bound audit: beta must be positive");
  }
  constexpr double kRel = 1e-12;
  const DatasetTable table(problem.alphabet.size(), problem.n);
  std::vector<double> s(table.count);
  for (std::size_t i = 0; i < table.count; ++i) {
    const std::vector<double> x = table.decode(i, problem.alphabet);
    s[i] = smooth(x);
    if (local(x) > s[i] * (1.0 + kRel) + kRel) return false;
  }
  const double factor = std::exp(beta);
  bool ok = true;
  for (std::size_t i = 0; i < table.count && ok; ++i) {
    table.for_each_upper_neighbor(i, [&](std::size_t j) {
      if (s[i] > factor * s[j] * (1.0 + kRel) + kRel ||
          s[j] > factor * s[i] * (1.0 + kRel) + kRel) {
        ok = false;
      }
    });
  }
  return ok;
}

DatasetScalarFn bruteforce_local_sensitivity(const FiniteProblem& problem) {
  return [problem](std::span<const double> x) {
    return modulus_bruteforce(problem, x, 1);
  };
}

// ---------------------------------------------------------------------------

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level <= 1.0)) {
    throw std::invalid_argument("confidence interval: level must lie in (0, 1]");
  }
}

}  // namespace

ClosedInterval confidence_interval_mass(std::span<const double> points,
                                        std::span<const double> masses,
                                        double level) {
  check_level(level);
  if (points.empty() || points.size() != masses.size()) {
    throw std::invalid_argument("confidence interval: bad mass function");
  }
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  const double need = level * total * (1.0 - 1e-12);
  ClosedInterval best{points.front(), points.back()};
  double window = 0.0;
  std::size_t b = 0;  // window is [a, b)
  for (std::size_t a = 0; a < points.size(); ++a) {
    while (b < points.size() && window < need) window += masses[b++];
    if (window < need) break;
    if (points[b - 1] - points[a] < best.width()) {
      best = {points[a], points[b - 1]};
    }
    window -= masses[a];
  }
  return best;
}

ClosedInterval confidence_interval_density(std::span<const double> edges,
                                           std::span<const double> density,
                                           double level) {
  check_level(level);
  const std::size_t m = density.size();
  if (m == 0 || edges.size() != m + 1) {
    throw std::invalid_argument("confidence interval: bad piecewise density");
  }
  std::vector<double> cdf(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (density[i] < 0.0 || !(edges[i + 1] > edges[i])) {
      throw std::invalid_argument("confidence interval: bad piecewise density");
    }
    cdf[i + 1] = cdf[i] + density[i] * (edges[i + 1] - edges[i]);
  }
  const double total = cdf[m];
  if (!(total > 0.0)) {
    throw std::invalid_argument("confidence interval: zero total mass");
  }
  const double need = level * total;

  // Smallest b with CDF(b) >= target.
  const auto first_reach = [&](double target) {
    const auto k = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    if (k == 0) return edges[0];
    if (k > m) return edges[m];
    return edges[k - 1] + (target - cdf[k - 1]) / density[k - 1];
  };
  // Largest a with CDF(a) <= target.
  const auto last_below = [&](double target) {
    const auto u = static_cast<std::size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    if (u == 0) return edges[0];
    if (u > m) return edges[m];
    return edges[u - 1] + (target - cdf[u - 1]) / density[u - 1];
  };

  ClosedInterval best{edges[0], edges[m]};
  for (std::size_t i = 0; i <= m; ++i) {
    if (cdf[i] + need <= total * (1.0 + 1e-15)) {
      const double b = first_reach(std::min(cdf[i] + need, total));
      if (b - edges[i] < best.width()) best = {edges[i], b};
    }
    if (cdf[i] - need >= -total * 1e-15) {
      const double a = last_below(std::max(cdf[i] - need, 0.0));
      if (edges[i] - a < best.width()) best = {a, edges[i]};
    }
  }
  return best;
}

ClosedInterval confidence_interval_function(
    const std::function<double(double)>& density, double low, double high,
    std::size_t cells, double level) {
  if (!(high > low) || cells == 0) {
    throw std::invalid_argument("confidence interval: bad discretization");
  }
  std::vector<double> edges(cells + 1), values(cells);
  const double w = (high - low) / static_cast<double>(cells);
  for (std::size_t i = 0; i <= cells; ++i) {
    edges[i] = low + w * static_cast<double>(i);
  }
  edges[cells] = high;
  for (std::size_t i = 0; i < cells; ++i) {
    values[i] = density(0.5 * (edges[i] + edges[i + 1]));
  }
  return confidence_interval_density(edges, values, level);
}

double tv_distance(std::span<const double> samples,
                   std::span<const double> edges,
                   std::span<const double> reference_mass) {
  if (edges.size() != reference_mass.size() + 1 || samples.empty()) {
    throw std::invalid_argument("tv distance: bad cells or no samples");
  }
  std::vector<double> counts(reference_mass.size(), 0.0);
  double outside = 0.0;
  for (double s : samples) {
    if (!(s >= edges.front()) || !(s < edges.back())) {
      outside += 1.0;
      continue;
    }
    const auto k = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), s) - edges.begin() - 1);
    counts[k] += 1.0;
  }
  const double total = static_cast<double>(samples.size());
  double sum = outside / total;
  double reference_total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    sum += std::abs(counts[i] / total - reference_mass[i]);
    reference_total += reference_mass[i];
  }
  sum += std::max(0.0, 1.0 - reference_total);
  return 0.5 * sum;
}

double tv_distance_counts(std::span<const std::int64_t> counts,
                          std::span<const double> reference) {
  if (counts.size() != reference.size()) {
    throw std::invalid_argument("tv distance: size mismatch");
  }
  const double total =
      static_cast<double>(std::accumulate(counts.begin(), counts.end(),
                                          std::int64_t{0}));
  if (!(total > 0.0)) throw std::invalid_argument("tv distance: no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    sum += std::abs(static_cast<double>(counts[i]) / total - reference[i]);
  }
  return 0.5 * sum;
}

// ---------------------------------------------------------------------------

UnbiasedCheck check_unbiased_competitors(const FiniteProblem& problem,
                                         double epsilon, int resolution) {
  problem.validate();
  if (!(epsilon > 0.0) || resolution < 1) {
    throw std::invalid_argument("unbiased check: invalid parameters");
  }
  const DatasetTable table(problem.alphabet.size(), problem.n);
  if (table.count > 3) {
    throw std::invalid_argument("unbiased check: at most 3 datasets");
  }
  std::vector<std::vector<double>> data;
  std::vector<double> values;
  std::set<double> range;
  for (std::size_t i = 0; i < table.count; ++i) {
    data.push_back(table.decode(i, problem.alphabet));
    values.push_back(problem.evaluate(data.back()));
    range.insert(values.back());
  }
  if (range.size() != 2) {
    throw std::invalid_argument("unbiased check: range must have two values");
  }
  const double r0 = *range.begin();
  const double r1 = *range.rbegin();

  // Bound per dataset: prob_correct at 4 epsilon with brute-force lengths.
  std::vector<double> bound(table.count);
  for (std::size_t i = 0; i < table.count; ++i) {
    LengthMap lengths{{r0, inverse_sensitivity_bruteforce(problem, data[i], r0)},
                      {r1, inverse_sensitivity_bruteforce(problem, data[i], r1)}};
    bound[i] = prob_correct(lengths, 4.0 * epsilon);
  }
  // Neighbor pairs.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < table.count; ++i) {
    table.for_each_upper_neighbor(i, [&](std::size_t j) { pairs.emplace_back(i, j); });
  }

  const double e = std::exp(epsilon);
  constexpr double kTol = 1e-12;
  UnbiasedCheck out;
  std::vector<int> level(table.count, 0);  // P(M(x) = r1) = level / resolution
  std::vector<double> p(table.count);
  for (;;) {
    for (std::size_t i = 0; i < table.count; ++i) {
      p[i] = static_cast<double>(level[i]) / resolution;
    }
    bool ok = true;
    for (std::size_t i = 0; i < table.count && ok; ++i) {
      const double correct = values[i] == r1 ? p[i] : 1.0 - p[i];
      ok = correct >= 0.5 - kTol;
    }
    for (const auto& [a, b] : pairs) {
      if (!ok) break;
      ok = p[a] <= e * p[b] + kTol && p[b] <= e * p[a] + kTol &&
           1.0 - p[a] <= e * (1.0 - p[b]) + kTol &&
           1.0 - p[b] <= e * (1.0 - p[a]) + kTol;
    }
    if (ok) {
      ++out.mechanisms_checked;
      for (std::size_t i = 0; i < table.count; ++i) {
        const double correct = values[i] == r1 ? p[i] : 1.0 - p[i];
        out.max_excess = std::max(out.max_excess, correct - bound[i]);
      }
    }
    std::size_t pos = 0;
    while (pos < table.count && ++level[pos] > resolution) level[pos++] = 0;
    if (pos == table.count) break;
  }
  out.pass = out.max_excess <= kTol;
  return out;
}

std::vector<StepFigureRow> step_figure(std::size_t n, double threshold,
                                       double epsilon, double delta,
                                       double level) {
  if (!(threshold >= 1.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("step figure: need T >= 1 and epsilon > 0");
  }
  const double beta = smooth_laplace_beta(epsilon, delta);
  const auto nn = static_cast<std::int64_t>(n);
  const auto f_of = [&](std::int64_t s) {
    return std::floor(static_cast<double>(s) / threshold);
  };
  std::vector<double> local(n + 1, 0.0);
  for (std::int64_t s = 0; s <= nn; ++s) {
    for (std::int64_t t : {s - 1, s + 1}) {
      if (t < 0 || t > nn) continue;
      local[static_cast<std::size_t>(s)] =
          std::max(local[static_cast<std::size_t>(s)], std::abs(f_of(t) - f_of(s)));
    }
  }
  const auto top = static_cast<std::int64_t>(f_of(nn));
  const double half_width = std::log(1.0 / (1.0 - level));

  std::vector<StepFigureRow> rows;
  rows.reserve(n + 1);
  for (std::int64_t s = 0; s <= nn; ++s) {
    StepFigureRow row;
    row.sum = s;
    row.f = f_of(s);
    row.discontinuity = local[static_cast<std::size_t>(s)] > 0.0;

    LengthMap lengths;
    for (std::int64_t j = 0; j <= top; ++j) {
      lengths[static_cast<double>(j)] = step_len(s, n, threshold, j);
    }
    const std::vector<double> masses =
        discrete_mechanism_probabilities(lengths, epsilon);
    std::vector<double> points;
    for (const auto& entry : lengths) points.push_back(entry.first);
    row.inverse_sensitivity = confidence_interval_mass(points, masses, level);

    // Smooth sensitivity of f_step over sums: max_s' e^{-beta |s - s'|} LS(s').
    double smooth = 0.0;
    for (std::int64_t t = 0; t <= nn; ++t) {
      smooth = std::max(smooth, std::exp(-beta * std::abs(static_cast<double>(t - s))) *
                                    local[static_cast<std::size_t>(t)]);
    }
    const double sl = 2.0 * smooth / epsilon * half_width;
    row.smooth_laplace = {row.f - sl, row.f + sl};
    const double lap = half_width / epsilon;
    row.laplace = {row.f - lap, row.f + lap};
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ism
