#include "ism/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "ism/median.hpp"
#include "ism/regression.hpp"
#include "ism/samplers.hpp"
#include "ism/sgd.hpp"

namespace ism {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using json = nlohmann::json;

// Fails on any key of `j` not listed in `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.contains(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out,
                   const std::string& where) {
  if (!j.contains(key)) return;
  T value{};
  read(j, key, value, where);
  out = value;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::MedianSweep: return "median";
    case Experiment::RegressionSweep: return "regression";
    case Experiment::StepFigure: return "step-figure";
    case Experiment::Audit: return "audit";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& name) {
  if (name == "median") return Experiment::MedianSweep;
  if (name == "regression") return Experiment::RegressionSweep;
  if (name == "step-figure") return Experiment::StepFigure;
  if (name == "audit") return Experiment::Audit;
  throw ConfigError("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (epsilons.empty()) throw ConfigError("epsilons: must be nonempty");
  for (double e : epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw ConfigError("epsilons: every value must be positive and finite");
    }
  }
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) {
    throw ConfigError("epsilons: must be sorted ascending");
  }
  if (trials < 1) throw ConfigError("trials: must be at least 1");
  if (!(range_high > range_low)) throw ConfigError("range: empty interval");
  if (rho && !(*rho >= 0.0 && *rho < range_high - range_low)) {
    throw ConfigError("rho: must lie in [0, R)");
  }
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    throw ConfigError("delta: must lie in (0, 1)");
  }
  if (grid_points == 1) throw ConfigError("grid_points: need 0 or at least 2");
  if (source.kind != DataSource::Kind::Csv && source.n == 0) {
    throw ConfigError("dataset.n: must be positive");
  }
  if (source.kind == DataSource::Kind::Csv && source.path.empty()) {
    throw ConfigError("dataset.path: required for csv data");
  }
  if (!(source.high > source.low)) throw ConfigError("dataset: low >= high");
  if (source.dim < 1) throw ConfigError("dataset.dim: must be positive");
  if (!(source.x_half_width > 0.0) || !(source.noise_half_width >= 0.0)) {
    throw ConfigError("dataset: invalid regression widths");
  }
  if (alphas.empty()) throw ConfigError("alphas: must be nonempty");
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas: every value must be positive");
  }
  if (!(theta_box > 0.0)) throw ConfigError("theta_box: must be positive");
  if (mh_steps < 1) throw ConfigError("mh_steps: must be positive");
  if (sgd.sample_rates.empty() || sgd.eta0_grid.empty()) {
    throw ConfigError("sgd: q and eta0 grids must be nonempty");
  }
  for (double q : sgd.sample_rates) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("sgd.q: must lie in (0, 1]");
  }
  for (double e : sgd.eta0_grid) {
    if (!(e > 0.0)) throw ConfigError("sgd.eta0: must be positive");
  }
  if (!(sgd.sigma > 0.0)) throw ConfigError("sgd.sigma: must be positive");
  if (sgd.max_steps < 1) throw ConfigError("sgd.max_steps: must be positive");
  if (step_n < 1 || !(step_threshold >= 1.0)) {
    throw ConfigError("step: need n >= 1 and threshold >= 1");
  }
  if (audit.pairs < 1 || audit.n < 1 || audit.grid < 1 ||
      audit.regression_pairs < 1 || audit.regression_n < 1) {
    throw ConfigError("audit: sizes must be positive");
  }
  if (workers < 0) throw ConfigError("workers: must be nonnegative");
}

ExperimentConfig parse_config(const json& j, std::optional<Experiment> experiment) {
  check_keys(j,
             {"experiment", "epsilons", "trials", "seed", "dataset", "range",
              "rho", "delta", "grid_points", "alphas", "theta_box", "mh_steps",
              "sgd", "step", "audit", "workers"},
             "config");
  ExperimentConfig c;
  if (j.contains("experiment")) {
    std::string name;
    read(j, "experiment", name, "config");
    c.experiment = parse_experiment(name);
    if (experiment && *experiment != c.experiment) {
      throw ConfigError("config.experiment '" + name +
                        "' does not match the requested experiment '" +
                        experiment_name(*experiment) + "'");
    }
  } else if (experiment) {
    c.experiment = *experiment;
  }
  read(j, "epsilons", c.epsilons, "config");
  read(j, "trials", c.trials, "config");
  read(j, "seed", c.seed, "config");
  read_optional(j, "rho", c.rho, "config");
  read_optional(j, "delta", c.delta, "config");
  read(j, "grid_points", c.grid_points, "config");
  read(j, "alphas", c.alphas, "config");
  read(j, "theta_box", c.theta_box, "config");
  read(j, "mh_steps", c.mh_steps, "config");
  read(j, "workers", c.workers, "config");
  if (j.contains("range")) {
    std::vector<double> r;
    read(j, "range", r, "config");
    if (r.size() != 2) throw ConfigError("config.range: expected [low, high]");
    c.range_low = r[0];
    c.range_high = r[1];
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d,
               {"source", "path", "column", "skip_header", "n", "low", "high",
                "dim", "noise_half_width", "x_half_width"},
               "dataset");
    std::string source =
        c.experiment == Experiment::RegressionSweep ? "regression" : "uniform";
    read(d, "source", source, "dataset");
    if (source == "csv") {
      c.source.kind = DataSource::Kind::Csv;
    } else if (source == "uniform") {
      c.source.kind = DataSource::Kind::SyntheticUniform;
    } else if (source == "regression") {
      c.source.kind = DataSource::Kind::SyntheticRegression;
    } else {
      throw ConfigError("dataset.source: unknown source '" + source + "'");
    }
    read(d, "path", c.source.path, "dataset");
    read(d, "column", c.source.column, "dataset");
    read(d, "skip_header", c.source.skip_header, "dataset");
    read(d, "n", c.source.n, "dataset");
    read(d, "low", c.source.low, "dataset");
    read(d, "high", c.source.high, "dataset");
    read(d, "dim", c.source.dim, "dataset");
    read(d, "noise_half_width", c.source.noise_half_width, "dataset");
    read(d, "x_half_width", c.source.x_half_width, "dataset");
  } else if (c.experiment == Experiment::RegressionSweep) {
    c.source.kind = DataSource::Kind::SyntheticRegression;
  }
  if (j.contains("sgd")) {
    const json& s = j.at("sgd");
    check_keys(s, {"q", "sigma", "eta0", "max_steps"}, "sgd");
    read(s, "q", c.sgd.sample_rates, "sgd");
    read(s, "sigma", c.sgd.sigma, "sgd");
    read(s, "eta0", c.sgd.eta0_grid, "sgd");
    read(s, "max_steps", c.sgd.max_steps, "sgd");
  }
  if (j.contains("step")) {
    const json& s = j.at("step");
    check_keys(s, {"n", "threshold"}, "step");
    read(s, "n", c.step_n, "step");
    read(s, "threshold", c.step_threshold, "step");
  }
  if (j.contains("audit")) {
    const json& a = j.at("audit");
    check_keys(a, {"pairs", "n", "grid", "regression_pairs", "regression_n"},
               "audit");
    read(a, "pairs", c.audit.pairs, "audit");
    read(a, "n", c.audit.n, "audit");
    read(a, "grid", c.audit.grid, "audit");
    read(a, "regression_pairs", c.audit.regression_pairs, "audit");
    read(a, "regression_n", c.audit.regression_n, "audit");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<Experiment> experiment) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return parse_config(j, experiment);
}

Dataset1D load_csv_column(const std::string& path, std::size_t column,
                          bool skip_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  Dataset1D out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (row == 1 && skip_header) continue;
    if (trim(line).empty()) continue;
    std::string_view rest = line;
    std::string cell;
    for (std::size_t c = 0;; ++c) {
      const auto comma = rest.find(',');
      if (c == column) {
        cell = trim(rest.substr(0, comma));
        break;
      }
      if (comma == std::string_view::npos) {
        throw DataError(path + ": row " + std::to_string(row) +
                        " has no column " + std::to_string(column));
      }
      rest.remove_prefix(comma + 1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
      throw DataError(path + ": row " + std::to_string(row) +
                      " is not numeric ('" + cell + "')");
    }
    out.values.push_back(v);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t epsilon_index,
                         std::size_t trial) {
  return derive_seed(base, epsilon_index, trial);
}

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  std::size_t threads =
      workers > 0 ? static_cast<std::size_t>(workers)
                  : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Dataset1D median_data(const ExperimentConfig& config) {
  Dataset1D data;
  if (config.source.kind == DataSource::Kind::Csv) {
    data = load_csv_column(config.source.path, config.source.column,
                           config.source.skip_header);
  } else if (config.source.kind == DataSource::Kind::SyntheticUniform) {
    SeededRng rng(derive_seed(config.seed, 0xDA7A, 0));
    data.values.resize(config.source.n);
    for (double& v : data.values) {
      v = rng.uniform(config.source.low, config.source.high);
    }
  } else {
    throw ConfigError("median sweep: dataset must be csv or uniform");
  }
  if (data.values.empty()) throw DataError("median sweep: empty dataset");
  data.range_low = config.range_low;
  data.range_high = config.range_high;
  return data.clamped();
}

}  // namespace

SweepResult run_median_sweep(const ExperimentConfig& config) {
  config.validate();
  const Dataset1D data = median_data(config);
  const std::size_t n = data.size();
  const double truth = median(data.values);
  MedianConfig mc;
  mc.range_low = config.range_low;
  mc.range_high = config.range_high;
  mc.rho = config.rho;
  mc.grid_points = config.grid_points;
  const SliceProfile profile = build_median_slices(data.values, mc);
  const double delta = config.delta.value_or(default_median_delta(n));
  const double width = config.range_high - config.range_low;

  const std::size_t ne = config.epsilons.size();
  const auto nt = static_cast<std::size_t>(config.trials);
  std::vector<double> smooth(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    smooth[e] = smooth_sensitivity_median(
        data.values, smooth_laplace_beta(config.epsilons[e], delta),
        config.range_low, config.range_high);
  }

  std::vector<RunRecord> records(ne * nt * 3);
  parallel_for(ne * nt, config.workers, [&](std::size_t cell) {
    const std::size_t e = cell / nt;
    const std::size_t t = cell % nt;
    const double eps = config.epsilons[e];
    const std::uint64_t seed = trial_seed(config.seed, e, t);
    SeededRng rng(seed);
    const auto put = [&](std::size_t m, const char* name, auto&& draw) {
      const auto start = Clock::now();
      const double out = draw();
      RunRecord& r = records[cell * 3 + m];
      r = {"median", name, eps, static_cast<int>(t), seed, {out},
           std::abs(out - truth), elapsed_ms(start)};
    };
    put(0, "inverse_sensitivity",
        [&] { return continuous_mechanism(profile, eps, rng); });
    put(1, "smooth_laplace",
        [&] { return smooth_laplace_mechanism(truth, smooth[e], eps, rng); });
    put(2, "laplace", [&] { return laplace_mechanism(truth, width, eps, rng); });
  });

  SweepResult result;
  result.records = std::move(records);
  result.notes["n"] = n;
  result.notes["empirical_median"] = truth;
  result.notes["delta"] = delta;
  result.notes["rho"] = profile.rho;
  result.notes["smooth_sensitivity"] = smooth;
  return result;
}

namespace {

struct RegressionInstance {
  RegressionDataset data;
  Vector theta_star;
};

RegressionInstance make_regression_instance(const DataSource& src,
                                            std::uint64_t seed) {
  SeededRng rng(seed);
  const int d = src.dim;
  const auto n = static_cast<Eigen::Index>(src.n);
  RegressionInstance inst;
  inst.theta_star.resize(d);
  for (int k = 0; k < d; ++k) inst.theta_star(k) = rng.uniform(-5.0, 5.0);
  inst.data.features.resize(n, d);
  inst.data.targets.resize(n);
  inst.data.norm_bound = src.x_half_width * std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      inst.data.features(i, k) = rng.uniform(-src.x_half_width, src.x_half_width);
    }
    inst.data.targets(i) =
        inst.data.features.row(i).dot(inst.theta_star) +
        (src.noise_half_width > 0.0
             ? rng.uniform(-src.noise_half_width, src.noise_half_width)
             : 0.0);
  }
  return inst;
}

std::string alpha_label(double alpha) {
  std::ostringstream os;
  os << "regression_alpha" << alpha;
  return os.str();
}

}  // namespace

SweepResult run_regression_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.source.kind != DataSource::Kind::SyntheticRegression) {
    throw ConfigError("regression sweep: dataset source must be 'regression'");
  }
  const int d = config.source.dim;
  const ParamDomain domain = ParamDomain::box(
      Vector::Constant(d, -config.theta_box), Vector::Constant(d, config.theta_box));
  const std::size_t n = config.source.n;
  const double delta = config.delta.value_or(default_median_delta(n));
  const std::size_t ne = config.epsilons.size();
  const auto nt = static_cast<std::size_t>(config.trials);
  const auto& rates = config.sgd.sample_rates;
  const auto& etas = config.sgd.eta0_grid;

  SweepResult result;
  result.notes["delta"] = delta;
  for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
    const RobustLoss loss{config.alphas[ai]};
    const std::string name = alpha_label(loss.alpha);

    // Step budget per (epsilon, q).
    std::vector<std::int64_t> steps(ne * rates.size());
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t qi = 0; qi < rates.size(); ++qi) {
        steps[e * rates.size() + qi] =
            max_sgd_steps(rates[qi], config.sgd.sigma, delta, config.epsilons[e],
                          config.sgd.max_steps);
      }
    }

    const std::size_t ncomb = rates.size() * etas.size();
    std::vector<RunRecord> mh(ne * nt);
    // SGD error and output per (cell, q, eta0).
    std::vector<double> sgd_err(ne * nt * ncomb, kNaN);
    std::vector<Vector> sgd_out(ne * nt * ncomb);
    parallel_for(ne * nt, config.workers, [&](std::size_t cell) {
      const std::size_t e = cell / nt;
      const std::size_t t = cell % nt;
      const double eps = config.epsilons[e];
      const std::uint64_t seed = trial_seed(config.seed, e, t);
      const RegressionInstance inst =
          make_regression_instance(config.source, derive_seed(seed, ai, 0xDA7A));

      SeededRng rng(derive_seed(seed, ai, 1));
      const auto start = Clock::now();
      RunRecord& r = mh[cell];
      r = {name, "inverse_sensitivity", eps, static_cast<int>(t), seed, {}, kNaN, 0.0};
      try {
        RegressionMechanismOptions opts;
        opts.mh_steps = config.mh_steps;
        const RegressionRelease rel =
            inverse_sensitivity_regression(inst.data, loss, domain, eps, rng, opts);
        r.output.assign(rel.theta.data(), rel.theta.data() + d);
        r.abs_error = (rel.theta - inst.theta_star).norm();
      } catch (const std::exception&) {
        r.output.assign(static_cast<std::size_t>(d), kNaN);
      }
      r.wall_ms = elapsed_ms(start);

      for (std::size_t qi = 0; qi < rates.size(); ++qi) {
        const std::int64_t budget = steps[e * rates.size() + qi];
        if (budget == 0) continue;
        for (std::size_t ei = 0; ei < etas.size(); ++ei) {
          SeededRng srng(derive_seed(seed, ai, 2 + qi * etas.size() + ei));
          SgdParams p;
          p.sample_rate = rates[qi];
          p.sigma = config.sgd.sigma;
          p.steps = budget;
          p.eta0 = etas[ei];
          p.clip_bound = inst.data.norm_bound;
          const Vector theta = private_sgd(loss, inst.data, p, Vector::Zero(d), srng);
          const std::size_t k = cell * ncomb + qi * etas.size() + ei;
          sgd_out[k] = theta;
          sgd_err[k] = (theta - inst.theta_star).norm();
          if (!std::isfinite(sgd_err[k])) sgd_err[k] = std::numeric_limits<double>::max();
        }
      }
    });

    json alpha_notes;
    for (std::size_t e = 0; e < ne; ++e) {
      // Pick the (q, eta0) with the smallest median error over trials.
      std::size_t best = ncomb;
      double best_median = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < ncomb; ++c) {
        std::vector<double> errs;
        for (std::size_t t = 0; t < nt; ++t) {
          const double v = sgd_err[(e * nt + t) * ncomb + c];
          if (!std::isnan(v)) errs.push_back(v);
        }
        if (errs.size() != nt) continue;
        const double med = quantile(errs, 0.5);
        if (med < best_median) {
          best_median = med;
          best = c;
        }
      }
      json cell_notes;
      cell_notes["epsilon"] = config.epsilons[e];
      std::vector<std::int64_t> budgets;
      for (std::size_t qi = 0; qi < rates.size(); ++qi) {
        budgets.push_back(steps[e * rates.size() + qi]);
      }
      cell_notes["sgd_steps_per_q"] = budgets;
      if (best == ncomb) {
        cell_notes["sgd_infeasible"] = true;
        result.infeasible = true;
      } else {
        cell_notes["sgd_infeasible"] = false;
        cell_notes["sgd_q"] = rates[best / etas.size()];
        cell_notes["sgd_eta0"] = etas[best % etas.size()];
      }
      alpha_notes.push_back(cell_notes);

      for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t cell = e * nt + t;
        result.records.push_back(mh[cell]);
        RunRecord r{name, "private_sgd", config.epsilons[e], static_cast<int>(t),
                    trial_seed(config.seed, e, t), {}, kNaN, 0.0};
        if (best == ncomb) {
          r.output.assign(static_cast<std::size_t>(d), kNaN);
        } else {
          const Vector& theta = sgd_out[cell * ncomb + best];
          r.output.assign(theta.data(), theta.data() + d);
          r.abs_error = sgd_err[cell * ncomb + best];
        }
        result.records.push_back(std::move(r));
      }
    }
    result.notes[name] = alpha_notes;
  }
  return result;
}

std::vector<std::vector<StepFigureRow>> run_step_figure(
    const ExperimentConfig& config) {
  config.validate();
  std::vector<std::vector<StepFigureRow>> tables;
  for (double eps : config.epsilons) {
    if (config.step_threshold * eps < 10.0) {
      throw ConfigError("step figure: need threshold * epsilon >= 10");
    }
    const double delta =
        config.delta.value_or(default_median_delta(config.step_n));
    tables.push_back(step_figure(config.step_n, config.step_threshold, eps, delta));
  }
  return tables;
}

// ---------------------------------------------------------------------------

std::vector<AuditReport> run_audit_suite(const ExperimentConfig& config) {
  config.validate();
  std::vector<AuditReport> reports;
  const AuditSuiteConfig& a = config.audit;

  for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
    const double eps = config.epsilons[e];
    SeededRng rng(derive_seed(config.seed, 0xA0D17, e));

    // Median mechanism on random substitution pairs in [0, 1]^n.
    using Values = std::vector<double>;
    std::vector<std::pair<Values, Values>> pairs;
    for (std::size_t p = 0; p < a.pairs; ++p) {
      Values x(a.n);
      for (double& v : x) v = rng.uniform();
      Values y = x;
      y[rng.uniform_index(a.n)] = rng.uniform();
      pairs.emplace_back(std::move(x), std::move(y));
    }
    std::vector<double> grid(a.grid);
    for (std::size_t g = 0; g < a.grid; ++g) {
      grid[g] = (static_cast<double>(g) + 0.5) / static_cast<double>(a.grid);
    }
    const MedianConfig mc;
    // Profiles are rebuilt per call; cache them by pair identity.
    std::map<const Values*, SliceProfile> cache;
    const auto profile_of = [&](const Values& x) -> const SliceProfile& {
      auto it = cache.find(&x);
      if (it == cache.end()) it = cache.emplace(&x, build_median_slices(x, mc)).first;
      return it->second;
    };
    reports.push_back(audit_density_ratio(
        [&](const Values& x, double t) {
          return profile_log_density(profile_of(x), eps, t);
        },
        pairs, grid, eps, "median"));

    // Negative control: lengths doubled but calibrated as sensitivity one.
    reports.push_back(audit_density_ratio(
        [&](const Values& x, double t) {
          SliceProfile doubled = profile_of(x);
          for (Slice& s : doubled.slices) s.k *= 2;
          return profile_log_density(doubled, eps, t);
        },
        pairs, grid, eps, "median_doubled_score_control"));

    // Regression target density, d = 1, user-addition pairs, exact
    // normalization through the breakpoint index.
    const RobustLoss loss{1.0};
    const double box = config.theta_box;
    std::vector<std::pair<RegressionDataset, RegressionDataset>> rpairs;
    for (std::size_t p = 0; p < a.regression_pairs; ++p) {
      DataSource src;
      src.n = a.regression_n;
      src.x_half_width = 1.0;
      src.noise_half_width = 0.5;
      RegressionInstance inst =
          make_regression_instance(src, derive_seed(config.seed, 0xE6, p));
      Vector xnew = Vector::Constant(1, rng.uniform(-1.0, 1.0));
      const double ynew = rng.uniform(-8.0, 8.0);
      RegressionDataset bigger = inst.data.with_row(xnew, ynew);
      rpairs.emplace_back(std::move(inst.data), std::move(bigger));
    }
    std::vector<Vector> rgrid;
    for (std::size_t g = 0; g < 2 * a.grid; ++g) {
      rgrid.push_back(Vector::Constant(
          1, -box + 2.0 * box * (static_cast<double>(g) + 0.5) /
                        static_cast<double>(2 * a.grid)));
    }
    const ParamDomain domain =
        ParamDomain::box(Vector::Constant(1, -box), Vector::Constant(1, box));
    std::map<const RegressionDataset*, double> log_norm;
    const auto log_z = [&](const RegressionDataset& d) {
      auto it = log_norm.find(&d);
      if (it == log_norm.end()) {
        const OneDimLengthIndex index(d, loss, -box, box);
        it = log_norm.emplace(&d, std::log(index.integrate(-box, box, eps))).first;
      }
      return it->second;
    };
    reports.push_back(audit_density_ratio(
        [&](const RegressionDataset& d, const Vector& theta) {
          return target_log_density(d, theta, eps, loss, domain) - log_z(d);
        },
        rpairs, rgrid, eps, "regression_target"));
  }

  // Exhaustive Lipschitz and smooth-bound audits. For these records
  // max_log_ratio holds the largest length gap (bound 1) or 0 / inf for the
  // smooth-bound pass / failure.
  {
    std::vector<double> targets;
    for (int i = 0; i <= 12; ++i) targets.push_back(i / 6.0);
    const FiniteProblem med = median_problem({0, 1, 2}, 4, targets);
    const double gap = lipschitz_audit(
        [](std::span<const double> x, double t) {
          return Length{static_cast<std::int64_t>(median_len(x, t))};
        },
        med, targets);
    reports.push_back({"lipschitz_median", 1.0, gap, std::nullopt, 81, gap <= 1.0});

    const FiniteProblem step = step_problem(8, 3.0);
    const double step_gap = lipschitz_audit(
        [](std::span<const double> x, double t) {
          const auto s = static_cast<std::int64_t>(std::lround(
              std::accumulate(x.begin(), x.end(), 0.0)));
          return step_len(s, x.size(), 3.0, std::llround(t));
        },
        step, step.target_grid);
    reports.push_back(
        {"lipschitz_step", 1.0, step_gap, std::nullopt, 256, step_gap <= 1.0});

    const double beta = 0.3;
    const FiniteProblem small = median_problem({0.0, 0.5, 1.0}, 4, {0.0, 0.5, 1.0});
    const bool ok = smooth_bound_audit(
        [&](std::span<const double> x) {
          return smooth_sensitivity_median(x, beta, 0.0, 1.0);
        },
        bruteforce_local_sensitivity(small), beta, small);
    reports.push_back({"smooth_bound_median", beta,
                       ok ? 0.0 : std::numeric_limits<double>::infinity(),
                       std::nullopt, 81, ok});
  }
  return reports;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("quantile: p must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string records_csv(std::vector<RunRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     return std::tie(a.experiment, a.mechanism, a.epsilon, a.trial) <
                            std::tie(b.experiment, b.mechanism, b.epsilon, b.trial);
                   });
  std::string out = kCsvHeader;
  out += '\n';
  for (const RunRecord& r : records) {
    std::string output;
    for (std::size_t i = 0; i < r.output.size(); ++i) {
      if (i > 0) output += ';';
      output += format_double(r.output[i]);
    }
    out += r.experiment + ',' + r.mechanism + ',' + format_double(r.epsilon) + ',' +
           std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + output +
           ',' + format_double(r.abs_error) + ',' + format_double(r.wall_ms) + '\n';
  }
  return out;
}

json summarize(const std::vector<RunRecord>& records) {
  std::map<std::string, std::map<std::string, std::map<double, std::vector<double>>>>
      groups;
  std::map<std::string, std::map<std::string, std::map<double, int>>> infeasible;
  for (const RunRecord& r : records) {
    auto& errs = groups[r.experiment][r.mechanism][r.epsilon];
    if (std::isnan(r.abs_error)) {
      ++infeasible[r.experiment][r.mechanism][r.epsilon];
    } else {
      errs.push_back(r.abs_error);
    }
  }
  json out = json::object();
  for (const auto& [experiment, mechs] : groups) {
    json ej;
    ej["quantile_convention"] = "linear interpolation at position (N-1)p";
    for (const auto& [mech, by_eps] : mechs) {
      json rows = json::array();
      for (const auto& [eps, errs] : by_eps) {
        json row;
        row["epsilon"] = eps;
        row["trials"] = errs.size();
        row["infeasible"] = infeasible[experiment][mech][eps];
        if (!errs.empty()) {
          row["median"] = quantile(errs, 0.5);
          row["q05"] = quantile(errs, 0.05);
          row["q95"] = quantile(errs, 0.95);
        } else {
          row["median"] = nullptr;
          row["q05"] = nullptr;
          row["q95"] = nullptr;
        }
        rows.push_back(row);
      }
      ej["mechanisms"][mech] = rows;
    }
    out[experiment] = ej;
  }
  return out;
}

void emit_results(const std::vector<RunRecord>& records, const std::string& path,
                  const json& notes) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << records_csv(records);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
  }
  json summary;
  summary["experiments"] = summarize(records);
  summary["notes"] = notes;
  const std::string summary_path = path + ".summary.json";
  std::ofstream out(summary_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + summary_path + "'");
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + summary_path + "'");
}

std::string step_figure_csv(const std::vector<double>& epsilons,
                            const std::vector<std::vector<StepFigureRow>>& tables) {
  std::string out =
      "epsilon,sum,f,discontinuity,is_low,is_high,smooth_laplace_low,"
      "smooth_laplace_high,laplace_low,laplace_high\n";
  for (std::size_t e = 0; e < tables.size(); ++e) {
    for (const StepFigureRow& r : tables[e]) {
      out += format_double(epsilons[e]) + ',' + std::to_string(r.sum) + ',' +
             format_double(r.f) + ',' + (r.discontinuity ? "1" : "0") + ',' +
             format_double(r.inverse_sensitivity.low) + ',' +
             format_double(r.inverse_sensitivity.high) + ',' +
             format_double(r.smooth_laplace.low) + ',' +
             format_double(r.smooth_laplace.high) + ',' +
             format_double(r.laplace.low) + ',' + format_double(r.laplace.high) +
             '\n';
    }
  }
  return out;
}

}  // namespace ism
