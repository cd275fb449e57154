#include "ism/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ism {

void RegressionDataset::validate() const {
  if (features.rows() != targets.size()) {
    throw std::invalid_argument("regression data: feature/target row mismatch");
  }
  if (!(norm_bound > 0.0)) {
    throw std::invalid_argument("regression data: norm bound must be positive");
  }
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (features.row(i).norm() > norm_bound * (1.0 + 1e-12)) {
      throw std::invalid_argument("regression data: row " + std::to_string(i) +
                                  " exceeds the norm bound");
    }
  }
}

RegressionDataset RegressionDataset::with_row(const Vector& x, double y) const {
  RegressionDataset out;
  out.norm_bound = norm_bound;
  out.features.resize(features.rows() + 1, features.cols());
  out.features.topRows(features.rows()) = features;
  out.features.row(features.rows()) = x.transpose();
  out.targets.resize(targets.size() + 1);
  out.targets.head(targets.size()) = targets;
  out.targets(targets.size()) = y;
  return out;
}

void RobustLoss::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("robust loss: alpha must be positive");
  }
}

double RobustLoss::value(double t) const {
  const double a = std::abs(t);
  return a + 2.0 * alpha * std::log1p(std::exp(-a / alpha));
}

double RobustLoss::derivative(double t) const {
  return std::tanh(t / (2.0 * alpha));
}

double RobustLoss::second_derivative(double t) const {
  const double z = std::abs(t) / (2.0 * alpha);
  const double e = std::exp(-2.0 * z);
  // sech(z) = 2 e^{-z} / (1 + e^{-2z})
  const double sech = 2.0 * std::exp(-z) / (1.0 + e);
  return sech * sech / (2.0 * alpha);
}

namespace {

Vector residuals(const Vector& theta, const RegressionDataset& data) {
  if (theta.size() != data.features.cols()) {
    throw std::invalid_argument("regression: parameter dimension mismatch");
  }
  return data.features * theta - data.targets;
}

}  // namespace

LossEval loss_eval(const RobustLoss& loss, const Vector& theta,
                   const RegressionDataset& data) {
  loss.validate();
  const Vector r = residuals(theta, data);
  const double n = static_cast<double>(data.size());
  LossEval out;
  Vector d1(r.size()), d2(r.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    total += loss.value(r(i));
    d1(i) = loss.derivative(r(i));
    d2(i) = loss.second_derivative(r(i));
  }
  out.value = total / n;
  out.gradient = data.features.transpose() * d1 / n;
  out.hessian =
      data.features.transpose() * d2.asDiagonal() * data.features / n;
  return out;
}

double loss_value(const RobustLoss& loss, const Vector& theta,
                  const RegressionDataset& data) {
  const Vector r = residuals(theta, data);
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += loss.value(r(i));
  return total / static_cast<double>(data.size());
}

Vector loss_gradient_sum(const RobustLoss& loss, const Vector& theta,
                         const RegressionDataset& data) {
  const Vector r = residuals(theta, data);
  const double scale = 1.0 / (2.0 * loss.alpha);
  const Vector d1 = (r * scale).array().tanh().matrix();
  return data.features.transpose() * d1;
}

// ---------------------------------------------------------------------------

double unit_ball_volume(int d) {
  const double half = 0.5 * static_cast<double>(d);
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

ParamDomain ParamDomain::ball(Vector center, double radius) {
  if (!(radius > 0.0) || center.size() == 0) {
    throw std::invalid_argument("ball domain: need positive radius, dim >= 1");
  }
  const auto d = center.size();
  return ParamDomain(Shape::Ball, std::move(center), Vector::Zero(d), radius);
}

ParamDomain ParamDomain::box(Vector low, Vector high) {
  if (low.size() != high.size() || low.size() == 0) {
    throw std::invalid_argument("box domain: bound dimensions differ");
  }
  if (!((high - low).array() > 0.0).all()) {
    throw std::invalid_argument("box domain: every side must be positive");
  }
  return ParamDomain(Shape::Box, std::move(low), std::move(high), 0.0);
}

double ParamDomain::volume() const {
  if (shape_ == Shape::Ball) {
    return unit_ball_volume(dim()) * std::pow(radius_, dim());
  }
  return (b_ - a_).prod();
}

bool ParamDomain::contains(const Vector& theta, double tol) const {
  if (theta.size() != a_.size()) return false;
  if (shape_ == Shape::Ball) return (theta - a_).norm() <= radius_ + tol;
  return ((theta.array() >= a_.array() - tol) &&
          (theta.array() <= b_.array() + tol))
      .all();
}

bool ParamDomain::on_boundary(const Vector& theta, double tol) const {
  if (shape_ == Shape::Ball) {
    return std::abs((theta - a_).norm() - radius_) <= tol;
  }
  return ((theta - a_).array().abs() <= tol).any() ||
         ((b_ - theta).array().abs() <= tol).any();
}

Vector ParamDomain::project(const Vector& theta) const {
  if (shape_ == Shape::Ball) {
    const Vector diff = theta - a_;
    const double norm = diff.norm();
    if (norm <= radius_) return theta;
    return a_ + diff * (radius_ / norm);
  }
  return theta.cwiseMax(a_).cwiseMin(b_);
}

Vector ParamDomain::center() const {
  return shape_ == Shape::Ball ? a_ : Vector(0.5 * (a_ + b_));
}

Vector ParamDomain::lower() const {
  return shape_ == Shape::Ball ? Vector(a_.array() - radius_) : a_;
}

Vector ParamDomain::upper() const {
  return shape_ == Shape::Ball ? Vector(a_.array() + radius_) : b_;
}

Vector ParamDomain::sample_uniform(SeededRng& rng) const {
  const int d = dim();
  Vector out(d);
  if (shape_ == Shape::Box) {
    for (int i = 0; i < d; ++i) out(i) = rng.uniform(a_(i), b_(i));
    return out;
  }
  const std::vector<double> u = sample_unit_sphere(d, rng);
  const double r = radius_ * std::pow(rng.uniform(), 1.0 / d);
  for (int i = 0; i < d; ++i) out(i) = a_(i) + r * u[static_cast<std::size_t>(i)];
  return out;
}

bool ParamDomain::contains_ellipsoid(const Vector& c, const Matrix& a,
                                     double r) const {
  const Matrix inv = a.inverse();
  if (shape_ == Shape::Ball) {
    const double op_norm =
        Eigen::JacobiSVD<Matrix>(inv).singularValues()(0);
    return (c - a_).norm() + r * op_norm <= radius_;
  }
  for (int i = 0; i < dim(); ++i) {
    const double reach = r * inv.row(i).norm();
    if (c(i) - reach < a_(i) || c(i) + reach > b_(i)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

double min_eigenvalue(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

ErmSolution finish(const RobustLoss& loss, const RegressionDataset& data,
                   const Vector& theta, bool on_boundary, int iterations) {
  const LossEval e = loss_eval(loss, theta, data);
  ErmSolution s;
  s.theta = theta;
  s.value = e.value;
  s.grad_norm = e.gradient.norm();
  s.hessian = e.hessian;
  s.lambda_min = min_eigenvalue(e.hessian);
  s.on_boundary = on_boundary;
  s.iterations = iterations;
  return s;
}

}  // namespace

ErmSolution solve_erm(const RobustLoss& loss, const RegressionDataset& data,
                      const ParamDomain& domain, ErmOptions options) {
  loss.validate();
  if (!(options.tol > 0.0)) {
    throw std::invalid_argument("solve_erm: tolerance must be positive");
  }
  if (data.size() == 0) throw std::invalid_argument("solve_erm: empty data");
  if (data.dim() != domain.dim()) {
    throw std::invalid_argument("solve_erm: domain dimension mismatch");
  }
  constexpr double kArmijo = 1e-4;
  const int d = domain.dim();
  Vector theta = domain.center();

  for (int it = 0; it < options.max_iterations; ++it) {
    const LossEval e = loss_eval(loss, theta, data);
    const double gnorm = e.gradient.norm();
    if (gnorm <= options.tol) return finish(loss, data, theta, false, it);

    // Stationary on the boundary: the projected gradient step does not move.
    const Vector pg = domain.project(theta - e.gradient) - theta;
    if (domain.on_boundary(theta, 1e-12) && pg.norm() <= options.tol) {
      return finish(loss, data, theta, true, it);
    }

    const double ridge = 1e-12 * std::max(1.0, e.hessian.trace());
    const Vector newton =
        (e.hessian + ridge * Matrix::Identity(d, d)).ldlt().solve(-e.gradient);

    bool moved = false;
    // Near the optimum the loss decrease drops below rounding and Armijo
    // cannot see it; a full Newton step that halves the gradient still counts.
    {
      const Vector candidate = domain.project(theta + newton);
      const LossEval c = loss_eval(loss, candidate, data);
      if (c.gradient.norm() <= 0.5 * gnorm &&
          c.value <= e.value + 1e-14 * (1.0 + std::abs(e.value))) {
        theta = candidate;
        continue;
      }
    }
    for (const Vector& direction : {newton, Vector(-e.gradient)}) {
      double step = 1.0;
      for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
        const Vector candidate = domain.project(theta + step * direction);
        const Vector delta = candidate - theta;
        if (delta.norm() <= 1e-16 * (1.0 + theta.norm())) break;
        const double f = loss_value(loss, candidate, data);
        if (f <= e.value + kArmijo * e.gradient.dot(delta)) {
          theta = candidate;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) {
      // No representable descent step: converged as far as doubles allow.
      const bool boundary = domain.on_boundary(theta, 1e-12);
      return finish(loss, data, theta, boundary, it);
    }
  }
  throw std::runtime_error("solve_erm: no convergence within " +
                           std::to_string(options.max_iterations) +
                           " iterations");
}

std::int64_t user_addition_len(const RegressionDataset& data,
                               const Vector& theta, const RobustLoss& loss) {
  const double v = loss_gradient_sum(loss, theta, data).norm() / data.norm_bound;
  return std::max<std::int64_t>(
      0, static_cast<std::int64_t>(std::ceil(v - kLengthSlack)));
}

double target_log_density(const RegressionDataset& data, const Vector& theta,
                          double epsilon, const RobustLoss& loss,
                          const ParamDomain& domain) {
  if (!domain.contains(theta)) return -std::numeric_limits<double>::infinity();
  return -0.5 * epsilon *
         static_cast<double>(user_addition_len(data, theta, loss));
}

// ---------------------------------------------------------------------------

OneDimLengthIndex::OneDimLengthIndex(const RegressionDataset& data,
                                     const RobustLoss& loss, double low,
                                     double high)
    : low_(low), high_(high) {
  if (data.dim() != 1) {
    throw std::invalid_argument("length index: data must be one-dimensional");
  }
  if (!(low < high)) throw std::invalid_argument("length index: empty range");
  const auto g = [&](double t) {
    return loss_gradient_sum(loss, Vector::Constant(1, t), data)(0) /
           data.norm_bound;
  };
  const double g_low = g(low);
  const double g_high = g(high);
  const auto levels = static_cast<std::int64_t>(
      std::ceil(std::max(std::abs(g_low), std::abs(g_high)))) + 1;

  const auto bisect = [&](auto predicate) {
    // Largest t in [low, high] with predicate(t) true; predicate monotone
    // true-then-false.
    if (!predicate(low)) return low;
    if (predicate(high)) return high;
    double a = low, b = high;
    for (int i = 0; i < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() *
                                            std::max(std::abs(a), std::abs(b));
         ++i) {
      const double mid = 0.5 * (a + b);
      (predicate(mid) ? a : b) = mid;
    }
    return a;
  };

  upper_.reserve(static_cast<std::size_t>(levels));
  lower_.reserve(static_cast<std::size_t>(levels));
  for (std::int64_t k = 0; k < levels; ++k) {
    const double level = static_cast<double>(k) + kLengthSlack;
    upper_.push_back(bisect([&](double t) { return g(t) <= level; }));
    // Smallest t with g(t) >= -level, found as the end of the region below.
    const double below_end = bisect([&](double t) { return g(t) < -level; });
    lower_.push_back(g(low) >= -level ? low : below_end);
  }
}

std::int64_t OneDimLengthIndex::length(double theta) const {
  // First k with theta <= upper_[k] (upper_ nondecreasing in k).
  const auto ku = std::lower_bound(upper_.begin(), upper_.end(), theta) -
                  upper_.begin();
  // First k with theta >= lower_[k] (lower_ nonincreasing in k).
  const auto kl =
      std::lower_bound(lower_.begin(), lower_.end(), theta,
                       [](double bound, double t) { return bound > t; }) -
      lower_.begin();
  return static_cast<std::int64_t>(std::max(ku, kl));
}

std::vector<double> OneDimLengthIndex::breakpoints() const {
  std::vector<double> points{low_, high_};
  for (double u : upper_) points.push_back(u);
  for (double l : lower_) points.push_back(l);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

double OneDimLengthIndex::integrate(double a, double b, double epsilon) const {
  a = std::max(a, low_);
  b = std::min(b, high_);
  if (!(a < b)) return 0.0;
  const std::vector<double> points = breakpoints();
  double total = 0.0;
  double left = a;
  for (double p : points) {
    if (p <= left) continue;
    const double right = std::min(p, b);
    const double mid = 0.5 * (left + right);
    total += (right - left) *
             std::exp(-0.5 * epsilon * static_cast<double>(length(mid)));
    left = right;
    if (left >= b) break;
  }
  if (left < b) {
    total += (b - left) *
             std::exp(-0.5 * epsilon * static_cast<double>(length(0.5 * (left + b))));
  }
  return total;
}

}  // namespace ism
