#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ism/core.hpp"

namespace ism {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Rows (x_i, y_i) with a public bound ||x_i||_2 <= Bx.
struct RegressionDataset {
  Matrix features;  // n x d
  Vector targets;   // n
  double norm_bound = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  // Throws std::invalid_argument on shape mismatch or a row norm above Bx.
  void validate() const;
  RegressionDataset with_row(const Vector& x, double y) const;
};

// alpha-insensitive loss h(t) = a log(1 + e^{t/a}) + a log(1 + e^{-t/a}).
struct RobustLoss {
  double alpha = 1.0;

  // |t| + 2a log1p(e^{-|t|/a}); finite for every finite t.
  double value(double t) const;
  // tanh(t / 2a).
  double derivative(double t) const;
  // sech^2(t / 2a) / (2a); at most 1 / (2a).
  double second_derivative(double t) const;
  void validate() const;
};

struct LossEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

// L_n(theta) = (1/n) sum_i h(<theta, x_i> - y_i) with gradient and Hessian.
LossEval loss_eval(const RobustLoss& loss, const Vector& theta,
                   const RegressionDataset& data);
double loss_value(const RobustLoss& loss, const Vector& theta,
                  const RegressionDataset& data);
// sum_i h'(<theta, x_i> - y_i) x_i, i.e. n * grad L_n(theta).
Vector loss_gradient_sum(const RobustLoss& loss, const Vector& theta,
                         const RegressionDataset& data);

// Parameter set: a Euclidean ball or an axis-aligned box.
class ParamDomain {
 public:
  enum class Shape { Ball, Box };

  static ParamDomain ball(Vector center, double radius);
  static ParamDomain box(Vector low, Vector high);

  Shape shape() const { return shape_; }
  int dim() const { return static_cast<int>(a_.size()); }
  double volume() const;
  bool contains(const Vector& theta, double tol = 0.0) const;
  bool on_boundary(const Vector& theta, double tol) const;
  Vector project(const Vector& theta) const;
  Vector center() const;
  Vector lower() const;  // bounding box
  Vector upper() const;
  Vector sample_uniform(SeededRng& rng) const;
  // Whether {c + A^{-1} u : ||u|| <= r} lies inside the domain. Exact for
  // boxes; for balls a sufficient check through the operator norm of A^{-1}.
  bool contains_ellipsoid(const Vector& c, const Matrix& a, double r) const;

 private:
  ParamDomain(Shape shape, Vector a, Vector b, double radius)
      : shape_(shape), a_(std::move(a)), b_(std::move(b)), radius_(radius) {}

  Shape shape_;
  Vector a_;  // ball center or box low
  Vector b_;  // box high (unused for balls)
  double radius_ = 0.0;
};

// Volume of the unit Euclidean ball in R^d.
double unit_ball_volume(int d);

struct ErmSolution {
  Vector theta;
  double value = 0.0;
  double grad_norm = 0.0;
  Matrix hessian;
  double lambda_min = 0.0;
  bool on_boundary = false;
  int iterations = 0;
};

struct ErmOptions {
  double tol = 1e-10;
  int max_iterations = 200;
};

// Projected damped Newton with Armijo backtracking, started from the domain
// center. Minimizers on the boundary are returned with on_boundary set.
// Throws std::runtime_error when the iteration cap is hit.
ErmSolution solve_erm(const RobustLoss& loss, const RegressionDataset& data,
                      const ParamDomain& domain, ErmOptions options = {});

// Slack subtracted before the ceiling so that an exact minimizer, whose
// gradient is zero only up to rounding, gets length 0. Any fixed shift keeps
// the length 1-Lipschitz under row additions.
inline constexpr double kLengthSlack = 1e-9;

// ceil(n ||grad L_n(theta)|| / Bx), the fewest added rows making theta a
// minimizer (valid when the minimizer is interior).
std::int64_t user_addition_len(const RegressionDataset& data,
                               const Vector& theta, const RobustLoss& loss);

// -(epsilon / 2) * user_addition_len, or -inf outside the domain.
double target_log_density(const RegressionDataset& data, const Vector& theta,
                          double epsilon, const RobustLoss& loss,
                          const ParamDomain& domain);

// One-dimensional fast path: the scalar gradient sum is nondecreasing in
// theta, so the length is determined by two monotone breakpoint tables.
class OneDimLengthIndex {
 public:
  OneDimLengthIndex(const RegressionDataset& data, const RobustLoss& loss,
                    double low, double high);

  std::int64_t length(double theta) const;
  double low() const { return low_; }
  double high() const { return high_; }
  // Points where the length changes, sorted, including low and high.
  std::vector<double> breakpoints() const;
  // Exact integral of exp(-(epsilon/2) len) over [a, b] within the range.
  double integrate(double a, double b, double epsilon) const;

 private:
  double low_;
  double high_;
  // upper_[k]: largest theta with g(theta) <= (k + slack) Bx.
  std::vector<double> upper_;
  // lower_[k]: smallest theta with g(theta) >= -(k + slack) Bx.
  std::vector<double> lower_;
};

}  // namespace ism
