#include "ism/samplers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ism/core.hpp"

namespace ism {

double regularized_gamma_p(int d, double x) {
  if (d < 1) throw std::invalid_argument("gamma p: shape must be >= 1");
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double a = static_cast<double>(d);
  if (x < a + 1.0) {
    // e^{-x} x^a / Gamma(a + 1) * sum_k x^k / ((a+1)...(a+k))
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 1000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a + 1.0)) * sum;
  }
  // Q(d, x) = e^{-x} sum_{k<d} x^k / k!
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < d; ++k) {
    term *= x / k;
    sum += term;
  }
  return 1.0 - std::exp(-x + std::log(sum));
}

namespace {

void require_positive_definite(const Matrix& h, const char* what) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square");
  }
  Eigen::LLT<Matrix> llt(0.5 * (h + h.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) +
                                ": matrix must be positive definite");
  }
}

double log_abs_det(const Matrix& a) {
  return std::log(std::abs(a.determinant()));
}

double log_unit_ball_volume(int d) {
  const double half = 0.5 * d;
  return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

Vector sphere_vector(int d, SeededRng& rng) {
  const std::vector<double> u = sample_unit_sphere(d, rng);
  return Eigen::Map<const Vector>(u.data(), d);
}

}  // namespace

double gamma_like_log_normalizer(const Matrix& a) {
  const int d = static_cast<int>(a.rows());
  return std::log(static_cast<double>(d)) + log_unit_ball_volume(d) +
         std::lgamma(static_cast<double>(d)) - log_abs_det(a);
}

Vector direct_heuristic_sampler(const Matrix& hessian, const Vector& theta_n,
                                double epsilon, double norm_bound,
                                std::size_t n, SeededRng& rng) {
  require_positive_definite(hessian, "direct sampler");
  if (!(epsilon > 0.0) || !(norm_bound > 0.0) || n == 0) {
    throw std::invalid_argument("direct sampler: need epsilon, Bx, n > 0");
  }
  const int d = static_cast<int>(hessian.rows());
  const double scale =
      2.0 * norm_bound / (static_cast<double>(n) * epsilon);
  const double r = sample_gamma_radius(d, rng);
  const Vector u = sphere_vector(d, rng);
  return theta_n + scale * r * hessian.ldlt().solve(u);
}

double default_proposal_radius(std::size_t n) {
  return std::pow(static_cast<double>(n), -0.7);
}

BoundedProposal::BoundedProposal(Matrix hessian, Vector theta_n, double rate,
                                 double cap, ParamDomain domain)
    : hessian_(std::move(hessian)),
      theta_n_(std::move(theta_n)),
      rate_(rate),
      cap_(cap),
      domain_(std::move(domain)) {
  require_positive_definite(hessian_, "bounded proposal");
  if (!(rate_ > 0.0) || !(cap_ > 0.0)) {
    throw std::invalid_argument("bounded proposal: rate and cap must be > 0");
  }
  const int d = static_cast<int>(hessian_.rows());
  if (theta_n_.size() != d || domain_.dim() != d) {
    throw std::invalid_argument("bounded proposal: dimension mismatch");
  }
  if (!domain_.contains_ellipsoid(theta_n_, hessian_, cap_)) {
    throw std::invalid_argument(
        "bounded proposal: ellipsoid around theta_n leaves the domain");
  }
  inverse_ = hessian_.inverse();
  const double log_det = log_abs_det(hessian_);
  const double dd = static_cast<double>(d);
  inner_gamma_p_ = regularized_gamma_p(d, rate_ * cap_);
  // (1/det H) d V_d Gamma(d) P(d, rate cap) / rate^d
  inner_mass_ = std::exp(std::log(dd) + log_unit_ball_volume(d) +
                         std::lgamma(dd) - dd * std::log(rate_) - log_det) *
                inner_gamma_p_;
  const double ellipsoid =
      std::exp(log_unit_ball_volume(d) + dd * std::log(cap_) - log_det);
  outer_mass_ = std::exp(-rate_ * cap_) *
                std::max(0.0, domain_.volume() - ellipsoid);
  log_total_ = std::log(inner_mass_ + outer_mass_);
}

BoundedProposal BoundedProposal::for_regression(
    const Matrix& hessian, const Vector& theta_n, double epsilon,
    std::size_t n, double r_n, double norm_bound, const ParamDomain& domain) {
  if (!(epsilon > 0.0) || !(norm_bound > 0.0) || n == 0 || !(r_n > 0.0)) {
    throw std::invalid_argument("bounded proposal: invalid parameters");
  }
  const double rate =
      static_cast<double>(n) * epsilon / (2.0 * norm_bound);
  return BoundedProposal(hessian, theta_n, rate, r_n * norm_bound, domain);
}

Vector BoundedProposal::sample(SeededRng& rng) const {
  const int d = static_cast<int>(hessian_.rows());
  if (rng.uniform() < inner_probability()) {
    const double limit = rate_ * cap_;
    double x;
    if (inner_gamma_p_ > 0.25) {
      do {
        x = sample_gamma_radius(d, rng);
      } while (x > limit);
    } else {
      // Invert the truncated gamma CDF by bisection.
      const double target = rng.uniform() * inner_gamma_p_;
      double lo = 0.0, hi = limit;
      for (int i = 0; i < 200 && hi - lo > 1e-15 * limit; ++i) {
        const double mid = 0.5 * (lo + hi);
        (regularized_gamma_p(d, mid) < target ? lo : hi) = mid;
      }
      x = 0.5 * (lo + hi);
    }
    const Vector u = sphere_vector(d, rng);
    return theta_n_ + (x / rate_) * (inverse_ * u);
  }
  for (;;) {
    Vector theta = domain_.sample_uniform(rng);
    if ((hessian_ * (theta - theta_n_)).norm() > cap_) return theta;
  }
}

double BoundedProposal::log_density(const Vector& theta) const {
  if (!domain_.contains(theta)) return -std::numeric_limits<double>::infinity();
  const double s = (hessian_ * (theta - theta_n_)).norm();
  return -rate_ * std::min(s, cap_) - log_total_;
}

Vector sample_proposal_q(const Matrix& hessian, const Vector& theta_n,
                         double epsilon, std::size_t n, double r_n,
                         double norm_bound, const ParamDomain& domain,
                         SeededRng& rng) {
  return BoundedProposal::for_regression(hessian, theta_n, epsilon, n, r_n,
                                         norm_bound, domain)
      .sample(rng);
}

QuadratureGrid midpoint_grid(const ParamDomain& domain, int cells_per_dim) {
  const int d = domain.dim();
  if (d > 2) throw std::invalid_argument("midpoint grid: only d <= 2");
  if (cells_per_dim < 1) {
    throw std::invalid_argument("midpoint grid: need at least one cell");
  }
  const Vector lo = domain.lower();
  const Vector width = (domain.upper() - lo) / cells_per_dim;
  QuadratureGrid grid;
  grid.cell_volume = width.prod();
  if (d == 1) {
    for (int i = 0; i < cells_per_dim; ++i) {
      grid.points.push_back(Vector::Constant(1, lo(0) + (i + 0.5) * width(0)));
    }
    return grid;
  }
  for (int i = 0; i < cells_per_dim; ++i) {
    for (int j = 0; j < cells_per_dim; ++j) {
      Vector p(2);
      p << lo(0) + (i + 0.5) * width(0), lo(1) + (j + 0.5) * width(1);
      grid.points.push_back(p);
    }
  }
  return grid;
}

RegressionRelease inverse_sensitivity_regression(
    const RegressionDataset& data, const RobustLoss& loss,
    const ParamDomain& domain, double epsilon, SeededRng& rng,
    RegressionMechanismOptions options) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("regression mechanism: epsilon must be > 0");
  }
  RegressionRelease out;
  out.erm = solve_erm(loss, data, domain);
  const double r_n =
      options.r_n > 0.0 ? options.r_n : default_proposal_radius(data.size());
  const BoundedProposal proposal = BoundedProposal::for_regression(
      out.erm.hessian, out.erm.theta, epsilon, data.size(), r_n,
      data.norm_bound, domain);
  out.chain = mh_sampler(
      [&](const Vector& t) {
        return target_log_density(data, t, epsilon, loss, domain);
      },
      [&](SeededRng& r) { return proposal.sample(r); },
      [&](const Vector& t) { return proposal.log_density(t); },
      options.mh_steps, out.erm.theta, rng);
  out.theta = out.chain.state;
  return out;
}

}  // namespace ism
