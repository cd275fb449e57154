#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ism/regression.hpp"
#include "ism/rng.hpp"

namespace ism {

// Regularized lower incomplete gamma P(d, x) for integer d >= 1.
double regularized_gamma_p(int d, double x);

// log of the integral of exp(-||A t||) over R^d:
//   d pi^{d/2} Gamma(d) / (det A Gamma(d/2 + 1)).
double gamma_like_log_normalizer(const Matrix& a);

// theta_n + (2 Bx / (n epsilon)) H^{-1} R U with R ~ Gamma(d, 1) and U uniform
// on the sphere; density proportional to exp(-(n epsilon / (2 Bx)) ||H delta||).
// Throws std::invalid_argument if H is not positive definite.
Vector direct_heuristic_sampler(const Matrix& hessian, const Vector& theta_n,
                                double epsilon, double norm_bound,
                                std::size_t n, SeededRng& rng);

// r_n = n^{-0.7}.
double default_proposal_radius(std::size_t n);

// q(theta) proportional to exp(-rate * min(||H (theta - theta_n)||, cap)) on
// the domain. Drawn exactly as a mixture of a truncated gamma-like inner part
// and a flat outer part.
class BoundedProposal {
 public:
  // Throws std::invalid_argument unless H is positive definite and the
  // ellipsoid {||H (theta - theta_n)|| <= cap} lies inside the domain.
  BoundedProposal(Matrix hessian, Vector theta_n, double rate, double cap,
                  ParamDomain domain);

  // rate = n epsilon / (2 Bx), cap = r_n Bx.
  static BoundedProposal for_regression(const Matrix& hessian,
                                        const Vector& theta_n, double epsilon,
                                        std::size_t n, double r_n,
                                        double norm_bound,
                                        const ParamDomain& domain);

  Vector sample(SeededRng& rng) const;
  // Normalized; -inf outside the domain.
  double log_density(const Vector& theta) const;
  double inner_mass() const { return inner_mass_; }
  double outer_mass() const { return outer_mass_; }
  double inner_probability() const {
    return inner_mass_ / (inner_mass_ + outer_mass_);
  }
  const ParamDomain& domain() const { return domain_; }

 private:
  Matrix hessian_;
  Matrix inverse_;
  Vector theta_n_;
  double rate_;
  double cap_;
  ParamDomain domain_;
  double inner_mass_ = 0.0;
  double outer_mass_ = 0.0;
  double inner_gamma_p_ = 0.0;  // P(d, rate * cap)
  double log_total_ = 0.0;
};

Vector sample_proposal_q(const Matrix& hessian, const Vector& theta_n,
                         double epsilon, std::size_t n, double r_n,
                         double norm_bound, const ParamDomain& domain,
                         SeededRng& rng);

struct MhResult {
  Vector state;
  int steps = 0;
  int accepted = 0;
  double acceptance_rate() const {
    return steps == 0 ? 0.0 : static_cast<double>(accepted) / steps;
  }
};

// Independence Metropolis-Hastings: propose t ~ q and accept with probability
// min{pi(t) q(theta) / (pi(theta) q(t)), 1}. Densities are logs, up to
// constants.
template <class LogTarget, class Propose, class LogProposal>
MhResult mh_sampler(LogTarget&& log_target, Propose&& propose,
                    LogProposal&& log_proposal, int steps, Vector init,
                    SeededRng& rng) {
  MhResult out;
  out.state = std::move(init);
  double cur_target = log_target(out.state);
  double cur_proposal = log_proposal(out.state);
  for (int s = 0; s < steps; ++s) {
    Vector cand = propose(rng);
    const double cand_target = log_target(cand);
    const double cand_proposal = log_proposal(cand);
    ++out.steps;
    if (cand_target == -std::numeric_limits<double>::infinity()) continue;
    bool accept;
    if (cur_target == -std::numeric_limits<double>::infinity()) {
      accept = true;
    } else {
      const double log_ratio =
          cand_target + cur_proposal - cur_target - cand_proposal;
      accept = log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio;
    }
    if (accept) {
      out.state = std::move(cand);
      cur_target = cand_target;
      cur_proposal = cand_proposal;
      ++out.accepted;
    }
  }
  return out;
}

// Cell midpoints of a uniform grid over the domain's bounding box, d <= 2.
struct QuadratureGrid {
  std::vector<Vector> points;
  double cell_volume = 0.0;
};
QuadratureGrid midpoint_grid(const ParamDomain& domain, int cells_per_dim);

// min over grid points inside the domain of q/pi, each normalized by
// quadrature on the grid.
template <class LogTarget>
double proposal_ratio_check(const BoundedProposal& proposal,
                            LogTarget&& log_target, const QuadratureGrid& grid) {
  std::vector<double> lq, lp;
  double max_q = -std::numeric_limits<double>::infinity();
  double max_p = max_q;
  for (const Vector& p : grid.points) {
    if (!proposal.domain().contains(p)) continue;
    lq.push_back(proposal.log_density(p));
    lp.push_back(log_target(p));
    max_q = std::max(max_q, lq.back());
    max_p = std::max(max_p, lp.back());
  }
  if (lq.empty()) return 0.0;
  double zq = 0.0, zp = 0.0;
  for (std::size_t i = 0; i < lq.size(); ++i) {
    zq += std::exp(lq[i] - max_q);
    zp += std::exp(lp[i] - max_p);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lq.size(); ++i) {
    const double log_ratio =
        (lq[i] - max_q - std::log(zq)) - (lp[i] - max_p - std::log(zp));
    best = std::min(best, std::exp(log_ratio));
  }
  return best;
}

struct RegressionRelease {
  Vector theta;
  ErmSolution erm;
  MhResult chain;
};

struct RegressionMechanismOptions {
  int mh_steps = 500;
  // Unset means default_proposal_radius(n).
  double r_n = 0.0;
};

// The inverse-sensitivity release: solve the ERM, build the bounded proposal
// around it and run the MH chain from the minimizer.
RegressionRelease inverse_sensitivity_regression(
    const RegressionDataset& data, const RobustLoss& loss,
    const ParamDomain& domain, double epsilon, SeededRng& rng,
    RegressionMechanismOptions options = {});

}  // namespace ism
