#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <vector>

namespace movsrc {

/// A nonlinear least-squares problem min 1/2 ||r(x)||^2 with an analytic
/// Jacobian.
template <class P>
concept LeastSquaresProblem = requires(const P& p, const Eigen::VectorXd& x) {
  { p.residual(x) } -> std::convertible_to<Eigen::VectorXd>;
  { p.jacobian(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

struct GaussNewtonOptions {
  int max_iterations = 200;
  /// Stop when an accepted step lowers the cost by less than this fraction.
  double relative_drop_tol = 1e-10;
  /// Stop immediately once the cost is at or below this value.
  double target_cost = 0.0;
  double initial_damping = 1e-3;
  double max_damping = 1e16;
};

struct GaussNewtonResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // 1/2 ||r||^2
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  std::vector<double> cost_history;  // cost after each accepted step
};

/**
 * Damped Gauss-Newton (Levenberg-Marquardt with Marquardt scaling).
 * Each trial step solves (J^T J + mu D) dx = -J^T r with D = diag(J^T J); mu is
 * divided by 10 after an accepted step and multiplied by 10 after a
 * rejected one.
 */
template <LeastSquaresProblem Problem>
GaussNewtonResult damped_gauss_newton(const Problem& problem, Eigen::VectorXd x0,
                                      const GaussNewtonOptions& opt = {}) {
  GaussNewtonResult res;
  res.x = std::move(x0);
  Eigen::VectorXd r = problem.residual(res.x);
  res.cost = 0.5 * r.squaredNorm();
  res.cost_history.push_back(res.cost);
  if (res.cost <= opt.target_cost) {
    res.converged = true;
    return res;
  }

  double mu = opt.initial_damping;
  Eigen::MatrixXd J = problem.jacobian(res.x);
  while (res.iterations < opt.max_iterations) {
    ++res.iterations;
    // The damped step minimizes ||J dx + r||^2 + mu ||D^{1/2} dx||^2; solving
    // it as an augmented least-squares problem by QR avoids squaring the
    // condition number of J.
    Eigen::VectorXd D = J.colwise().squaredNorm().transpose();
    const double dmax = D.maxCoeff();
    D = D.cwiseMax(1e-12 * (dmax > 0.0 ? dmax : 1.0));
    const Eigen::Index m = J.rows(), n = J.cols();
    Eigen::MatrixXd A(m + n, n);
    A.topRows(m) = J;
    A.bottomRows(n) = (mu * D).cwiseSqrt().asDiagonal();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + n);
    b.head(m) = -r;
    const Eigen::VectorXd dx = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd x_new = res.x + dx;
    const Eigen::VectorXd r_new = problem.residual(x_new);
    const double cost_new = 0.5 * r_new.squaredNorm();

    if (std::isfinite(cost_new) && cost_new < res.cost) {
      const double drop = (res.cost - cost_new) / res.cost;
      res.x = x_new;
      r = r_new;
      res.cost = cost_new;
      res.cost_history.push_back(cost_new);
      ++res.accepted_steps;
      mu = std::max(mu / 10.0, 1e-15);
      if (drop < opt.relative_drop_tol || res.cost <= opt.target_cost) {
        res.converged = true;
        break;
      }
      J = problem.jacobian(res.x);
    } else {
      mu *= 10.0;
      if (mu > opt.max_damping) {
        // No descent direction left at working precision: a stationary point.
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace movsrc
