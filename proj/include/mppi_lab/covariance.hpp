#ifndef MPPI_LAB_COVARIANCE_HPP_
#define MPPI_LAB_COVARIANCE_HPP_

#include <Eigen/Core>

#include <memory>

namespace mppi_lab {

// Per-step covariance Sigma and its N-fold block-diagonal lift, scaled by
// beta^2: lifted = beta^2 * diag(Sigma, ..., Sigma). The lift is never
// materialized; all operations work blockwise on the cached factor of Sigma.
class CovarianceSpec {
 public:
  // throws kCovarianceInvalid unless Sigma is symmetric positive definite and
  // scale = beta^2 is finite and > 0
  CovarianceSpec(Eigen::MatrixXd per_step, int horizon, double scale = 1.0);

  static CovarianceSpec scalar(double variance, int horizon,
                               double scale = 1.0);

  // same Sigma, different beta^2
  CovarianceSpec with_scale(double scale) const;

  const Eigen::MatrixXd& per_step() const;
  int horizon() const { return horizon_; }
  int step_dim() const;
  int lifted_dim() const { return horizon_ * step_dim(); }
  double scale() const { return scale_; }
  double beta() const;

  // lower Cholesky factor of scale * Sigma
  Eigen::MatrixXd cholesky() const;

  // (scale * Sigma_bar)^{-1} v, blockwise
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  // v^T (scale * Sigma_bar)^{-1} v
  double quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  // maps a standard-normal lifted vector z to L z with L L^T = scale*Sigma_bar
  Eigen::VectorXd color(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  // log det(scale * Sigma_bar)
  double log_det() const;

 private:
  struct Factor;
  CovarianceSpec(std::shared_ptr<const Factor> factor, int horizon,
                 double scale);

  std::shared_ptr<const Factor> factor_;
  int horizon_;
  double scale_;
};

}  // namespace mppi_lab

#endif  // MPPI_LAB_COVARIANCE_HPP_
