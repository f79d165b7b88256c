#include "mppi_lab/covariance.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "mppi_lab/errors.hpp"

namespace mppi_lab {

struct CovarianceSpec::Factor {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd lower;  // chol(sigma)
  double log_det = 0.0;   // log det(sigma)
};

namespace {

void check_scale(double scale) {
  if (!(std::isfinite(scale) && scale > 0.0)) {
    throw Error(ErrorCode::kCovarianceInvalid,
                "covariance scale beta^2 must be finite and > 0, got " +
                    std::to_string(scale));
  }
}

}  // namespace

CovarianceSpec::CovarianceSpec(Eigen::MatrixXd per_step, int horizon,
                               double scale)
    : horizon_(horizon), scale_(scale) {
  require(horizon >= 1, "covariance horizon must be >= 1");
  check_scale(scale);
  if (per_step.rows() == 0 || per_step.rows() != per_step.cols() ||
      !per_step.allFinite()) {
    throw Error(ErrorCode::kCovarianceInvalid,
                "per-step covariance must be a finite non-empty square matrix");
  }
  const double asym = (per_step - per_step.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, per_step.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::kCovarianceInvalid,
                "per-step covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(per_step);
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
    throw Error(ErrorCode::kCovarianceInvalid,
                "per-step covariance is not positive definite");
  }
  auto factor = std::make_shared<Factor>();
  factor->lower = llt.matrixL();
  factor->log_det = 2.0 * factor->lower.diagonal().array().log().sum();
  factor->sigma = std::move(per_step);
  factor_ = std::move(factor);
}

CovarianceSpec::CovarianceSpec(std::shared_ptr<const Factor> factor,
                               int horizon, double scale)
    : factor_(std::move(factor)), horizon_(horizon), scale_(scale) {
  check_scale(scale);
}

CovarianceSpec CovarianceSpec::scalar(double variance, int horizon,
                                      double scale) {
  return CovarianceSpec(Eigen::MatrixXd::Constant(1, 1, variance), horizon,
                        scale);
}

CovarianceSpec CovarianceSpec::with_scale(double scale) const {
  return CovarianceSpec(factor_, horizon_, scale);
}

const Eigen::MatrixXd& CovarianceSpec::per_step() const {
  return factor_->sigma;
}

int CovarianceSpec::step_dim() const {
  return static_cast<int>(factor_->sigma.rows());
}

double CovarianceSpec::beta() const { return std::sqrt(scale_); }

Eigen::MatrixXd CovarianceSpec::cholesky() const {
  return std::sqrt(scale_) * factor_->lower;
}

Eigen::VectorXd CovarianceSpec::solve(
    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  require(v.size() == lifted_dim(), "covariance solve: dimension mismatch");
  const int d = step_dim();
  const auto lower = factor_->lower.triangularView<Eigen::Lower>();
  Eigen::VectorXd out(v.size());
  for (int k = 0; k < horizon_; ++k) {
    Eigen::VectorXd block = v.segment(k * d, d);
    lower.solveInPlace(block);
    lower.transpose().solveInPlace(block);
    out.segment(k * d, d) = block / scale_;
  }
  return out;
}

double CovarianceSpec::quadratic_form(
    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  require(v.size() == lifted_dim(),
          "covariance quadratic form: dimension mismatch");
  const int d = step_dim();
  const auto lower = factor_->lower.triangularView<Eigen::Lower>();
  double total = 0.0;
  for (int k = 0; k < horizon_; ++k) {
    Eigen::VectorXd block = v.segment(k * d, d);
    lower.solveInPlace(block);
    total += block.squaredNorm();
  }
  return total / scale_;
}

Eigen::VectorXd CovarianceSpec::color(
    const Eigen::Ref<const Eigen::VectorXd>& z) const {
  require(z.size() == lifted_dim(), "covariance color: dimension mismatch");
  const int d = step_dim();
  const double beta = std::sqrt(scale_);
  Eigen::VectorXd out(z.size());
  for (int k = 0; k < horizon_; ++k) {
    out.segment(k * d, d) =
        factor_->lower.triangularView<Eigen::Lower>() * z.segment(k * d, d);
    out.segment(k * d, d) *= beta;
  }
  return out;
}

double CovarianceSpec::log_det() const {
  return horizon_ * (factor_->log_det + step_dim() * std::log(scale_));
}

}  // namespace mppi_lab
