#ifndef MPPI_LAB_QUADRATURE_HPP_
#define MPPI_LAB_QUADRATURE_HPP_

#include <Eigen/Core>

#include "mppi_lab/covariance.hpp"

namespace mppi_lab {

// Gauss-Hermite rule for E[g(z)], z ~ N(0, 1): sum_i weights[i] g(nodes[i]).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  int order() const { return static_cast<int>(nodes.size()); }
};

// Golub-Welsch on the probabilists' Hermite Jacobi matrix.
QuadratureRule gauss_hermite(int order);

// Tensor-product rule for W ~ N(0, scale * Sigma_bar); row i of `nodes` is a
// lifted noise trajectory.
struct TensorQuadrature {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd weights;

  int count() const { return static_cast<int>(weights.size()); }
};

// throws kContractViolation when order^dim exceeds max_nodes
TensorQuadrature tensor_rule(const QuadratureRule& rule,
                             const CovarianceSpec& cov,
                             long max_nodes = 1'000'000);

}  // namespace mppi_lab

#endif  // MPPI_LAB_QUADRATURE_HPP_
