#include "mppi_lab/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "mppi_lab/errors.hpp"

namespace mppi_lab {

QuadratureRule gauss_hermite(int order) {
  require(order >= 1, "quadrature order must be >= 1");
  // He_{k+1} = x He_k - k He_{k-1}: zero diagonal, off-diagonal sqrt(k)
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).array().square().transpose();
  // symmetrize against eigensolver round-off
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

TensorQuadrature tensor_rule(const QuadratureRule& rule,
                             const CovarianceSpec& cov, long max_nodes) {
  const int dim = cov.lifted_dim();
  const int q = rule.order();
  long count = 1;
  for (int d = 0; d < dim; ++d) {
    count *= q;
    require(count <= max_nodes,
            "tensor quadrature with " + std::to_string(q) + "^" +
                std::to_string(dim) + " nodes exceeds the node budget");
  }
  TensorQuadrature out;
  out.nodes.resize(count, dim);
  out.weights.resize(count);
  Eigen::VectorXd z(dim);
  std::vector<int> index(dim, 0);
  for (long i = 0; i < count; ++i) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      z[d] = rule.nodes[index[d]];
      w *= rule.weights[index[d]];
    }
    out.nodes.row(i) = cov.color(z).transpose();
    out.weights[i] = w;
    for (int d = dim - 1; d >= 0; --d) {
      if (++index[d] < q) break;
      index[d] = 0;
    }
  }
  return out;
}

}  // namespace mppi_lab
