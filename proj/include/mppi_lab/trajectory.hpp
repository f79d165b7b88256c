#ifndef MPPI_LAB_TRAJECTORY_HPP_
#define MPPI_LAB_TRAJECTORY_HPP_

#include <Eigen/Core>

#include <string>
#include <utility>

#include "mppi_lab/errors.hpp"

namespace mppi_lab {

using StateVector = Eigen::VectorXd;

// Flat trajectory of `horizon` blocks, each `step_dim` long:
// values = (v_0, v_1, ..., v_{N-1}).
template <class Tag>
class BlockTrajectory {
 public:
  BlockTrajectory() = default;

  BlockTrajectory(int horizon, int step_dim)
      : horizon_(horizon),
        step_dim_(step_dim),
        values_(Eigen::VectorXd::Zero(Eigen::Index{horizon} * step_dim)) {
    require(horizon >= 1 && step_dim >= 1,
            "trajectory needs horizon >= 1 and step_dim >= 1");
  }

  BlockTrajectory(int horizon, int step_dim, Eigen::VectorXd values)
      : horizon_(horizon), step_dim_(step_dim), values_(std::move(values)) {
    require(horizon >= 1 && step_dim >= 1,
            "trajectory needs horizon >= 1 and step_dim >= 1");
    require(values_.size() == Eigen::Index{horizon} * step_dim,
            "trajectory length " + std::to_string(values_.size()) +
                " != horizon*step_dim " +
                std::to_string(horizon * step_dim));
    require(values_.allFinite(), "trajectory entries must be finite");
  }

  int horizon() const { return horizon_; }
  int step_dim() const { return step_dim_; }
  Eigen::Index size() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  auto step(int k) const { return values_.segment(k * step_dim_, step_dim_); }
  auto step(int k) { return values_.segment(k * step_dim_, step_dim_); }

  double operator[](Eigen::Index i) const { return values_[i]; }

  friend bool operator==(const BlockTrajectory& a, const BlockTrajectory& b) {
    return a.horizon_ == b.horizon_ && a.step_dim_ == b.step_dim_ &&
           a.values_ == b.values_;
  }

 private:
  int horizon_ = 0;
  int step_dim_ = 0;
  Eigen::VectorXd values_;
};

struct ControlTag {};
struct NoiseTag {};

// U = (u_0, ..., u_{N-1})
using ControlTrajectory = BlockTrajectory<ControlTag>;
// W = (w_0, ..., w_{N-1}); also used for V = U + W
using NoiseTrajectory = BlockTrajectory<NoiseTag>;

// V = U + W for noise entering additively on the control channel.
inline NoiseTrajectory perturbed(const ControlTrajectory& u,
                                 const NoiseTrajectory& w) {
  require(u.horizon() == w.horizon() && u.step_dim() == w.step_dim(),
          "U and W must share horizon and step dimension");
  return NoiseTrajectory(u.horizon(), u.step_dim(), u.values() + w.values());
}

}  // namespace mppi_lab

#endif  // MPPI_LAB_TRAJECTORY_HPP_
