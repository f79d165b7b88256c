#ifndef MPPI_LAB_SAMPLING_HPP_
#define MPPI_LAB_SAMPLING_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <limits>

#include "mppi_lab/covariance.hpp"
#include "mppi_lab/problem.hpp"
#include "mppi_lab/trajectory.hpp"

namespace mppi_lab {

// Counter-based uniform bit source: output n is mix(key + (n+1) * gamma)
// (SplitMix64), so a stream is fully determined by its key.
class SampleStream {
 public:
  using result_type = std::uint64_t;

  SampleStream(std::uint64_t seed, std::uint64_t iteration,
               std::uint64_t sample);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

 private:
  std::uint64_t state_;
};

// M noise trajectories W^m ~ N(0, beta^2 Sigma_bar); row m is W^m and is a
// function of (seed, iteration, m) only.
struct SampleBatch {
  using Matrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Matrix noises;
  int horizon = 0;
  int step_dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  int count() const { return static_cast<int>(noises.rows()); }
  NoiseTrajectory noise(int m) const;
};

SampleBatch draw_batch(const CovarianceSpec& cov, int count,
                       std::uint64_t seed, std::uint64_t iteration = 0,
                       int workers = 1);

// log N(W; mean, beta^2 Sigma_bar)
double log_density(const CovarianceSpec& cov, const ControlTrajectory& mean,
                   const NoiseTrajectory& w);

// lambda W^T (beta^2 Sigma_bar)^{-1} U_hat
double importance_correction(const CovarianceSpec& cov, double lambda,
                             const ControlTrajectory& mean,
                             const NoiseTrajectory& w);
double importance_correction(const CovarianceSpec& cov, double lambda,
                             const VectorRef& mean, const VectorRef& w);

// CSV audit dump, columns m,k,component,value
void write_batch_csv(std::ostream& out, const SampleBatch& batch);

}  // namespace mppi_lab

#endif  // MPPI_LAB_SAMPLING_HPP_
