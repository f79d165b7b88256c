#include "mppi_lab/sampling.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "mppi_lab/parallel.hpp"

namespace mppi_lab {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

SampleStream::SampleStream(std::uint64_t seed, std::uint64_t iteration,
                           std::uint64_t sample) {
  std::uint64_t key = mix64(seed + kGamma);
  key = mix64(key ^ (iteration * 0xd1b54a32d192ed03ULL + kGamma));
  key = mix64(key ^ (sample * 0xaef17502108ef2d9ULL + kGamma));
  state_ = key;
}

SampleStream::result_type SampleStream::operator()() {
  state_ += kGamma;
  return mix64(state_);
}

NoiseTrajectory SampleBatch::noise(int m) const {
  return NoiseTrajectory(horizon, step_dim, noises.row(m).transpose());
}

SampleBatch draw_batch(const CovarianceSpec& cov, int count,
                       std::uint64_t seed, std::uint64_t iteration,
                       int workers) {
  require(count >= 1, "sample count must be >= 1");
  SampleBatch batch;
  batch.horizon = cov.horizon();
  batch.step_dim = cov.step_dim();
  batch.seed = seed;
  batch.iteration = iteration;
  const int dim = cov.lifted_dim();
  const int d = cov.step_dim();
  batch.noises.resize(count, dim);
  const Eigen::MatrixXd lower = cov.cholesky();
  parallel_for(static_cast<std::size_t>(count), workers,
               [&](std::size_t begin, std::size_t end) {
                 Eigen::VectorXd z(d);
                 for (std::size_t m = begin; m < end; ++m) {
                   SampleStream stream(seed, iteration, m);
                   std::normal_distribution<double> normal;
                   for (int k = 0; k < cov.horizon(); ++k) {
                     for (int i = 0; i < d; ++i) z[i] = normal(stream);
                     batch.noises.row(static_cast<Eigen::Index>(m))
                         .segment(k * d, d) =
                         (lower.triangularView<Eigen::Lower>() * z).transpose();
                   }
                 }
               });
  return batch;
}

double log_density(const CovarianceSpec& cov, const ControlTrajectory& mean,
                   const NoiseTrajectory& w) {
  require(mean.size() == cov.lifted_dim() && w.size() == cov.lifted_dim(),
          "log density: dimension mismatch");
  const Eigen::VectorXd diff = w.values() - mean.values();
  return -0.5 * (cov.lifted_dim() * std::log(2.0 * std::numbers::pi) +
                 cov.log_det() + cov.quadratic_form(diff));
}

double importance_correction(const CovarianceSpec& cov, double lambda,
                             const VectorRef& mean, const VectorRef& w) {
  require(lambda > 0.0, "importance correction needs lambda > 0");
  require(mean.size() == cov.lifted_dim() && w.size() == cov.lifted_dim(),
          "importance correction: dimension mismatch");
  return lambda * w.dot(cov.solve(mean));
}

double importance_correction(const CovarianceSpec& cov, double lambda,
                             const ControlTrajectory& mean,
                             const NoiseTrajectory& w) {
  return importance_correction(cov, lambda, mean.values(), w.values());
}

void write_batch_csv(std::ostream& out, const SampleBatch& batch) {
  const auto old_precision = out.precision(17);
  out << "m,k,component,value\n";
  for (int m = 0; m < batch.count(); ++m) {
    for (int k = 0; k < batch.horizon; ++k) {
      for (int i = 0; i < batch.step_dim; ++i) {
        out << m << ',' << k << ',' << i << ','
            << batch.noises(m, k * batch.step_dim + i) << '\n';
      }
    }
  }
  out.precision(old_precision);
}

}  // namespace mppi_lab
