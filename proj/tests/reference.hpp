// Test-side reference computations. Deliberately naive and independent of the
// library's oracles: uniform grids, trapezoid sums, golden-section search.
#ifndef MPPI_LAB_TESTS_REFERENCE_HPP_
#define MPPI_LAB_TESTS_REFERENCE_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace reference {

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

// E[w] under density ∝ exp(-F(w)/T) on [lo, hi], trapezoid rule on n points.
inline double gibbs_mean_1d(const Fn1& f, double temperature, double lo, double hi,
                            int n) {
  const double h = (hi - lo) / (n - 1);
  std::vector<double> v(n);
  double fmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    v[i] = f(lo + i * h);
    fmin = std::min(fmin, v[i]);
  }
  double z = 0.0, m = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double p = w * std::exp(-(v[i] - fmin) / temperature);
    z += p;
    m += p * (lo + i * h);
  }
  return m / z;
}

// 2-D version on a square grid; returns (E[w0], E[w1]).
inline Eigen::Vector2d gibbs_mean_2d(const Fn2& f, double temperature, double lo,
                                     double hi, int n) {
  const double h = (hi - lo) / (n - 1);
  Eigen::MatrixXd v(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) v(i, j) = f(lo + i * h, lo + j * h);
  }
  const double fmin = v.minCoeff();
  double z = 0.0;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    for (int j = 0; j < n; ++j) {
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      const double p = wi * wj * std::exp(-(v(i, j) - fmin) / temperature);
      z += p;
      m += p * Eigen::Vector2d(lo + i * h, lo + j * h);
    }
  }
  return m / z;
}

inline double golden_section(const Fn1& f, double a, double b, int iterations = 200) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < iterations && b - a > 1e-13; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Dense scan, then golden section on the bracketing cells.
inline double argmin_1d(const Fn1& f, double lo, double hi, int n = 20001) {
  const double h = (hi - lo) / (n - 1);
  int best = 0;
  double fbest = f(lo);
  for (int i = 1; i < n; ++i) {
    const double v = f(lo + i * h);
    if (v < fbest) {
      fbest = v;
      best = i;
    }
  }
  return golden_section(f, lo + std::max(best - 1, 0) * h,
                        lo + std::min(best + 1, n - 1) * h);
}

// Dense scan followed by repeated zooming around the incumbent.
inline Eigen::Vector2d argmin_2d(const Fn2& f, double lo, double hi, int n = 801) {
  Eigen::Vector2d c(0.5 * (lo + hi), 0.5 * (lo + hi));
  double half = 0.5 * (hi - lo);
  for (int round = 0; round < 12; ++round) {
    const double h = 2.0 * half / (n - 1);
    Eigen::Vector2d best = c;
    double fbest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a = c[0] - half + i * h, b = c[1] - half + j * h;
        const double v = f(a, b);
        if (v < fbest) {
          fbest = v;
          best = {a, b};
        }
      }
    }
    c = best;
    half = 4.0 * h;
    if (round > 0) n = 81;
  }
  return c;
}

// E[g(w)], w ~ N(0, var), trapezoid on ±10 standard deviations.
inline double normal_expectation(const Fn1& g, double var, int n = 801) {
  const double s = std::sqrt(var);
  const double lo = -10.0 * s, h = 20.0 * s / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = lo + i * h;
    const double wt = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += wt * g(w) * std::exp(-0.5 * w * w / var);
  }
  return acc * h / std::sqrt(2.0 * M_PI * var);
}

// Scalar 2-step closed-loop problem x+ = f(x, u + w) with cost
// 1/2 r (u0^2 + u1^2) + E(x2) solved by brute dynamic programming:
// linear interpolation of V1 on a uniform x1 grid, trapezoid expectations,
// golden-section inner minimization over u1 ∈ [-ulim, ulim].
struct ClsReference {
  double u0 = 0.0;
  std::vector<double> x1;
  std::vector<double> u1;
};

inline ClsReference cls_two_step(const std::function<double(double, double)>& f, const Fn1& e,
                                 double r, double x0, double var, double x1_lo, double x1_hi,
                                 int grid, double ulim, double u0_lo, double u0_hi) {
  ClsReference out;
  const double h = (x1_hi - x1_lo) / (grid - 1);
  std::vector<double> v1(grid);
  out.x1.resize(grid);
  out.u1.resize(grid);
  for (int i = 0; i < grid; ++i) {
    const double x1 = x1_lo + i * h;
    auto stage = [&](double u) {
      return 0.5 * r * u * u +
             normal_expectation([&](double w) { return e(f(x1, u + w)); }, var, 401);
    };
    const double u = argmin_1d(stage, -ulim, ulim, 241);
    out.x1[i] = x1;
    out.u1[i] = u;
    v1[i] = stage(u);
  }
  auto v1_at = [&](double x) {
    const double t = std::clamp((x - x1_lo) / h, 0.0, grid - 1.000001);
    const int k = static_cast<int>(t);
    return v1[k] + (t - k) * (v1[k + 1] - v1[k]);
  };
  auto first = [&](double u) {
    return 0.5 * r * u * u +
           normal_expectation([&](double w) { return v1_at(f(x0, u + w)); }, var, 401);
  };
  out.u0 = argmin_1d(first, u0_lo, u0_hi, 401);
  return out;
}

}  // namespace reference

#endif  // MPPI_LAB_TESTS_REFERENCE_HPP_
