#include "mppi_lab/oracles.hpp"

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mppi_lab/mppi.hpp"
#include "mppi_lab/parallel.hpp"
#include "mppi_lab/quadrature.hpp"

namespace mppi_lab {
namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

Eigen::VectorXd scalar_vec(double v) { return Eigen::VectorXd::Constant(1, v); }

// Largest odd p >= 5 with p^dim * cost <= budget, capped at `requested`.
int budgeted_points(int requested, int dim, long cost, long budget) {
  int p = requested;
  auto total = [&](int q) {
    double t = static_cast<double>(cost);
    for (int d = 0; d < dim; ++d) t *= q;
    return t;
  };
  while (p > 5 && total(p) > static_cast<double>(budget)) {
    p = static_cast<int>(std::floor(
        std::pow(static_cast<double>(budget) / static_cast<double>(cost),
                 1.0 / dim)));
    p = std::min(p, requested);
    if (p % 2 == 0) --p;
    if (total(p) > static_cast<double>(budget)) p -= 2;
  }
  return std::max(p, 5);
}

void check_box(const SearchBox& box) {
  require(box.lo.size() == box.hi.size() && box.lo.size() >= 1,
          "search box bounds must have equal nonzero length");
  require((box.hi.array() > box.lo.array()).all(),
          "search box needs hi > lo on every axis");
}

// ---- 1-D minimization along a scan, refined by Brent ------------------------

struct LineMin {
  double arg = 0.0;
  double value = 0.0;
  bool at_edge = false;
};

template <class F>
LineMin scan_brent(const F& g, double lo, double hi, int scan) {
  const double h = (hi - lo) / (scan - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan; ++i) {
    const double v = g(lo + i * h);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  LineMin out;
  if (!std::isfinite(best_val)) {
    throw Error(ErrorCode::kNumericOverflow,
                "objective non-finite over the whole scan interval");
  }
  out.at_edge = best == 0 || best == scan - 1;
  const double a = lo + std::max(best - 1, 0) * h;
  const double b = lo + std::min(best + 1, scan - 1) * h;
  const auto r = boost::math::tools::brent_find_minima(
      g, a, b, std::numeric_limits<double>::digits / 2 + 1);
  if (r.second <= best_val) {
    out.arg = r.first;
    out.value = r.second;
  } else {
    out.arg = lo + best * h;
    out.value = best_val;
  }
  return out;
}

// ---- vector-valued Gauss-Kronrod 15 ------------------------------------------

using Triple = Eigen::Array3d;

template <class F>
Triple gk15(const F& f, double a, double b, Triple* err) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
  using Gauss = boost::math::quadrature::gauss<double, 7>;
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double c = 0.5 * (a + b);
  const double r = 0.5 * (b - a);
  Triple f0 = f(c);
  Triple kron = f0 * wk[0];
  Triple gauss = f0 * wg[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const Triple s = f(c + r * x[i]) + f(c - r * x[i]);
    kron += s * wk[i];
    if (i % 2 == 0) gauss += s * wg[i / 2];
  }
  *err = (r * (kron - gauss)).abs();
  return r * kron;
}

template <class F>
Triple adaptive_gk(const F& f, double a, double b, double tol, int depth,
                   Triple* err) {
  Triple e;
  const Triple v = gk15(f, a, b, &e);
  if (e.maxCoeff() <= tol || depth <= 0) {
    *err = e;
    return v;
  }
  const double m = 0.5 * (a + b);
  Triple e1, e2;
  const Triple v1 = adaptive_gk(f, a, m, 0.5 * tol, depth - 1, &e1);
  const Triple v2 = adaptive_gk(f, m, b, 0.5 * tol, depth - 1, &e2);
  *err = e1 + e2;
  return v1 + v2;
}

// 0, +-0.5, +-1, +-2, ... clipped to [lo, hi]
std::vector<double> breakpoints(double lo, double hi) {
  std::vector<double> pts{lo, hi};
  if (lo < 0.0 && hi > 0.0) pts.push_back(0.0);
  for (double t = 0.5; t < std::max(-lo, hi); t *= 2.0) {
    if (t < hi) pts.push_back(t);
    if (-t > lo) pts.push_back(-t);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

template <class F>
Triple integrate_line(const F& f, double lo, double hi, double tol, int depth,
                      Triple* err) {
  const auto pts = breakpoints(lo, hi);
  const double panel_tol = tol / static_cast<double>(pts.size() - 1);
  Triple total = Triple::Zero();
  *err = Triple::Zero();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Triple e;
    total += adaptive_gk(f, pts[i], pts[i + 1], panel_tol, depth, &e);
    *err += e;
  }
  return total;
}

Eigen::MatrixXd fd_hessian(const std::function<double(const VectorRef&)>& f,
                           const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  Eigen::MatrixXd h(d, d);
  const double f0 = f(x);
  for (int i = 0; i < d; ++i) {
    const double hi = 1e-4 * std::max(1.0, std::abs(x[i]));
    for (int j = i; j < d; ++j) {
      const double hj = 1e-4 * std::max(1.0, std::abs(x[j]));
      Eigen::VectorXd p = x;
      if (i == j) {
        Eigen::VectorXd m = x;
        p[i] += hi;
        m[i] -= hi;
        h(i, i) = (f(p) - 2.0 * f0 + f(m)) / (hi * hi);
      } else {
        Eigen::VectorXd pm = x, mp = x, mm = x;
        p[i] += hi, p[j] += hj;
        pm[i] += hi, pm[j] -= hj;
        mp[i] -= hi, mp[j] += hj;
        mm[i] -= hi, mm[j] -= hj;
        h(i, j) = h(j, i) = (f(p) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
      }
    }
  }
  return h;
}

// ---- closed-loop DP helpers -------------------------------------------------

struct ScalarModel {
  const OcpInstance& inst;

  double step(double x, double u, double w) const {
    return inst.dynamics.step(scalar_vec(x), scalar_vec(u), scalar_vec(w))[0];
  }
  double stage(double x, double u) const {
    return inst.cost.stage(scalar_vec(x), scalar_vec(u));
  }
  double terminal(double x) const {
    return inst.cost.terminal_cost(scalar_vec(x));
  }
};

// V_1 on a state grid, cubic-spline interpolated; throws kGridExtent outside.
struct ValueTable {
  double lo = 0.0;
  double hi = 0.0;
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;

  double operator()(double x) const {
    if (!(x >= lo && x <= hi)) {
      throw Error(ErrorCode::kGridExtent,
                  "closed-loop value grid [" + fmt(lo) + ", " + fmt(hi) +
                      "] does not cover x1 = " + fmt(x) +
                      "; required extent includes this state");
    }
    return spline(x);
  }
};

struct ClsPass {
  double u0 = 0.0;
  double value = 0.0;
  std::vector<PolicyTable> policies;
  ControlTrajectory nominal;
};

ClsPass cls_pass(const OcpInstance& inst, const ClsOptions& opt,
                 const QuadratureRule& rule, int grid_points) {
  const ScalarModel m{inst};
  const double sd = inst.sigma.cholesky()(0, 0);
  const int q = rule.order();
  std::vector<double> w(q), wt(q);
  for (int i = 0; i < q; ++i) {
    w[i] = sd * rule.nodes[i];
    wt[i] = rule.weights[i];
  }
  const double x0 = inst.initial_state[0];
  ClsPass out;

  if (inst.horizon == 1) {
    auto g0 = [&](double u) {
      double s = m.stage(x0, u);
      for (int i = 0; i < q; ++i) s += wt[i] * m.terminal(m.step(x0, u, w[i]));
      return s;
    };
    const LineMin r = scan_brent(g0, opt.first_lo, opt.first_hi,
                                 opt.scan_points);
    if (r.at_edge) {
      throw Error(ErrorCode::kBoundaryHit,
                  "closed-loop u0 argmin on the search interval edge; "
                  "enlarge [first_lo, first_hi]");
    }
    out.u0 = r.arg;
    out.value = r.value;
    out.nominal = ControlTrajectory(1, 1, scalar_vec(r.arg));
    return out;
  }

  // quadrature-reachable x1 from the u0 search interval
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const int reach_scan = 401;
  for (int j = 0; j < reach_scan; ++j) {
    const double u =
        opt.first_lo + (opt.first_hi - opt.first_lo) * j / (reach_scan - 1);
    for (int i = 0; i < q; ++i) {
      const double x1 = m.step(x0, u, w[i]);
      lo = std::min(lo, x1);
      hi = std::max(hi, x1);
    }
  }
  const double pad = 0.05 * (hi - lo) + 1e-6;
  lo -= pad;
  hi += pad;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::kNumericOverflow,
                "reachable x1 set is unbounded over the u0 search interval");
  }

  PolicyTable table;
  table.stage = 1;
  table.states = Eigen::VectorXd::LinSpaced(grid_points, lo, hi);
  table.controls.resize(grid_points);
  table.values.resize(grid_points);
  std::vector<int> edge(grid_points, 0);
  parallel_for(static_cast<std::size_t>(grid_points), default_workers(),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t k = begin; k < end; ++k) {
                   const double x1 = table.states[static_cast<Eigen::Index>(k)];
                   auto g1 = [&](double u) {
                     double s = m.stage(x1, u);
                     for (int i = 0; i < q; ++i) {
                       s += wt[i] * m.terminal(m.step(x1, u, w[i]));
                     }
                     return s;
                   };
                   const LineMin r = scan_brent(g1, opt.policy_lo,
                                                opt.policy_hi, opt.scan_points);
                   table.controls[static_cast<Eigen::Index>(k)] = r.arg;
                   table.values[static_cast<Eigen::Index>(k)] = r.value;
                   edge[k] = r.at_edge ? 1 : 0;
                 }
               });
  for (int e : edge) table.boundary_hits += e;

  const double h = (hi - lo) / (grid_points - 1);
  const ValueTable v1{lo, hi,
                      boost::math::interpolators::cardinal_cubic_b_spline<double>(
                          table.values.data(), table.values.size(), lo, h)};
  auto g0 = [&](double u) {
    double s = m.stage(x0, u);
    for (int i = 0; i < q; ++i) s += wt[i] * v1(m.step(x0, u, w[i]));
    return s;
  };
  const LineMin r = scan_brent(g0, opt.first_lo, opt.first_hi, opt.scan_points);
  if (r.at_edge) {
    throw Error(ErrorCode::kBoundaryHit,
                "closed-loop u0 argmin on the search interval edge; "
                "enlarge [first_lo, first_hi]");
  }
  out.u0 = r.arg;
  out.value = r.value;
  const double x1 = m.step(x0, r.arg, 0.0);
  Eigen::VectorXd u(2);
  u << r.arg, table.control_at(x1);
  out.nominal = ControlTrajectory(2, 1, u);
  out.policies.push_back(std::move(table));
  return out;
}

}  // namespace

SearchBox SearchBox::uniform(int dim, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

double PolicyTable::control_at(double x) const {
  const Eigen::Index n = states.size();
  require(n >= 2, "policy table needs at least two grid states");
  if (!(x >= states[0] && x <= states[n - 1])) {
    throw Error(ErrorCode::kGridExtent,
                "policy grid [" + fmt(states[0]) + ", " + fmt(states[n - 1]) +
                    "] does not cover x = " + fmt(x));
  }
  const double h = (states[n - 1] - states[0]) / static_cast<double>(n - 1);
  const auto i = std::min<Eigen::Index>(
      static_cast<Eigen::Index>((x - states[0]) / h), n - 2);
  const double t = (x - states[i]) / h;
  return (1.0 - t) * controls[i] + t * controls[i + 1];
}

GridMinimum grid_minimize(const std::function<double(const VectorRef&)>& f,
                          const SearchBox& box, const GridOptions& options,
                          long cost_per_evaluation) {
  check_box(box);
  require(options.points_per_axis >= 3, "grid needs >= 3 points per axis");
  const int d = static_cast<int>(box.lo.size());
  const int p = budgeted_points(options.points_per_axis, d,
                                std::max(cost_per_evaluation, 1L),
                                options.max_evaluations);
  const Eigen::VectorXd h = (box.hi - box.lo) / (p - 1);

  long count = 1;
  for (int i = 0; i < d; ++i) count *= p;
  std::vector<double> values(static_cast<std::size_t>(count));
  parallel_for(values.size(), default_workers(),
               [&](std::size_t begin, std::size_t end) {
                 Eigen::VectorXd x(d);
                 for (std::size_t idx = begin; idx < end; ++idx) {
                   std::size_t r = idx;
                   for (int i = d - 1; i >= 0; --i) {
                     x[i] = box.lo[i] + static_cast<double>(r % p) * h[i];
                     r /= p;
                   }
                   const double v = f(x);
                   values[idx] = std::isfinite(v)
                                     ? v
                                     : std::numeric_limits<double>::infinity();
                 }
               });
  const auto best_it = std::min_element(values.begin(), values.end());
  if (!std::isfinite(*best_it)) {
    throw Error(ErrorCode::kNumericOverflow,
                "objective non-finite at every grid point");
  }
  Eigen::VectorXd x(d);
  {
    std::size_t r = static_cast<std::size_t>(best_it - values.begin());
    for (int i = d - 1; i >= 0; --i) {
      const auto k = static_cast<int>(r % p);
      r /= p;
      if (k == 0 || k == p - 1) {
        throw Error(ErrorCode::kBoundaryHit,
                    "grid argmin on the boundary of axis " + std::to_string(i) +
                        " at " + fmt(box.lo[i] + k * h[i]) +
                        "; enlarge the search box");
      }
      x[i] = box.lo[i] + k * h[i];
    }
  }
  double fx = *best_it;

  // compass refinement, halving the step after each stalled sweep
  Eigen::VectorXd s = h;
  for (int round = 0; round < options.refinement_depth; ++round) {
    bool moved = true;
    for (int guard = 0; moved && guard < 10000; ++guard) {
      moved = false;
      for (int i = 0; i < d; ++i) {
        for (double sign : {-1.0, 1.0}) {
          Eigen::VectorXd y = x;
          y[i] += sign * s[i];
          if (y[i] < box.lo[i] || y[i] > box.hi[i]) continue;
          const double fy = f(y);
          if (fy < fx) {
            x = y;
            fx = fy;
            moved = true;
          }
        }
      }
    }
    if (s.maxCoeff() <= options.min_step) break;
    s *= 0.5;
  }
  for (int i = 0; i < d; ++i) {
    if (x[i] - box.lo[i] <= s[i] || box.hi[i] - x[i] <= s[i]) {
      throw Error(ErrorCode::kBoundaryHit,
                  "refined argmin reached the boundary of axis " +
                      std::to_string(i) + "; enlarge the search box");
    }
  }
  return {x, fx, p, s.maxCoeff()};
}

OracleSolution det_ocp_oracle(const OcpInstance& inst, const SearchBox& box,
                              const GridOptions& options) {
  inst.validate();
  const int dim = inst.control_size();
  require(dim <= 4, "DET oracle needs N*n_u <= 4");
  require(box.lo.size() == dim, "search box does not match N*n_u");
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(inst.noise_size());
  const GridMinimum g = grid_minimize(
      [&](const VectorRef& u) { return overall_cost_or_inf(inst, u, w0); },
      box, options);
  OracleSolution out;
  out.minimizer = ControlTrajectory(inst.horizon, inst.dynamics.control_dim,
                                    g.argmin);
  out.value = value_of(inst, out.minimizer);
  out.method = "det-grid";
  out.grid_points_per_axis = g.points_per_axis;
  out.final_step = g.final_step;
  out.certified_tolerance = 2.0 * g.final_step;
  return out;
}

OracleSolution ols_ocp_oracle(const OcpInstance& inst, int quadrature_order,
                              const SearchBox& box,
                              const GridOptions& options) {
  inst.validate();
  const int dim = inst.control_size();
  require(inst.noise_size() <= 3, "OLS oracle needs N*n_w <= 3");
  require(box.lo.size() == dim, "search box does not match N*n_u");
  auto expected_cost = [&](const TensorQuadrature& tq) {
    return [&inst, &tq](const VectorRef& u) {
      double s = 0.0;
      for (int i = 0; i < tq.count(); ++i) {
        s += tq.weights[i] *
             overall_cost_or_inf(inst, u, tq.nodes.row(i).transpose());
      }
      return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    };
  };
  const TensorQuadrature tq = tensor_rule(gauss_hermite(quadrature_order),
                                          inst.sigma);
  const auto objective = expected_cost(tq);
  const GridMinimum g = grid_minimize(objective, box, options, tq.count());
  const TensorQuadrature tq2 = tensor_rule(gauss_hermite(2 * quadrature_order),
                                           inst.sigma);
  OracleSolution out;
  out.minimizer = ControlTrajectory(inst.horizon, inst.dynamics.control_dim,
                                    g.argmin);
  out.value = g.value;
  out.method = "ols-gauss-hermite";
  out.grid_points_per_axis = g.points_per_axis;
  out.final_step = g.final_step;
  out.certified_tolerance = 2.0 * g.final_step;
  out.quadrature_order = quadrature_order;
  out.quadrature_change = std::abs(expected_cost(tq2)(g.argmin) - g.value);
  return out;
}

OracleSolution cls_ocp_oracle(const OcpInstance& inst,
                              const ClsOptions& options) {
  inst.validate();
  require(inst.dynamics.state_dim == 1 && inst.dynamics.control_dim == 1 &&
              inst.dynamics.noise_dim == 1,
          "CLS oracle needs scalar state, control and noise");
  require(inst.horizon == 1 || inst.horizon == 2, "CLS oracle needs N <= 2");
  require(options.grid_points >= 5 && options.scan_points >= 5,
          "CLS oracle needs >= 5 grid and scan points");
  require(options.first_hi > options.first_lo &&
              options.policy_hi > options.policy_lo,
          "CLS search intervals need hi > lo");
  const QuadratureRule rule = gauss_hermite(options.quadrature_order);
  ClsPass pass = cls_pass(inst, options, rule, options.grid_points);

  // Brent stops at ~sqrt(eps) relative precision
  double tol = 2e-8 * std::max(1.0, std::abs(pass.u0));
  if (options.certify) {
    const ClsPass doubled = cls_pass(
        inst, options, gauss_hermite(2 * options.quadrature_order),
        options.grid_points);
    tol += 2.0 * std::abs(doubled.u0 - pass.u0);
    if (inst.horizon > 1) {
      ClsPass fine = cls_pass(inst, options, rule, 2 * options.grid_points - 1);
      tol += 2.0 * std::abs(fine.u0 - pass.u0);
      pass = std::move(fine);
    }
  }
  OracleSolution out;
  out.minimizer = pass.nominal;
  out.value = pass.value;
  out.method = "cls-dp";
  out.certified_tolerance = tol;
  out.grid_points_per_axis = pass.policies.empty()
                                 ? 0
                                 : static_cast<int>(
                                       pass.policies.front().states.size());
  out.quadrature_order = options.quadrature_order;
  out.policies = std::move(pass.policies);
  return out;
}

GibbsResult gibbs_mean(const OcpInstance& inst, const GibbsOptions& options) {
  inst.validate();
  const int d = inst.control_size();
  require(d <= 2, "gibbs_mean needs N*n_u <= 2");
  require(inst.dynamics.noise_dim == inst.dynamics.control_dim,
          "gibbs_mean needs noise on the control channel");
  require(options.beta > 0.0 && options.lambda0 > 0.0,
          "gibbs_mean needs beta > 0 and lambda0 > 0");
  require(options.box.lo.size() == d, "integration box does not match N*n_u");
  const CovarianceSpec sigma0 = inst.sigma.with_scale(1.0);
  const double lambda0 = options.lambda0;
  const double temp = options.beta * options.beta * lambda0;

  const std::function<double(const VectorRef&)> exponent =
      [&](const VectorRef& v) {
        const double s = path_cost_or_inf(inst, v);
        return s + 0.5 * lambda0 * sigma0.quadratic_form(v);
      };
  GridOptions grid;
  grid.points_per_axis = d == 1 ? 4001 : 401;
  const GridMinimum mode = grid_minimize(exponent, options.box, grid);
  const double f_star = mode.value;

  // z-coordinates: W = mode + sqrt(T) L z with L L' = H^-1
  Eigen::MatrixXd hess = fd_hessian(exponent, mode.argmin);
  Eigen::LLT<Eigen::MatrixXd> llt(hess);
  if (llt.info() != Eigen::Success ||
      !llt.matrixL().toDenseMatrix().diagonal().allFinite()) {
    // fall back to the prior curvature lambda0 Sigma0^-1
    for (int i = 0; i < d; ++i) {
      hess.col(i) = lambda0 * sigma0.solve(Eigen::VectorXd::Unit(d, i));
    }
    llt.compute(hess);
  }
  const Eigen::MatrixXd hinv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd l = std::sqrt(temp) * hinv.llt().matrixL().toDenseMatrix();
  const Eigen::MatrixXd l_inv = l.inverse();

  // Support: bounding box of scan points whose density exp(-(F-F*)/T) does
  // not underflow, padded by one cell. Mass cut off by the integration box
  // itself must be negligible.
  const int p = grid.points_per_axis;
  const Eigen::VectorXd cell = (options.box.hi - options.box.lo) / (p - 1);
  Eigen::VectorXd sup_lo = mode.argmin, sup_hi = mode.argmin;
  long count = 1;
  for (int i = 0; i < d; ++i) count *= p;
  bool truncated = false;
  for (long idx = 0; idx < count; ++idx) {
    Eigen::VectorXd w(d);
    bool on_edge = false;
    long r = idx;
    for (int i = d - 1; i >= 0; --i) {
      const long k = r % p;
      r /= p;
      w[i] = options.box.lo[i] + static_cast<double>(k) * cell[i];
      on_edge = on_edge || k == 0 || k == p - 1;
    }
    const double e = (exponent(w) - f_star) / temp;
    if (!(e < 745.0)) continue;
    sup_lo = sup_lo.cwiseMin(w);
    sup_hi = sup_hi.cwiseMax(w);
    truncated = truncated || (on_edge && e < 30.0);
  }
  if (truncated) {
    throw Error(ErrorCode::kGridExtent,
                "Gibbs density exceeds 1e-13 of its peak on the integration "
                "box boundary; enlarge the box");
  }
  sup_lo = (sup_lo - cell).cwiseMax(options.box.lo);
  sup_hi = (sup_hi + cell).cwiseMin(options.box.hi);
  double zmax = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) c[i] = (corner >> i) & 1 ? sup_hi[i] : sup_lo[i];
    zmax = std::max(zmax, (l_inv * (c - mode.argmin)).cwiseAbs().maxCoeff());
  }

  auto density = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd w = mode.argmin + l * z;
    const double f = exponent(w);
    return std::isfinite(f) ? std::exp(-(f - f_star) / temp) : 0.0;
  };

  const double s_max = l.cwiseAbs().rowwise().sum().maxCoeff();
  const double mass_guess = std::pow(2.0 * M_PI, 0.5 * d);
  const double tol =
      std::max(0.25 * options.abs_tol * mass_guess / s_max, 1e-15);

  Triple total, err;
  if (d == 1) {
    total = integrate_line(
        [&](double z) {
          const double p = density(scalar_vec(z));
          return Triple(p, z * p, 0.0);
        },
        -zmax, zmax, tol, options.max_depth, &err);
  } else {
    const double inner_tol = tol / (2.0 * zmax);
    double inner_err_sum = 0.0;
    total = integrate_line(
        [&](double z0) {
          Triple e;
          Eigen::VectorXd z(2);
          z[0] = z0;
          const Triple r = integrate_line(
              [&](double z1) {
                z[1] = z1;
                const double p = density(z);
                return Triple(p, z0 * p, z1 * p);
              },
              -zmax, zmax, inner_tol, options.max_depth, &e);
          inner_err_sum = std::max(inner_err_sum, e.maxCoeff());
          return r;
        },
        -zmax, zmax, tol, options.max_depth, &err);
    err += inner_err_sum * 2.0 * zmax;
  }
  const double mass = total[0];
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorCode::kNumericOverflow,
                "Gibbs normalizer is not positive and finite");
  }
  Eigen::VectorXd zbar(d), zerr(d);
  for (int i = 0; i < d; ++i) {
    zbar[i] = total[1 + i] / mass;
    zerr[i] = (err[1 + i] + std::abs(zbar[i]) * err[0]) / mass;
  }
  GibbsResult out;
  out.mode = mode.argmin;
  out.mean = ControlTrajectory(inst.horizon, inst.dynamics.control_dim,
                               mode.argmin + l * zbar);
  out.error_estimate = (l.cwiseAbs() * zerr).maxCoeff();
  if (out.error_estimate > options.abs_tol) {
    throw Error(ErrorCode::kIntegrationBudget,
                "Gibbs-mean error estimate " + fmt(out.error_estimate) +
                    " exceeds abs_tol " + fmt(options.abs_tol) +
                    " within the subdivision budget");
  }
  return out;
}

std::vector<std::pair<double, double>> optimal_density_curve(
    const OcpInstance& inst, double beta, double lambda0,
    const std::vector<double>& grid) {
  inst.validate();
  require(inst.control_size() == 1, "density curve needs a scalar problem");
  require(grid.size() >= 3, "density curve needs >= 3 grid points");
  require(std::is_sorted(grid.begin(), grid.end()),
          "density grid must be increasing");
  require(beta > 0.0 && lambda0 > 0.0, "density needs beta, lambda0 > 0");
  const CovarianceSpec sigma0 = inst.sigma.with_scale(1.0);
  const double temp = beta * beta * lambda0;
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd v = scalar_vec(grid[i]);
    f[i] = path_cost_or_inf(inst, v) + 0.5 * lambda0 * sigma0.quadratic_form(v);
  }
  const double f_min = *std::min_element(f.begin(), f.end());
  std::vector<double> q(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    q[i] = std::isfinite(f[i]) ? std::exp(-(f[i] - f_min) / temp) : 0.0;
  }
  if (std::max(q.front(), q.back()) > 1e-8) {
    throw Error(ErrorCode::kGridExtent,
                "density at the grid boundary exceeds 1e-8 of the peak; "
                "widen the W grid [" + fmt(grid.front()) + ", " +
                    fmt(grid.back()) + "]");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    mass += 0.5 * (q[i] + q[i + 1]) * (grid[i + 1] - grid[i]);
  }
  std::vector<std::pair<double, double>> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = {grid[i], q[i] / mass};
  return out;
}

SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points,
                   double window_lo, double window_hi) {
  SlopeFit out;
  std::vector<double> xs, ys;
  for (const auto& [beta, err] : points) {
    if (beta < window_lo || beta > window_hi) continue;
    if (!(err > 0.0) || !(beta > 0.0)) {
      out.warnings.push_back("skipped nonpositive point (beta=" + fmt(beta) +
                             ", error=" + fmt(err) + ")");
      continue;
    }
    xs.push_back(std::log(beta));
    ys.push_back(std::log(err));
  }
  out.used = static_cast<int>(xs.size());
  if (out.used < 4) {
    throw Error(ErrorCode::kInsufficientData,
                "slope fit needs >= 4 usable points, got " +
                    std::to_string(out.used));
  }
  const Eigen::Map<const Eigen::VectorXd> x(xs.data(), out.used);
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), out.used);
  Eigen::MatrixXd a(out.used, 2);
  a.col(0) = x;
  a.col(1).setOnes();
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(y);
  out.slope = coef[0];
  out.intercept = coef[1];
  out.residual = std::sqrt((a * coef - y).squaredNorm() / out.used);
  return out;
}

}  // namespace mppi_lab
