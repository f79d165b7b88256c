#include <doctest.h>

#include <cmath>
#include <vector>

#include "mppi_lab/oracles.hpp"
#include "mppi_lab/quadrature.hpp"
#include "mppi_lab/scenarios.hpp"
#include "reference.hpp"

using namespace mppi_lab;

namespace {

double quartic_j(double u) { return 20 * std::pow(u, 4) + 24 * std::pow(u, 3) + 8 * u * u; }

// J for the arctan scenario with W = 0, as a plain function of (u0, u1)
double arctan_j(double a, double b) {
  const double x2 = -1.0 + std::atan(a) + std::atan(b);
  return 0.5 * (a * a + b * b) + std::pow(x2 - 1.0, 6) + x2;
}

GibbsOptions gibbs(double beta, int dim = 1, double lo = -2.0, double hi = 2.0) {
  GibbsOptions o;
  o.beta = beta;
  o.lambda0 = 1.0;
  o.box = SearchBox::uniform(dim, lo, hi);
  o.abs_tol = 1e-10;
  return o;
}

// same problem, noise covariance scaled by beta^2
OcpInstance with_noise_scale(OcpInstance inst, double scale) {
  inst.sigma = inst.sigma.with_scale(scale);
  return inst;
}

// x+ = x + u + w, E = x^2/2, R = 1, x0 = 1, N = 2: u0* = -1/3, u1*(x) = -x/2
OcpInstance lq2() {
  ScenarioSpec s = find_scenario("lq1");
  s.horizon = 2;
  return build_instance(s);
}

}  // namespace

TEST_CASE("DET oracle: quartic and LQ closed forms") {
  const ScenarioSpec q = find_scenario("quartic");
  const OracleSolution d = det_ocp_oracle(build_instance(q), oracle_box(q));
  CHECK(std::abs(d.minimizer[0]) <= d.certified_tolerance);
  CHECK(d.value == doctest::Approx(0.0));
  CHECK(d.certified_tolerance <= 1e-6);

  const ScenarioSpec lq = find_scenario("lq1");
  const OracleSolution l = det_ocp_oracle(build_instance(lq), oracle_box(lq));
  CHECK(l.minimizer[0] == doctest::Approx(-0.5).epsilon(1e-7));
  CHECK(l.value == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("DET oracle matches a dense reference search on arctan2") {
  const ScenarioSpec s = find_scenario("arctan2");
  const OracleSolution d = det_ocp_oracle(build_instance(s), oracle_box(s));
  const Eigen::Vector2d ref = reference::argmin_2d(arctan_j, -3.0, 3.0);
  CHECK(d.certified_tolerance <= 1e-6);
  CHECK(std::abs(d.minimizer[0] - ref[0]) <= d.certified_tolerance + 1e-7);
  CHECK(std::abs(d.minimizer[1] - ref[1]) <= d.certified_tolerance + 1e-7);
  CHECK(d.value == doctest::Approx(arctan_j(ref[0], ref[1])).epsilon(1e-10));
}

TEST_CASE("grid search reports boundary minimizers") {
  const auto f = [](const VectorRef& u) { return (u[0] - 5.0) * (u[0] - 5.0); };
  try {
    grid_minimize(f, SearchBox::uniform(1, -1, 1), {});
    FAIL("expected boundary hit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBoundaryHit);
  }
}

TEST_CASE("Gauss-Hermite rules") {
  const QuadratureRule q2 = gauss_hermite(2);
  CHECK(q2.nodes.cwiseAbs().minCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(q2.nodes.sum() == doctest::Approx(0.0).scale(1.0));
  CHECK(q2.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(q2.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(q2.weights.dot(q2.nodes.cwiseProduct(q2.nodes)) == doctest::Approx(1.0).epsilon(1e-14));

  // order 20 integrates z^38 exactly: E[z^8] = 105
  const QuadratureRule q20 = gauss_hermite(20);
  CHECK(q20.weights.dot(q20.nodes.array().pow(8).matrix()) == doctest::Approx(105.0));

  const TensorQuadrature t = tensor_rule(q2, CovarianceSpec::scalar(4.0, 2));
  CHECK(t.count() == 4);
  CHECK(t.weights.sum() == doctest::Approx(1.0));
  CHECK(t.weights.dot(t.nodes.col(1).cwiseProduct(t.nodes.col(1))) == doctest::Approx(4.0));
  CHECK_THROWS_AS(tensor_rule(q20, CovarianceSpec::scalar(1.0, 5), 1000), Error);
}

TEST_CASE("OLS oracle: vanishing noise coincides with DET") {
  const ScenarioSpec s = find_scenario("arctan2");
  const OcpInstance inst = build_instance(s);
  const OracleSolution d = det_ocp_oracle(inst, oracle_box(s));
  const OracleSolution o =
      ols_ocp_oracle(with_noise_scale(inst, 1e-12), 20, oracle_box(s));
  CHECK((o.minimizer.values() - d.minimizer.values()).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("OLS oracle on arctan2 is a minimizer of the reference expectation") {
  const ScenarioSpec s = find_scenario("arctan2");
  const OcpInstance inst = build_instance(s);
  GridOptions grid;
  grid.max_evaluations = s.ols_max_evaluations;
  const OracleSolution o = ols_ocp_oracle(inst, s.quadrature_order, oracle_box(s), grid);
  CHECK(o.quadrature_change < 1e-8);
  const auto expected = [](double a, double b) {
    return reference::normal_expectation(
        [&](double w0) {
          return reference::normal_expectation(
              [&](double w1) {
                const double x2 = -1.0 + std::atan(a + w0) + std::atan(b + w1);
                return std::pow(x2 - 1.0, 6) + x2;
              },
              1.0, 601);
        },
        1.0, 601) + 0.5 * (a * a + b * b);
  };
  const double a = o.minimizer[0], b = o.minimizer[1];
  const double v = expected(a, b);
  CHECK(o.value == doctest::Approx(v).epsilon(1e-8));
  const double h = 1e-3;
  CHECK(expected(a + h, b) > v);
  CHECK(expected(a - h, b) > v);
  CHECK(expected(a, b + h) > v);
  CHECK(expected(a, b - h) > v);
  // open-loop optimum moves far from the deterministic one
  CHECK(a > 1.5);
}

TEST_CASE("CLS oracle: LQ closed form") {
  const OcpInstance inst = lq2();
  const OracleSolution c = cls_ocp_oracle(inst);
  CHECK(c.minimizer[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
  REQUIRE(c.policies.size() == 1);
  for (double x : {-1.0, 0.0, 0.5, 2.0}) {
    CHECK(c.policies[0].control_at(x) == doctest::Approx(-0.5 * x).scale(1.0).epsilon(1e-6));
  }
  // V0 = 1/6 + 1/2 + 1/4 * 1 from the Riccati recursion with unit noise
  CHECK(c.value == doctest::Approx(1.0 / 6.0 + 0.75).epsilon(1e-6));

  const OracleSolution o = ols_ocp_oracle(inst, 20, SearchBox::uniform(2, -2, 2));
  const OracleSolution d = det_ocp_oracle(inst, SearchBox::uniform(2, -2, 2));
  CHECK(std::abs(o.minimizer[0] - d.minimizer[0]) <= 1e-6);
  CHECK(std::abs(c.minimizer[0] - d.minimizer[0]) <= 1e-6);
}

TEST_CASE("CLS oracle matches brute-force dynamic programming on affine2") {
  const OcpInstance inst = build_instance(find_scenario("affine2"));
  ClsOptions opt;
  opt.certify = false;
  const OracleSolution c = cls_ocp_oracle(inst, opt);
  const auto f = [](double x, double v) { return x - 0.5 * std::sin(3.0 * x) + v; };
  const auto e = [](double x) { return std::pow(x - 1.0, 6) + x; };
  const reference::ClsReference ref =
      reference::cls_two_step(f, e, 1.0, -1.0, 1.0, -6.0, 6.0, 1201, 12.0, -3.0, 3.0);
  CHECK(std::abs(c.minimizer[0] - ref.u0) <= 2e-3);
  CHECK(c.minimizer[0] == doctest::Approx(0.9448).epsilon(1e-3));
  for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    const auto k = static_cast<std::size_t>(std::lround((x + 6.0) / 12.0 * 1200));
    CHECK(c.policies[0].control_at(x) == doctest::Approx(ref.u1[k]).epsilon(2e-3));
  }
}

TEST_CASE("oracles degenerate to DET at vanishing noise") {
  for (const char* name : {"affine2", "arctan2"}) {
    CAPTURE(name);
    const ScenarioSpec s = find_scenario(name);
    const OcpInstance tiny = with_noise_scale(build_instance(s), 1e-12);
    const OracleSolution d = det_ocp_oracle(tiny, oracle_box(s));
    const OracleSolution o = ols_ocp_oracle(tiny, 8, oracle_box(s));
    ClsOptions copt;
    copt.quadrature_order = 8;
    copt.certify = false;
    const OracleSolution c = cls_ocp_oracle(tiny, copt);
    CHECK((o.minimizer.values() - d.minimizer.values()).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK((c.minimizer.values() - d.minimizer.values()).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("certainty equivalence on lq1") {
  const ScenarioSpec s = find_scenario("lq1");
  const OcpInstance inst = build_instance(s);
  const double d = det_ocp_oracle(inst, oracle_box(s)).minimizer[0];
  const double o = ols_ocp_oracle(inst, 20, oracle_box(s)).minimizer[0];
  const double c = cls_ocp_oracle(inst).minimizer[0];
  CHECK(std::abs(d - o) <= 1e-6);
  CHECK(std::abs(d - c) <= 1e-6);
  CHECK(std::abs(d + 0.5) <= 1e-6);
}

TEST_CASE("CLS oracle refuses long horizons") {
  ScenarioSpec s = find_scenario("lq1");
  s.horizon = 3;
  CHECK_THROWS_AS(cls_ocp_oracle(build_instance(s)), Error);
}

TEST_CASE("Gibbs mean against brute-force quadrature") {
  const OcpInstance quartic = build_instance(find_scenario("quartic"));
  for (double beta : {0.05, 0.3}) {
    CAPTURE(beta);
    const double ref = reference::gibbs_mean_1d(quartic_j, beta * beta, -2.0, 2.0, 400001);
    CHECK(std::abs(gibbs_mean(quartic, gibbs(beta)).mean[0] - ref) <= 1e-9);
  }

  // arctan2: exponent S(W) + |W|^2 / 2 is exactly J(W, 0); arctan saturates,
  // so the density decays only through the control cost
  const OcpInstance arctan = build_instance(find_scenario("arctan2"));
  const double beta = 0.5;
  const Eigen::Vector2d ref = reference::gibbs_mean_2d(arctan_j, beta * beta, -6.0, 6.0, 2401);
  const GibbsResult g = gibbs_mean(arctan, gibbs(beta, 2, -6.0, 6.0));
  CHECK(std::abs(g.mean[0] - ref[0]) <= 1e-6);
  CHECK(std::abs(g.mean[1] - ref[1]) <= 1e-6);
}

TEST_CASE("Gibbs mean: symmetric problems give zero") {
  ScenarioSpec s = find_scenario("lq1");
  s.x0 = 0.0;
  const OcpInstance lq0 = build_instance(s);
  for (double beta : {0.1, 0.5, 1.0}) {
    CHECK(std::abs(gibbs_mean(lq0, gibbs(beta, 1, -8, 8)).mean[0]) <= 1e-12);
  }
  const OcpInstance sym = build_instance(find_scenario("sym2"));
  const GibbsResult g = gibbs_mean(sym, gibbs(0.5, 2, -4, 4));
  CHECK(g.mean.values().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Gibbs mean: small-beta Laplace behaviour on the quartic") {
  const OcpInstance inst = build_instance(find_scenario("quartic"));
  // prefactor -J'''(0) / (2 J''(0)^2) from finite differences of J
  const double h = 1e-3;
  const double j2 = (quartic_j(h) - 2 * quartic_j(0) + quartic_j(-h)) / (h * h);
  const double j3 =
      (quartic_j(2 * h) - 2 * quartic_j(h) + 2 * quartic_j(-h) - quartic_j(-2 * h)) /
      (2 * h * h * h);
  const double prefactor = -j3 / (2 * j2 * j2);
  CHECK(prefactor == doctest::Approx(-0.28125).epsilon(1e-5));
  for (double beta : {0.05, 0.03, 0.02}) {
    CAPTURE(beta);
    const double ratio = gibbs_mean(inst, gibbs(beta)).mean[0] / (beta * beta);
    CHECK(std::abs(ratio / prefactor - 1.0) <= 0.05);
  }

  // doubling beta quadruples the bias
  const double e1 = std::abs(gibbs_mean(inst, gibbs(0.01)).mean[0]);
  const double e2 = std::abs(gibbs_mean(inst, gibbs(0.02)).mean[0]);
  const double e4 = std::abs(gibbs_mean(inst, gibbs(0.04)).mean[0]);
  CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(0.15));
  CHECK(e4 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("Gibbs mean: |mean| grows with beta on the quartic") {
  const OcpInstance inst = build_instance(find_scenario("quartic"));
  double previous = 0.0;
  for (double beta : {0.5, 1.0, 2.0}) {
    const double m = std::abs(gibbs_mean(inst, gibbs(beta, 1, -4.0, 4.0)).mean[0]);
    CHECK(m > previous);
    previous = m;
  }
}

TEST_CASE("optimal density curves") {
  const OcpInstance inst = build_instance(find_scenario("quartic"));
  auto grid = [](double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
  };
  auto mass = [](const std::vector<std::pair<double, double>>& c, double half_width) {
    double total = 0.0, inside = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      const double a = 0.5 * (c[i].second + c[i + 1].second) * (c[i + 1].first - c[i].first);
      total += a;
      if (std::abs(0.5 * (c[i].first + c[i + 1].first)) < half_width) inside += a;
    }
    return std::pair{total, inside};
  };

  const auto narrow = optimal_density_curve(inst, 0.05, 1.0, grid(-1.0, 1.0, 20001));
  const auto [total, inside] = mass(narrow, 0.05);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(inside > 0.99);

  const auto tenth = optimal_density_curve(inst, 0.1, 1.0, grid(-1.5, 1.5, 30001));
  CHECK(mass(tenth, 0.1).second > 0.99);

  // beta = 1: second basin around the stationary point at -1/2
  const auto wide = optimal_density_curve(inst, 1.0, 1.0, grid(-2.5, 2.5, 5001));
  auto q_at = [&](double w) {
    const auto it = std::min_element(wide.begin(), wide.end(), [&](auto& a, auto& b) {
      return std::abs(a.first - w) < std::abs(b.first - w);
    });
    return it->second;
  };
  CHECK(q_at(-0.5) > q_at(-0.4));
  CHECK(q_at(-0.5) > 0.1 * q_at(0.0));

  ScenarioSpec s = find_scenario("lq1");
  s.x0 = 0.0;
  const auto even = optimal_density_curve(build_instance(s), 0.5, 1.0, grid(-4, 4, 801));
  for (std::size_t i = 0; i < even.size(); ++i) {
    CHECK(even[i].second == doctest::Approx(even[even.size() - 1 - i].second).epsilon(1e-12));
  }

  try {
    optimal_density_curve(inst, 1.0, 1.0, grid(-0.2, 0.2, 101));
    FAIL("expected grid-extent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridExtent);
  }
}

TEST_CASE("slope_fit") {
  std::vector<std::pair<double, double>> quad, quart;
  for (double b : logspace(0.02, 0.2, 8)) {
    quad.emplace_back(b, 3.0 * b * b);
    quart.emplace_back(b, 0.5 * std::pow(b, 4));
  }
  CHECK(std::abs(slope_fit(quad).slope - 2.0) <= 1e-9);
  CHECK(std::abs(slope_fit(quart).slope - 4.0) <= 1e-9);
  CHECK(slope_fit(quad).intercept == doctest::Approx(std::log(3.0)));

  quad[2].second = 0.0;
  const SlopeFit skipped = slope_fit(quad);
  CHECK(skipped.used == 7);
  CHECK_FALSE(skipped.warnings.empty());

  try {
    slope_fit(quad, 0.1, 1.0);
    FAIL("expected insufficient-data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
}
