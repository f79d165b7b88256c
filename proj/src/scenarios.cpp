#include "mppi_lab/scenarios.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace mppi_lab {
namespace {

namespace pt = boost::property_tree;

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v,
                               std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw Error(ErrorCode::kConfig, "key '" + key + "': not a number: '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw Error(ErrorCode::kConfig, "key '" + key + "': not an integer: '" + s + "'");
  }
  return v;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) {
    if (!out.empty()) out += ' ';
    if constexpr (std::is_floating_point_v<T>) {
      out += num(x);
    } else {
      out += std::to_string(x);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ScenarioSpec&)> get;
  std::function<void(ScenarioSpec&, const std::string&)> set;
};

template <class T>
Field field(std::string section, std::string key, T ScenarioSpec::*member) {
  Field f{section, key, nullptr, nullptr};
  const std::string name = section + "." + key;
  f.get = [member](const ScenarioSpec& s) -> std::string {
    const T& v = s.*member;
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, double>) {
      return num(v);
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return join(v);
    }
  };
  f.set = [member, name](ScenarioSpec& s, const std::string& text) {
    T& v = s.*member;
    if constexpr (std::is_same_v<T, std::string>) {
      v = text;
    } else if constexpr (std::is_same_v<T, double>) {
      v = parse_double(name, text);
    } else if constexpr (std::is_integral_v<T>) {
      v = parse_int<T>(name, text);
    } else {
      v.clear();
      for (const auto& tok : split(text)) {
        if constexpr (std::is_floating_point_v<typename T::value_type>) {
          v.push_back(parse_double(name, tok));
        } else {
          v.push_back(parse_int<typename T::value_type>(name, tok));
        }
      }
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  using S = ScenarioSpec;
  static const std::vector<Field> table = {
      field("scenario", "name", &S::name),
      field("problem", "dynamics", &S::dynamics),
      field("problem", "dynamics_params", &S::dynamics_params),
      field("problem", "terminal", &S::terminal),
      field("problem", "terminal_params", &S::terminal_params),
      field("problem", "horizon", &S::horizon),
      field("problem", "x0", &S::x0),
      field("problem", "r", &S::r),
      field("problem", "lambda", &S::lambda),
      field("problem", "sigma", &S::sigma),
      field("solver", "samples", &S::samples),
      field("solver", "iterations", &S::iterations),
      field("solver", "shrink_factor", &S::shrink_factor),
      field("solver", "lambda0", &S::lambda0),
      field("solver", "sigma0", &S::sigma0),
      field("solver", "seed", &S::seed),
      field("solver", "workers", &S::workers),
      field("solver", "init_control", &S::init_control),
      field("oracle", "box_lo", &S::box_lo),
      field("oracle", "box_hi", &S::box_hi),
      field("oracle", "grid_points", &S::grid_points),
      field("oracle", "quadrature_order", &S::quadrature_order),
      field("oracle", "cls_quadrature_order", &S::cls_quadrature_order),
      field("oracle", "cls_grid_points", &S::cls_grid_points),
      field("oracle", "ols_max_evaluations", &S::ols_max_evaluations),
      field("oracle", "gibbs_tol", &S::gibbs_tol),
      field("sweep", "betas", &S::betas),
      field("sweep", "seeds", &S::seeds),
      field("sweep", "mode", &S::mode),
      field("sweep", "pdf_betas", &S::pdf_betas),
      field("sweep", "pdf_lo", &S::pdf_lo),
      field("sweep", "pdf_hi", &S::pdf_hi),
      field("sweep", "pdf_points", &S::pdf_points),
  };
  return table;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

ScenarioSpec base(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  s.betas = logspace(0.02, 0.2, 8);
  s.seeds = seed_range(1, 20);
  return s;
}

std::map<std::string, ScenarioSpec> registry() {
  std::map<std::string, ScenarioSpec> out;

  // J(U) = 20U^4 + 24U^3 + 8U^2 once the control cost 1/2 U^2 is added
  ScenarioSpec quartic = base("quartic");
  quartic.terminal_params = {0.0, 0.0, 7.5, 24.0, 20.0};
  quartic.pdf_betas = {1.0, 0.5, 0.25, 0.125};
  out.emplace(quartic.name, quartic);

  ScenarioSpec affine = base("affine2");
  affine.dynamics = "sine-drift";
  affine.dynamics_params = {0.5, 3.0};
  affine.terminal = "shifted-sextic";
  affine.terminal_params = {1.0, 1.0};
  affine.horizon = 2;
  affine.x0 = -1.0;
  affine.samples = 1000000;
  // sin(3x) inside the sextic needs many nodes before Q -> 2Q settles
  affine.quadrature_order = 160;
  // the OLS optimum sits near u0 = 1.9
  affine.box_lo = -3.0;
  affine.box_hi = 3.0;
  out.emplace(affine.name, affine);

  ScenarioSpec arctan = affine;
  arctan.name = "arctan2";
  arctan.dynamics = "arctan";
  arctan.dynamics_params = {};
  arctan.samples = 100000;
  out.emplace(arctan.name, arctan);

  ScenarioSpec lq = base("lq1");
  lq.terminal_params = {0.0, 0.0, 0.5};
  lq.x0 = 1.0;
  out.emplace(lq.name, lq);

  // mirror-symmetric and convex in U: integrator, E = x^6, x0 = 0
  ScenarioSpec sym = affine;
  sym.name = "sym2";
  sym.dynamics = "integrator";
  sym.dynamics_params = {};
  sym.terminal_params = {0.0, 0.0};
  sym.x0 = 0.0;
  sym.samples = 100000;
  out.emplace(sym.name, sym);
  return out;
}

void expect_params(const std::string& what, const std::vector<double>& p,
                   std::size_t count) {
  if (p.size() != count) {
    throw Error(ErrorCode::kConfig, what + " expects " + std::to_string(count) +
                                        " parameters, got " +
                                        std::to_string(p.size()));
  }
}

}  // namespace

std::vector<double> logspace(double lo, double hi, int count) {
  require(lo > 0.0 && hi > 0.0 && count >= 2, "logspace needs lo, hi > 0, count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * i / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, spec] : registry()) names.push_back(name);
  return names;
}

ScenarioSpec find_scenario(const std::string& name) {
  const auto reg = registry();
  const auto it = reg.find(name);
  if (it == reg.end()) {
    std::string list;
    for (const auto& [n, s] : reg) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::kUnknownScenario,
                "unknown scenario '" + name + "'; registered: " + list);
  }
  return it->second;
}

OcpInstance build_instance(const ScenarioSpec& spec) {
  DynamicsModel dyn;
  const auto& dp = spec.dynamics_params;
  if (spec.dynamics == "integrator") {
    expect_params("integrator dynamics", dp, 0);
    dyn = DynamicsModel::input_affine(
        1, 1, 1, [](const StateVector& x) { return Eigen::VectorXd(x); },
        [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); },
        [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); });
  } else if (spec.dynamics == "sine-drift") {
    expect_params("sine-drift dynamics", dp, 2);
    const double a = dp[0];
    const double b = dp[1];
    dyn = DynamicsModel::input_affine(
        1, 1, 1,
        [a, b](const StateVector& x) {
          return Eigen::VectorXd::Constant(1, x[0] - a * std::sin(b * x[0]));
        },
        [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); },
        [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); });
  } else if (spec.dynamics == "arctan") {
    expect_params("arctan dynamics", dp, 0);
    dyn = DynamicsModel::general(
        1, 1, 1,
        [](const StateVector& x, const VectorRef& u, const VectorRef& w) {
          return StateVector::Constant(1, x[0] + std::atan(u[0] + w[0]));
        });
  } else {
    throw Error(ErrorCode::kConfig, "unknown dynamics kind '" + spec.dynamics +
                                        "' (integrator, sine-drift, arctan)");
  }

  CostModel::ScalarMap terminal;
  const auto& tp = spec.terminal_params;
  if (spec.terminal == "polynomial") {
    if (tp.empty()) throw Error(ErrorCode::kConfig, "polynomial terminal needs coefficients");
    terminal = [tp](const StateVector& x) {
      double v = 0.0;
      for (auto it = tp.rbegin(); it != tp.rend(); ++it) v = v * x[0] + *it;
      return v;
    };
  } else if (spec.terminal == "shifted-sextic") {
    expect_params("shifted-sextic terminal", tp, 2);
    const double c = tp[0];
    const double t = tp[1];
    terminal = [c, t](const StateVector& x) {
      return std::pow(x[0] - c, 6) + t * x[0];
    };
  } else {
    throw Error(ErrorCode::kConfig, "unknown terminal kind '" + spec.terminal +
                                        "' (polynomial, shifted-sextic)");
  }

  OcpInstance inst{
      .dynamics = std::move(dyn),
      .cost = CostModel::make([](const StateVector&) { return 0.0; },
                              Eigen::MatrixXd::Constant(1, 1, spec.r),
                              std::move(terminal)),
      .horizon = spec.horizon,
      .initial_state = StateVector::Constant(1, spec.x0),
      .sigma = CovarianceSpec::scalar(spec.sigma, spec.horizon),
      .lambda = spec.lambda,
  };
  inst.validate();
  return inst;
}

MppiConfig solver_config(const ScenarioSpec& spec, const OcpInstance& inst) {
  MppiConfig cfg = MppiConfig::defaults_for(inst);
  cfg.samples = spec.samples;
  cfg.iterations = spec.iterations;
  cfg.shrink_factor = spec.shrink_factor;
  cfg.lambda0 = spec.lambda0;
  cfg.sigma0 = CovarianceSpec::scalar(spec.sigma0, spec.horizon);
  cfg.seed = spec.seed;
  cfg.workers = spec.workers;
  if (!spec.init_control.empty()) {
    if (static_cast<int>(spec.init_control.size()) != inst.control_size()) {
      throw Error(ErrorCode::kConfig, "init_control needs N*n_u = " +
                                          std::to_string(inst.control_size()) +
                                          " entries");
    }
    cfg.initial_mean = ControlTrajectory(
        inst.horizon, inst.dynamics.control_dim,
        Eigen::Map<const Eigen::VectorXd>(spec.init_control.data(),
                                          inst.control_size()));
  }
  cfg.validate(inst);
  return cfg;
}

SearchBox oracle_box(const ScenarioSpec& spec) {
  return SearchBox::uniform(spec.horizon, spec.box_lo, spec.box_hi);
}

std::string to_ini(const ScenarioSpec& spec) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(spec) + "\n";
  }
  return out;
}

ScenarioSpec merge_ini(const ScenarioSpec& base_spec, const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config parse error: ") + e.what());
  }
  ScenarioSpec spec = base_spec;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error(ErrorCode::kConfig, "key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == fields().end()) {
        throw Error(ErrorCode::kConfig, "unknown config key [" + section + "] " + key);
      }
      it->set(spec, value.data());
    }
  }
  return spec;
}

ScenarioSpec from_ini(const std::string& text) {
  return merge_ini(ScenarioSpec{}, text);
}

std::string config_hash(const ScenarioSpec& spec) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_ini(spec)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mppi_lab
