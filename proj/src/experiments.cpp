#include "mppi_lab/experiments.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mppi_lab/sampling.hpp"

namespace mppi_lab {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// shortest round-trip representation, so reruns give identical bytes
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_output(const fs::path& path, RunRecord& rec) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kConfig, "cannot write " + path.string());
  }
  rec.outputs.push_back(path.string());
  return out;
}

RunRecord start_record(const ScenarioSpec& spec, const std::string& command) {
  RunRecord rec;
  rec.scenario = spec.name;
  rec.command = command;
  rec.config_hash = config_hash(spec);
  rec.seed = spec.seed;
  return rec;
}

OcpInstance gibbs_instance(const ScenarioSpec& spec) {
  // the Gibbs exponent uses the instance covariance as Sigma0
  ScenarioSpec s = spec;
  s.sigma = spec.sigma0;
  return build_instance(s);
}

void add_fit_summary(RunRecord& rec, const std::string& label,
                     const std::optional<SlopeFit>& fit) {
  if (!fit) return;
  rec.summary.push_back(label + " slope " + num(fit->slope) + " (residual " +
                        num(fit->residual) + ", " + std::to_string(fit->used) +
                        " points)");
}

}  // namespace

bool RunRecord::all_passed() const {
  for (const auto& v : verdicts) {
    if (!v.passed) return false;
  }
  return true;
}

void write_run_record(RunRecord& rec, const fs::path& out_dir) {
  const fs::path path = out_dir / ("run-" + rec.command + "-" + rec.scenario + ".json");
  rec.outputs.push_back(path.string());
  nlohmann::json j;
  j["scenario"] = rec.scenario;
  j["command"] = rec.command;
  j["config_hash"] = rec.config_hash;
  j["seed"] = rec.seed;
  j["outputs"] = rec.outputs;
  j["wall_time"] = rec.wall_time;
  j["summary"] = rec.summary;
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : rec.verdicts) {
    j["verdicts"].push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
  }
  fs::create_directories(out_dir);
  std::ofstream(path) << j.dump(2) << '\n';
}

void write_csv_preamble(std::ostream& out, const ScenarioSpec& spec,
                        const std::string& header) {
  out << "# scenario=" << spec.name << " config_hash=" << config_hash(spec)
      << " seed=" << spec.seed << '\n'
      << header << '\n';
}

OracleSolution det_oracle_cached(const ScenarioSpec& spec,
                                 const std::optional<fs::path>& cache_dir) {
  fs::path path;
  if (cache_dir) {
    path = *cache_dir / ("det-" + config_hash(spec) + ".json");
    std::ifstream in(path);
    if (in) {
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded()) {
        const auto u = j.at("minimizer").get<std::vector<double>>();
        OracleSolution sol;
        sol.minimizer = ControlTrajectory(
            spec.horizon, 1, Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
        sol.value = j.at("value").get<double>();
        sol.method = j.at("method").get<std::string>();
        sol.certified_tolerance = j.at("certified_tolerance").get<double>();
        sol.grid_points_per_axis = j.at("grid_points_per_axis").get<int>();
        sol.final_step = j.at("final_step").get<double>();
        return sol;
      }
    }
  }
  GridOptions grid;
  grid.points_per_axis = spec.grid_points;
  const OracleSolution sol = det_ocp_oracle(build_instance(spec), oracle_box(spec), grid);
  if (cache_dir) {
    fs::create_directories(*cache_dir);
    const auto& v = sol.minimizer.values();
    nlohmann::json j;
    j["minimizer"] = std::vector<double>(v.data(), v.data() + v.size());
    j["value"] = sol.value;
    j["method"] = sol.method;
    j["certified_tolerance"] = sol.certified_tolerance;
    j["grid_points_per_axis"] = sol.grid_points_per_axis;
    j["final_step"] = sol.final_step;
    std::ofstream(path) << j.dump(2) << '\n';
  }
  return sol;
}

BiasSweep bias_sweep(const ScenarioSpec& spec, const OracleSolution& det) {
  const auto t0 = Clock::now();
  require(spec.mode == "exact" || spec.mode == "sampled",
          "bias sweep mode must be 'exact' or 'sampled'");
  require(!spec.betas.empty(), "bias sweep needs at least one beta");
  const OcpInstance inst = build_instance(spec);
  const Eigen::VectorXd& u_star = det.minimizer.values();
  BiasSweep out;

  if (spec.mode == "exact") {
    const OcpInstance g_inst = gibbs_instance(spec);
    for (double beta : spec.betas) {
      GibbsOptions opt;
      opt.beta = beta;
      opt.lambda0 = spec.lambda0;
      opt.box = oracle_box(spec);
      opt.abs_tol = spec.gibbs_tol;
      const GibbsResult g = gibbs_mean(g_inst, opt);
      BiasPoint p;
      p.beta = beta;
      p.estimate = g.mean.values();
      p.control_error = (p.estimate - u_star).norm();
      p.value_gap = value_of(inst, g.mean) - det.value;
      out.points.push_back(p);
    }
  } else {
    require(!spec.seeds.empty(), "sampled bias sweep needs seeds");
    const CovarianceSpec sigma0 = CovarianceSpec::scalar(spec.sigma0, spec.horizon);
    const auto n = static_cast<double>(spec.seeds.size());
    for (double beta : spec.betas) {
      const double scale = beta * beta;
      Eigen::MatrixXd est(u_star.size(), static_cast<Eigen::Index>(spec.seeds.size()));
      Eigen::VectorXd gaps(static_cast<Eigen::Index>(spec.seeds.size()));
      for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
        StepOptions so{.samples = spec.samples, .seed = spec.seeds[s],
                       .iteration = 0, .workers = spec.workers};
        const StepResult r = standard_mppi_step(inst, zero_controls(inst),
                                                sigma0.with_scale(scale),
                                                scale * spec.lambda0, so);
        est.col(static_cast<Eigen::Index>(s)) = r.mean.values();
        gaps[static_cast<Eigen::Index>(s)] = value_of(inst, r.mean) - det.value;
      }
      BiasPoint p;
      p.beta = beta;
      p.estimate = est.rowwise().mean();
      p.control_error = (p.estimate - u_star).norm();
      p.value_gap = gaps.mean();
      if (spec.seeds.size() > 1) {
        const Eigen::MatrixXd centered = est.colwise() - p.estimate;
        p.control_se = std::sqrt(centered.squaredNorm() / (n - 1.0) / n);
        p.value_se = std::sqrt((gaps.array() - p.value_gap).square().sum() /
                               (n - 1.0) / n);
      }
      out.points.push_back(p);
    }
  }

  std::vector<std::pair<double, double>> ctrl, val;
  for (const auto& p : out.points) {
    ctrl.emplace_back(p.beta, p.control_error);
    val.emplace_back(p.beta, p.value_gap);
  }
  for (auto [pts, fit, label] :
       {std::tuple{&ctrl, &out.control_fit, "control"},
        std::tuple{&val, &out.value_fit, "value"}}) {
    try {
      *fit = slope_fit(*pts);
      for (const auto& w : (*fit)->warnings) out.warnings.push_back(std::string(label) + ": " + w);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientData) throw;
      out.warnings.push_back(std::string(label) + " slope not fitted: " + e.what());
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

RunRecord cmd_solve(const ScenarioSpec& spec, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  RunRecord rec = start_record(spec, "solve");
  const OcpInstance inst = build_instance(spec);
  const MppiConfig cfg = solver_config(spec, inst);
  std::optional<OracleSolution> det;
  if (inst.control_size() <= 4) det = det_oracle_cached(spec, out_dir / "cache");
  const SolveReport report = deterministic_mppi_solve(inst, cfg);

  std::ostringstream header;
  header << "j,beta,lambda";
  for (int i = 0; i < inst.control_size(); ++i) header << ",u_" << i;
  header << ",value,control_error,value_error,ess,max_weight,rejected";
  std::ofstream csv = open_output(out_dir / ("solve-" + spec.name + ".csv"), rec);
  write_csv_preamble(csv, spec, header.str());
  for (const auto& it : report.history) {
    csv << it.iteration << ',' << num(it.beta) << ',' << num(it.lambda);
    for (double u : it.mean.values()) csv << ',' << num(u);
    csv << ',' << num(it.value);
    if (det) {
      csv << ',' << num((it.mean.values() - det->minimizer.values()).norm()) << ','
          << num(it.value - det->value);
    } else {
      csv << ",,";
    }
    csv << ',' << num(it.effective_sample_size) << ',' << num(it.max_weight) << ','
        << it.rejected << '\n';
  }
  rec.summary.push_back("final value " + num(report.value));
  if (det) {
    rec.summary.push_back(
        "final control error vs DET " +
        num((report.solution.values() - det->minimizer.values()).norm()));
  }
  for (const auto& w : report.warnings) rec.summary.push_back("warning: " + w);
  rec.wall_time = seconds_since(t0);
  return rec;
}

RunRecord cmd_bias_sweep(const ScenarioSpec& spec, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  RunRecord rec = start_record(spec, "bias-sweep");
  const OracleSolution det = det_oracle_cached(spec, out_dir / "cache");
  const BiasSweep sweep = bias_sweep(spec, det);
  const std::string stem = "bias-" + spec.name + "-" + spec.mode;
  {
    std::ofstream csv = open_output(out_dir / (stem + ".csv"), rec);
    write_csv_preamble(csv, spec, "beta,control_error,value_gap,control_se,value_se");
    for (const auto& p : sweep.points) {
      csv << num(p.beta) << ',' << num(p.control_error) << ',' << num(p.value_gap)
          << ',' << num(p.control_se) << ',' << num(p.value_se) << '\n';
    }
  }
  {
    std::ofstream py = open_output(out_dir / ("plot-" + stem + ".py"), rec);
    py << "import numpy as np\nimport matplotlib.pyplot as plt\n\n"
       << "d = np.genfromtxt('" << stem << ".csv', delimiter=',', names=True, "
       << "comments='#')\n"
       << "plt.loglog(d['beta'], d['control_error'], 'o-', label='control error')\n"
       << "plt.loglog(d['beta'], np.abs(d['value_gap']), 's-', label='value gap')\n"
       << "plt.xlabel('beta')\nplt.legend()\nplt.savefig('" << stem << ".png')\n";
  }
  add_fit_summary(rec, "control", sweep.control_fit);
  add_fit_summary(rec, "value", sweep.value_fit);
  for (const auto& w : sweep.warnings) rec.summary.push_back("warning: " + w);
  rec.wall_time = seconds_since(t0);
  return rec;
}

RunRecord cmd_pdf_curve(const ScenarioSpec& spec, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  RunRecord rec = start_record(spec, "pdf-curve");
  const OcpInstance inst = gibbs_instance(spec);
  require(inst.control_size() == 1, "pdf-curve needs a scalar scenario (N*n_u = 1)");
  require(spec.pdf_points >= 3 && spec.pdf_hi > spec.pdf_lo, "bad pdf grid");
  std::vector<double> grid(static_cast<std::size_t>(spec.pdf_points));
  for (int i = 0; i < spec.pdf_points; ++i) {
    grid[i] = spec.pdf_lo + (spec.pdf_hi - spec.pdf_lo) * i / (spec.pdf_points - 1);
  }
  std::vector<std::string> files;
  for (std::size_t b = 0; b < spec.pdf_betas.size(); ++b) {
    const double beta = spec.pdf_betas[b];
    const auto curve = optimal_density_curve(inst, beta, spec.lambda0, grid);
    const std::string name = "pdf-" + spec.name + "-" + std::to_string(b) + ".csv";
    std::ofstream csv = open_output(out_dir / name, rec);
    csv << "# beta=" << num(beta) << '\n';
    write_csv_preamble(csv, spec, "w,density");
    for (const auto& [w, q] : curve) csv << num(w) << ',' << num(q) << '\n';
    files.push_back(name);
  }
  std::ofstream py = open_output(out_dir / ("plot-pdf-" + spec.name + ".py"), rec);
  py << "import numpy as np\nimport matplotlib.pyplot as plt\n\n";
  for (std::size_t b = 0; b < files.size(); ++b) {
    py << "d = np.genfromtxt('" << files[b] << "', delimiter=',', names=True, comments='#')\n"
       << "plt.plot(d['w'], d['density'], label='beta=" << num(spec.pdf_betas[b]) << "')\n";
  }
  py << "plt.xlabel('W')\nplt.ylabel('q*')\nplt.legend()\nplt.savefig('pdf-" << spec.name
     << ".png')\n";
  rec.wall_time = seconds_since(t0);
  return rec;
}

Comparison compare_solutions(const ScenarioSpec& spec) {
  const OcpInstance inst = build_instance(spec);
  require(inst.horizon == 2 && inst.dynamics.state_dim == 1 &&
              inst.dynamics.control_dim == 1,
          "compare needs a scalar scenario with N = 2");
  Comparison c;
  GridOptions grid;
  grid.points_per_axis = spec.grid_points;
  c.det = det_ocp_oracle(inst, oracle_box(spec), grid);
  GridOptions ols_grid = grid;
  ols_grid.max_evaluations = spec.ols_max_evaluations;
  c.ols = ols_ocp_oracle(inst, spec.quadrature_order, oracle_box(spec), ols_grid);
  ClsOptions cls;
  cls.quadrature_order = spec.cls_quadrature_order;
  cls.grid_points = spec.cls_grid_points;
  c.cls = cls_ocp_oracle(inst, cls);
  const MppiConfig cfg = solver_config(spec, inst);
  c.deterministic = deterministic_mppi_solve(inst, cfg);
  c.input_affine = inst.dynamics.kind == DynamicsKind::kInputAffine;
  const StepOptions so{.samples = spec.samples, .seed = spec.seed, .iteration = 0,
                       .workers = spec.workers};
  const StepResult step = standard_mppi_step(inst, zero_controls(inst), cfg.sigma0,
                                             cfg.lambda0, so);
  c.standard_u = step.mean.values();
  c.standard_se = step.standard_error;
  if (c.input_affine) {
    const auto probes = probe_states(StateVector::Constant(1, -3.0),
                                     StateVector::Constant(1, 3.0));
    const ClsEstimate est = cls_mppi_u0(inst, so, probes);
    c.standard_u[0] = est.control[0];
    c.standard_se[0] = est.standard_error[0];
  }
  return c;
}

RunRecord cmd_compare(const ScenarioSpec& spec, const fs::path& out_dir) {
  const auto t0 = Clock::now();
  RunRecord rec = start_record(spec, "compare");
  const Comparison c = compare_solutions(spec);
  const OcpInstance inst = build_instance(spec);
  {
    std::ofstream csv = open_output(out_dir / ("compare-" + spec.name + ".csv"), rec);
    write_csv_preamble(csv, spec, "method,j,u0,u1,value,tolerance");
    auto row = [&](const std::string& m, int j, const Eigen::VectorXd& u, double v,
                   double tol) {
      csv << m << ',' << j << ',' << num(u[0]) << ',' << num(u[1]) << ',' << num(v)
          << ',' << num(tol) << '\n';
    };
    row("det", 0, c.det.minimizer.values(), c.det.value, c.det.certified_tolerance);
    row("ols", 0, c.ols.minimizer.values(), c.ols.value, c.ols.certified_tolerance);
    row("cls", 0, c.cls.minimizer.values(), c.cls.value, c.cls.certified_tolerance);
    for (const auto& it : c.deterministic.history) {
      row("mppi-iterate", it.iteration, it.mean.values(), it.value,
          it.standard_error.norm());
    }
    const ControlTrajectory su(2, 1, c.standard_u);
    row("standard-mppi", 0, c.standard_u, value_of(inst, su), c.standard_se.norm());
  }
  {
    std::ofstream csv =
        open_output(out_dir / ("compare-" + spec.name + "-policy.csv"), rec);
    write_csv_preamble(csv, spec, "x1,u1,v1");
    const PolicyTable& p = c.cls.policies.front();
    for (Eigen::Index i = 0; i < p.states.size(); ++i) {
      csv << num(p.states[i]) << ',' << num(p.controls[i]) << ',' << num(p.values[i])
          << '\n';
    }
    if (p.boundary_hits > 0) {
      rec.summary.push_back("warning: " + std::to_string(p.boundary_hits) +
                            " policy grid states hit the u1 search bound");
    }
  }
  if (c.input_affine) {
    const double diff = std::abs(c.standard_u[0] - c.cls.minimizer[0]);
    const double band = 3.0 * (c.standard_se[0] + c.cls.certified_tolerance);
    rec.verdicts.push_back(
        {"standard-mppi-matches-cls", diff <= band,
         "|u0 mppi - u0 cls| = " + num(diff) + " vs band " + num(band) +
             " (mppi " + num(c.standard_u[0]) + ", cls " + num(c.cls.minimizer[0]) + ")"});
  } else {
    const double err = (c.deterministic.solution.values() - c.det.minimizer.values())
                           .cwiseAbs()
                           .maxCoeff();
    rec.verdicts.push_back({"shrinking-noise-endpoint-matches-det", err <= 1e-2,
                            "max |U_I - U*_det| = " + num(err) + " (limit 1e-2)"});
  }
  rec.wall_time = seconds_since(t0);
  return rec;
}

}  // namespace mppi_lab
