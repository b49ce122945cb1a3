#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ahflow/error.hpp"
#include "ahflow/runner.hpp"
#include "ahflow/verify.hpp"

using namespace ahflow;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + p.string());
  f << j.dump(2) << '\n';
}

RunConfig config_from(const std::string& path) {
  auto c = load_config(path);
  for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
  return c;
}

int cmd_simulate(const std::string& config, const std::string& out) {
  auto c = config_from(config);
  if (!out.empty()) c.output_dir = out;
  const auto r = simulate(c);
  emit_outputs(r, c, c.output_dir);
  std::cout << "termination " << termination_name(r.traj.termination) << " at t = " << r.traj.final().time
            << " after " << r.traj.steps << " steps\n"
            << "lambda1 " << r.summary["lambda1_fit"]["lambda1"] << "\n"
            << "run directory " << c.output_dir << '\n';
  return exit_code_for(r.traj.termination);
}

int cmd_make_initial(const std::string& config, const std::string& out) {
  const auto c = config_from(config);
  const auto m = build_initial(c);
  const fs::path path = out.empty() ? fs::path(c.output_dir) / "initial.csv" : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_metric_csv(m, path.string());
  std::cout << "wrote " << path.string() << " (" << m.size() << " points)\n";
  return 0;
}

int verify_metric(const std::string& metric, const std::string& config, std::string out) {
  const RunConfig c = config.empty() ? RunConfig{} : config_from(config);
  auto m = read_metric_csv(metric, c.n, c.cross_section);
  m.validate();
  if (out.empty()) out = fs::path(metric).replace_extension(".verify").string();
  fs::create_directories(out);

  ValidationOptions vo;
  vo.lambda0 = c.lambda0;
  vo.fit_lo = c.fit.x_lo;
  vo.fit_hi = c.fit.x_hi;
  const auto val = validate_initial(m, c.diagnostics.gamma, c.epsilon, vo);
  write_json(fs::path(out) / "validation.json", val.to_json());
  CurvatureOptions co;
  co.accuracy = 4;
  const auto bundle = curvature_closed_form(m, co);
  write_json(fs::path(out) / "curvature.json", bundle_summary(bundle));
  write_bundle_csv(bundle, (fs::path(out) / "curvature.csv").string());
  const auto cb = condition_b_report(m);
  write_json(fs::path(out) / "condition_b.json", cb.to_json());
  write_json(fs::path(out) / "nondegeneracy.json", nondegeneracy_rayleigh(m).to_json());

  nlohmann::json vol = nlohmann::json::array();
  for (double x0 : {0.1, 0.3, 0.6}) {
    if (x0 > m.grid()->x_max()) continue;
    const auto w = weighted_volume(m, c.alpha, x0);
    vol.push_back({{"x0", x0},
                   {"alpha", c.alpha},
                   {"value", w.value},
                   {"divergence_warning", w.divergence_warning},
                   {"deepening_growth", w.deepening_growth}});
  }
  write_json(fs::path(out) / "weighted_volume.json", vol);

  std::cout << "validate_initial " << (val.pass ? "pass" : "fail") << " (measured epsilon "
            << val.measured_epsilon << ", slope " << val.slope.gamma << ")\n"
            << "condition B: k0 " << cb.k0 << " k1 " << cb.k1 << " v0 " << cb.v0 << " lambda " << cb.lambda
            << "\nreports in " << out << '\n';
  return 0;
}

int verify_run(const std::string& dir) {
  const auto r = load_run(dir);
  const fs::path reports = fs::path(dir) / "reports";
  fs::create_directories(reports);
  const auto df = defining_function_checks(r.traj);
  write_json(reports / "verify_defining_function.json", df.to_json());
  std::cout << "defining function: C_laplace " << df.max_c_laplace << " C_gradient " << df.max_c_gradient << '\n';
  if (r.traj.mode == FlowMode::nrf && r.traj.snapshots.size() >= 3) {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& rep : evolution_residuals(r.traj)) {
      std::cout << rep.name << " sup residual " << rep.sup << '\n';
      res.push_back(rep.to_json());
    }
    write_json(reports / "verify_evolution_residuals.json", res);
    nlohmann::json mon = nlohmann::json::array();
    for (const auto& m : evolution_monitors(r.traj)) mon.push_back(m.to_json());
    write_json(reports / "verify_monitors.json", mon);
  } else {
    std::cout << "evolution residuals skipped: need a pure NRF run with at least 3 snapshots\n";
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Normalized Ricci flow of warped asymptotically hyperbolic metrics"};
  app.require_subcommand(1);

  std::string config, out, metric, run_dir;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* sim = app.add_subcommand("simulate", "run the flow and write a run directory");
  sim->add_option("config", config, "config file")->required();
  sim->add_option("--out", out, "run directory (overrides output.dir)");

  auto* mk = app.add_subcommand("make-initial", "write the initial metric of a recipe");
  mk->add_option("config", config, "config file")->required();
  mk->add_option("--out", out, "metric CSV path");

  auto* ver = app.add_subcommand("verify", "run the checks on a metric snapshot or a stored run");
  auto* om = ver->add_option("--metric", metric, "metric CSV (x,A,B)");
  auto* orun = ver->add_option("--run", run_dir, "run directory");
  om->excludes(orun);
  ver->add_option("--config", config, "config giving n, cross-section and thresholds");
  ver->add_option("--out", out, "report directory for --metric");

  auto* rep = app.add_subcommand("report", "re-derive fits and flags from a stored run");
  rep->add_option("run", run_dir, "run directory")->required();

  auto* sw = app.add_subcommand("sweep", "run the amplitude x gamma grid concurrently");
  sw->add_option("config", config, "config file")->required();
  sw->add_option("--out", out, "parent directory (overrides output.dir)");
  sw->add_option("--jobs", jobs, "concurrent runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (sim->parsed()) return cmd_simulate(config, out);
  if (mk->parsed()) return cmd_make_initial(config, out);
  if (ver->parsed()) {
    if (!metric.empty()) return verify_metric(metric, config, out);
    if (!run_dir.empty()) return verify_run(run_dir);
    throw Error(ErrorKind::missing_input, "verify needs --metric or --run");
  }
  if (rep->parsed()) {
    const auto s = report_run(run_dir);
    std::cout << s["acceptance_flags"].dump(2) << '\n';
    return 0;
  }
  if (sw->parsed()) {
    auto c = config_from(config);
    const auto dir = out.empty() ? c.output_dir : out;
    int worst = 0;
    for (const auto& o : run_sweep(c, dir, jobs)) {
      std::cout << o.job.subdir << ": " << (o.error.empty() ? o.termination : o.error) << '\n';
      worst = std::max(worst, o.exit_code);
    }
    return worst;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io-error: " << e.what() << '\n';
    return 4;
  }
}
