#include "ahflow/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "ahflow/error.hpp"
#include "ahflow/numeric.hpp"
#include "ahflow/verify.hpp"

namespace fs = std::filesystem;

namespace ahflow {

namespace {

struct BadValue {
  std::string why;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw BadValue{"expected a number, got '" + s + "'"};
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw BadValue{"expected an integer, got '" + s + "'"};
  return v;
}

std::size_t to_count(const std::string& s) {
  const auto v = to_int(s);
  if (v < 0) throw BadValue{"expected a non-negative integer, got '" + s + "'"};
  return std::size_t(v);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::vector<double> to_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  return out;
}

// Shortest text that reads back to the same double.
std::string short_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + short_double(v[i]);
  return s;
}

template <class F>
auto wrap(F f, const std::string& s) {
  try {
    return f(s);
  } catch (const Error& e) {
    throw BadValue{e.what()};
  }
}

const char* initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::hyperbolic: return "hyperbolic";
    case InitialKind::glued: return "glued";
    case InitialKind::file: return "file";
  }
  return "hyperbolic";
}

InitialKind parse_initial_kind(const std::string& s) {
  if (s == "hyperbolic") return InitialKind::hyperbolic;
  if (s == "glued") return InitialKind::glued;
  if (s == "file") return InitialKind::file;
  throw BadValue{"unknown recipe '" + s + "' (hyperbolic, glued, file)"};
}

DtPolicy parse_dt_policy(const std::string& s) {
  if (s == "cfl") return DtPolicy::cfl;
  if (s == "fixed") return DtPolicy::fixed;
  throw BadValue{"unknown dt policy '" + s + "' (cfl, fixed)"};
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DOUBLE_KEY(name, field) \
  Key { name, [](RunConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const RunConfig& c) { return short_double(c.field); } }
#define COUNT_KEY(name, field) \
  Key { name, [](RunConfig& c, const std::string& v) { c.field = to_count(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); } }
#define INT_KEY(name, field) \
  Key { name, [](RunConfig& c, const std::string& v) { c.field = int(to_int(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.field); } }
#define BOOL_KEY(name, field) \
  Key { name, [](RunConfig& c, const std::string& v) { c.field = to_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); } }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      INT_KEY("n", n),
      Key{"cross_section",
          [](RunConfig& c, const std::string& v) { c.cross_section = wrap(parse_cross_section, v); },
          [](const RunConfig& c) { return std::string(cross_section_name(c.cross_section)); }},
      Key{"seed", [](RunConfig& c, const std::string& v) { c.seed = to_count(v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      Key{"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
          [](const RunConfig& c) { return c.output_dir; }},
      COUNT_KEY("grid.N", N),
      DOUBLE_KEY("grid.x_max", x_max),
      DOUBLE_KEY("grid.stretch", stretch),
      Key{"initial.recipe",
          [](RunConfig& c, const std::string& v) { c.initial.kind = parse_initial_kind(v); },
          [](const RunConfig& c) { return std::string(initial_kind_name(c.initial.kind)); }},
      INT_KEY("initial.k", initial.glue.k),
      DOUBLE_KEY("initial.nu1", initial.glue.nu1),
      DOUBLE_KEY("initial.scale", initial.scale),
      Key{"initial.file", [](RunConfig& c, const std::string& v) { c.initial.file = v; },
          [](const RunConfig& c) { return c.initial.file; }},
      Key{"flow.mode", [](RunConfig& c, const std::string& v) { c.flow.mode = wrap(parse_flow_mode, v); },
          [](const RunConfig& c) { return std::string(flow_mode_name(c.flow.mode)); }},
      DOUBLE_KEY("flow.T", flow.T_final),
      Key{"flow.dt_policy", [](RunConfig& c, const std::string& v) { c.flow.dt_policy = parse_dt_policy(v); },
          [](const RunConfig& c) { return std::string(c.flow.dt_policy == DtPolicy::cfl ? "cfl" : "fixed"); }},
      DOUBLE_KEY("flow.dt", flow.dt),
      DOUBLE_KEY("flow.safety", flow.safety),
      Key{"flow.inner", [](RunConfig& c, const std::string& v) { c.flow.inner = wrap(parse_inner_boundary, v); },
          [](const RunConfig& c) { return std::string(inner_boundary_name(c.flow.inner)); }},
      Key{"flow.outer", [](RunConfig& c, const std::string& v) { c.flow.outer = wrap(parse_outer_boundary, v); },
          [](const RunConfig& c) { return std::string(outer_boundary_name(c.flow.outer)); }},
      INT_KEY("flow.accuracy", flow.accuracy),
      COUNT_KEY("flow.record_every", flow.record_every),
      COUNT_KEY("flow.snapshot_every", flow.snapshot_every),
      DOUBLE_KEY("flow.converge_tol", flow.converge_tol),
      DOUBLE_KEY("flow.converge_relative", converge_relative),
      DOUBLE_KEY("flow.blowup_threshold", flow.blowup_threshold),
      INT_KEY("flow.max_halvings", flow.max_halvings),
      DOUBLE_KEY("flow.dissipation", flow.dissipation),
      BOOL_KEY("flow.reference_subtraction", flow.reference_subtraction),
      DOUBLE_KEY("flow.gauge_onset", flow.gauge_onset),
      DOUBLE_KEY("diagnostics.gamma", diagnostics.gamma),
      COUNT_KEY("diagnostics.probe_count", diagnostics.probe_count),
      DOUBLE_KEY("diagnostics.window", diagnostics.window),
      DOUBLE_KEY("diagnostics.alpha", alpha),
      DOUBLE_KEY("diagnostics.lambda0", lambda0),
      DOUBLE_KEY("diagnostics.epsilon", epsilon),
      BOOL_KEY("diagnostics.condition_b", condition_b),
      DOUBLE_KEY("fit.t_lo", fit.t_lo),
      DOUBLE_KEY("fit.t_hi", fit.t_hi),
      DOUBLE_KEY("fit.x_lo", fit.x_lo),
      DOUBLE_KEY("fit.x_hi", fit.x_hi),
      DOUBLE_KEY("fit.drift_x_hi", fit.drift_x_hi),
      DOUBLE_KEY("fit.time_noise_floor", fit.time_noise_floor),
      DOUBLE_KEY("fit.space_noise_floor", fit.space_noise_floor),
      BOOL_KEY("study.convergence", convergence_study),
      Key{"sweep.amplitudes", [](RunConfig& c, const std::string& v) { c.sweep_amplitudes = to_list(v); },
          [](const RunConfig& c) { return list_text(c.sweep_amplitudes); }},
      Key{"sweep.gammas", [](RunConfig& c, const std::string& v) { c.sweep_gammas = to_list(v); },
          [](const RunConfig& c) { return list_text(c.sweep_gammas); }},
  };
  return k;
}

#undef DOUBLE_KEY
#undef COUNT_KEY
#undef INT_KEY
#undef BOOL_KEY

void validate_config(RunConfig& c) {
  std::vector<std::string> issues;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };
  need(c.n >= 4 && c.n <= 8, "n: supported range is [4, 8], got " + std::to_string(c.n));
  need(c.N >= RadialGrid::min_points, "grid.N: need at least 16 points");
  need(c.x_max > 0, "grid.x_max: must be positive");
  need(c.stretch >= 1, "grid.stretch: must be at least 1");
  if (c.initial.kind == InitialKind::glued) {
    need(c.initial.scale > 0, "initial.scale: must be positive");
    if (c.n >= 4 && c.n <= 8) {
      try {
        c.initial.glue.validate(c.n, c.x_max);
      } catch (const Error& e) {
        issues.push_back(std::string("initial: ") + e.what());
      }
    }
  }
  need(c.initial.kind != InitialKind::file || !c.initial.file.empty(),
       "initial.file: required by the file recipe");
  try {
    c.flow.validate();
  } catch (const ConfigError& e) {
    for (const auto& s : e.issues()) issues.push_back(s);
  }
  need(c.converge_relative >= 0 && c.converge_relative < 1, "flow.converge_relative: must lie in [0, 1)");
  need(c.diagnostics.gamma > 0, "diagnostics.gamma: must be positive");
  need(c.diagnostics.probe_count >= 1, "diagnostics.probe_count: must be at least 1");
  need(c.diagnostics.window >= 0, "diagnostics.window: must be non-negative");
  need(c.alpha > 0, "diagnostics.alpha: must be positive");
  need(c.lambda0 > 0, "diagnostics.lambda0: must be positive");
  need(c.epsilon > 0, "diagnostics.epsilon: must be positive");
  need(c.fit.t_lo >= 0, "fit.t_lo: must be non-negative");
  need(c.fit.t_hi == 0 || c.fit.t_hi > c.fit.t_lo, "fit.t_hi: must exceed fit.t_lo (or be 0)");
  need(c.fit.x_lo >= 0 && c.fit.x_hi > c.fit.x_lo, "fit.x_hi: must exceed fit.x_lo >= 0");
  need(c.fit.drift_x_hi > 0, "fit.drift_x_hi: must be positive");
  need(c.fit.time_noise_floor >= 0, "fit.time_noise_floor: must be non-negative");
  need(c.fit.space_noise_floor >= 0, "fit.space_noise_floor: must be non-negative");
  for (double a : c.sweep_amplitudes) need(a > -1, "sweep.amplitudes: entries must exceed -1");
  for (double g : c.sweep_gammas) need(g > 0, "sweep.gammas: entries must be positive");
  if (!issues.empty()) throw ConfigError(ErrorKind::validation_error, issues);

  c.warnings.clear();
  const auto [lo, hi] = gamma_window(c.n, c.lambda0);
  if (!(c.diagnostics.gamma > lo && c.diagnostics.gamma < hi)) {
    std::ostringstream os;
    os << "diagnostics.gamma = " << c.diagnostics.gamma << " lies outside the admissible window (" << lo
       << ", " << hi << ") for n = " << c.n;
    c.warnings.push_back(os.str());
  }
  if (c.convergence_study && c.n < 5)
    c.warnings.push_back("study.convergence: the decay statement needs n >= 5, got " + std::to_string(c.n));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io_error, "cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create " + p.string() + ": " + ec.message());
}

nlohmann::json flag(double value, double threshold, bool pass) {
  return {{"value", value}, {"threshold", threshold}, {"pass", pass}};
}

}  // namespace

std::string RunConfig::echo() const {
  std::string s;
  for (const auto& k : keys()) s += std::string(k.name) + " = " + k.get(*this) + "\n";
  return s;
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::vector<std::string> bad, unknown, seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) {
      bad.push_back(where + "expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      bad.push_back(where + "empty key");
      continue;
    }
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      bad.push_back(where + "duplicate key " + key);
      continue;
    }
    seen.push_back(key);
    const auto& ks = keys();
    const auto it = std::find_if(ks.begin(), ks.end(), [&](const Key& k) { return key == k.name; });
    if (it == ks.end()) {
      unknown.push_back(key + ": unknown key");
      continue;
    }
    try {
      it->set(c, value);
    } catch (const BadValue& e) {
      bad.push_back(where + key + ": " + e.why);
    }
  }
  if (!bad.empty()) throw ConfigError(ErrorKind::parse_error, bad);
  try {
    validate_config(c);
  } catch (const ConfigError& e) {
    auto all = unknown;
    all.insert(all.end(), e.issues().begin(), e.issues().end());
    throw ConfigError(ErrorKind::validation_error, all);
  }
  if (!unknown.empty()) throw ConfigError(ErrorKind::validation_error, unknown);
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

WarpedMetric build_initial(const RunConfig& cfg) {
  if (cfg.initial.kind == InitialKind::file) {
    auto m = read_metric_csv(cfg.initial.file, cfg.n, cfg.cross_section);
    m.validate();
    return m;
  }
  auto base = einstein_model(build_grid(cfg.N, cfg.x_max, cfg.stretch), cfg.n, cfg.cross_section);
  if (cfg.initial.kind == InitialKind::hyperbolic) return base;
  BoundaryData bd;
  bd.cross_section = cfg.cross_section;
  bd.scale = cfg.initial.scale;
  return build_glued_candidate(base, bd, cfg.initial.glue);
}

nlohmann::json termination_json(const FlowTrajectory& traj) {
  return {{"reason", termination_name(traj.termination)},
          {"detail", traj.termination_detail},
          {"steps", traj.steps},
          {"rejected", traj.rejected},
          {"t", traj.snapshots.empty() ? 0.0 : traj.final().time}};
}

nlohmann::json summarize(const RunConfig& cfg, const std::vector<DiagnosticsRecord>& records,
                         const WarpedMetric& initial, const WarpedMetric& final,
                         const nlohmann::json& termination) {
  if (records.empty()) throw Error(ErrorKind::insufficient_snapshots, "no diagnostics records");
  nlohmann::json s;
  s["termination"] = termination;
  s["seed"] = cfg.seed;

  std::vector<double> t, y;
  for (const auto& r : records) {
    t.push_back(r.t);
    y.push_back(r.sup_h);
  }
  const double t_hi = cfg.fit.t_hi > 0 ? cfg.fit.t_hi : t.back();
  const auto lf = decay_fit_time(t, y, cfg.fit.t_lo, t_hi, cfg.fit.time_noise_floor);
  s["lambda1_fit"] = to_json(lf);
  s["lambda1_fit"]["window"] = {cfg.fit.t_lo, t_hi};
  s["lambda1_fit"]["noise_floor"] = cfg.fit.time_noise_floor;

  ValidationOptions vo;
  vo.lambda0 = cfg.lambda0;
  vo.fit_lo = cfg.fit.x_lo;
  vo.fit_hi = cfg.fit.x_hi;
  const auto val = validate_initial(initial, cfg.diagnostics.gamma, cfg.epsilon, vo);
  s["gamma_fit"] = to_json(val.slope);
  s["gamma_fit"]["window"] = {cfg.fit.x_lo, cfg.fit.x_hi};

  const auto drift = conformal_drift(final, initial);
  const auto& x = initial.grid()->points();
  const auto df = decay_fit_space(x, drift, 0.0, cfg.fit.drift_x_hi, {cfg.fit.space_noise_floor});
  s["drift_slope"] = to_json(df);
  s["drift_slope"]["window"] = {0.0, cfg.fit.drift_x_hi};
  s["drift_slope"]["noise_floor"] = cfg.fit.space_noise_floor;

  s["condition_b"] = nullptr;
  if (cfg.condition_b) {
    // A coarse grid cannot host the spectral estimate; the run itself is still valid.
    try {
      s["condition_b"] = condition_b_report(initial).to_json();
    } catch (const Error& e) {
      s["condition_b"] = {{"error", e.what()}};
    }
  }

  nlohmann::json f;
  bool monotone = true, finite = true;
  double worst_h = 0, worst_change = 0, boundary = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    for (double v : r.values()) finite = finite && std::isfinite(v);
    if (k > 0 && r.t >= cfg.fit.t_lo && records[k - 1].t >= cfg.fit.t_lo && r.sup_h > records[k - 1].sup_h)
      monotone = false;
    worst_h = std::max(worst_h, r.sup_h);
    worst_change = std::max(worst_change, r.max_rel_change);
    boundary = std::max({boundary, std::abs(r.a_boundary - records[0].a_boundary),
                         std::abs(r.b_boundary - records[0].b_boundary)});
  }
  f["finite"] = finite;
  f["monotone_after_transient"] = {{"transient", cfg.fit.t_lo}, {"pass", monotone}};
  const double ratio = records[0].sup_h > 0 ? records.back().sup_h / records[0].sup_h : 0.0;
  f["decay_ratio"] = flag(ratio, 0.1, ratio < 0.1);
  f["lambda1_positive"] = flag(lf.lambda1, 0.0, !lf.refused && !lf.non_decaying && lf.lambda1 > 0);
  f["drift_slope"] = flag(df.gamma, cfg.diagnostics.gamma - 0.3,
                          !df.refused && df.gamma >= cfg.diagnostics.gamma - 0.3);
  f["boundary_motion"] = flag(boundary, 1e-6, boundary < 1e-6);

  const auto [lo, hi] = gamma_window(cfg.n, cfg.lambda0);
  const bool window_ok = cfg.n >= 5 && cfg.diagnostics.gamma > lo && cfg.diagnostics.gamma < hi;
  double wmax = 0;
  if (!lf.refused)
    for (const auto& r : records) wmax = std::max(wmax, std::exp(lf.lambda1 * r.t) * r.weighted_sup_h);
  const double wratio = records[0].weighted_sup_h > 0 ? wmax / records[0].weighted_sup_h : 0.0;
  f["weighted_monitor"] = flag(wratio, 2.0, !lf.refused && wratio <= 2.0);
  f["weighted_monitor"]["applies"] = window_ok;
  f["gamma_window"] = {{"lo", lo}, {"hi", hi}, {"pass", window_ok}};

  const double tol = cfg.converge_relative > 0 ? cfg.converge_relative * records[0].sup_h
                                               : cfg.flow.converge_tol;
  const bool converged = termination.value("reason", "") == std::string(termination_name(Termination::converged));
  f["converged_below_tol"] = flag(records.back().sup_h, tol, !converged || records.back().sup_h <= tol);
  f["converged_below_tol"]["converged"] = converged;
  f["fixed_point"] = {{"sup_h", worst_h},
                      {"max_rel_change", worst_change},
                      {"threshold", 1e-6},
                      {"pass", worst_h < 1e-6 && worst_change < 1e-6}};
  s["acceptance_flags"] = f;
  s["initial_validation"] = val.to_json();
  return s;
}

RunResult simulate(const RunConfig& cfg) {
  const auto init = build_initial(cfg);
  FlowConfig fc = cfg.flow;
  RunResult r;
  r.initial_sup_h = diagnose(init, init, cfg.diagnostics, fc.accuracy, 0.0).sup_h;
  if (cfg.converge_relative > 0) fc.converge_tol = cfg.converge_relative * r.initial_sup_h;
  r.traj = run(init, fc, cfg.diagnostics);

  r.reports["termination"] = termination_json(r.traj);
  r.reports["manifest"] = r.traj.manifest();
  r.reports["flow_config"] = fc.to_json();
  r.reports["grid"] = grid_to_json(*init.grid());
  CurvatureOptions co;
  co.accuracy = 4;
  r.reports["curvature_initial"] = bundle_summary(curvature_closed_form(init, co));
  r.reports["curvature_final"] = bundle_summary(curvature_closed_form(r.traj.final(), co));
  r.summary = summarize(cfg, r.traj.records, r.traj.initial(), r.traj.final(), r.reports["termination"]);
  r.reports["validation"] = r.summary["initial_validation"];
  return r;
}

void write_diagnostics_csv(const std::vector<DiagnosticsRecord>& records, const std::string& path) {
  std::string out;
  const auto cols = DiagnosticsRecord::columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : records) {
    const auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<DiagnosticsRecord> read_diagnostics_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  const auto cols = DiagnosticsRecord::columns();
  std::string header;
  for (std::size_t i = 0; i < cols.size(); ++i) header += (i ? "," : "") + cols[i];
  if (!std::getline(in, line) || trim(line) != header)
    throw Error(ErrorKind::parse_error, path + ":1: header does not match the diagnostics columns");
  std::vector<DiagnosticsRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) v.push_back(to_double(trim(item)));
    } catch (const BadValue& e) {
      throw Error(ErrorKind::parse_error, path + ":" + std::to_string(lineno) + ": " + e.why);
    }
    if (v.size() != cols.size())
      throw Error(ErrorKind::parse_error, path + ":" + std::to_string(lineno) + ": wrong column count");
    DiagnosticsRecord r;
    r.t = v[0];
    r.sup_h = v[1];
    r.int_h2 = v[2];
    r.weighted_sup_h = v[3];
    r.drift = v[4];
    r.sup_grad_rm = v[5];
    r.sqrt_t_grad2_rm = v[6];
    r.k_min = v[7];
    r.k_max = v[8];
    r.dt = v[9];
    r.max_rel_change = v[10];
    r.a_boundary = v[11];
    r.b_boundary = v[12];
    out.push_back(r);
  }
  return out;
}

void emit_outputs(const RunResult& result, const RunConfig& cfg, const std::string& dir) {
  const fs::path root(dir);
  make_dirs(root / "reports");
  write_file(root / "config.snapshot", cfg.echo());

  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root, ec)) {
    const auto name = e.path().filename().string();
    if (name.rfind("metric_t", 0) == 0 && e.path().extension() == ".csv") fs::remove(e.path(), ec);
  }
  for (const auto& s : result.traj.snapshots)
    write_metric_csv(s.metric, (root / ("metric_t" + short_double(s.metric.time) + ".csv")).string());
  write_diagnostics_csv(result.traj.records, (root / "diagnostics.csv").string());
  for (const auto& [name, j] : result.reports.items())
    write_file(root / "reports" / (name + ".json"), j.dump(2) + "\n");
  write_file(root / "summary.json", result.summary.dump(2) + "\n");
}

StoredRun load_run(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error(ErrorKind::io_error, "no run directory at " + dir);
  StoredRun r;
  r.config = load_config((root / "config.snapshot").string());
  r.records = read_diagnostics_csv((root / "diagnostics.csv").string());

  std::vector<std::pair<double, fs::path>> files;
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (name.rfind("metric_t", 0) != 0 || e.path().extension() != ".csv") continue;
    const auto tag = name.substr(8, name.size() - 12);
    try {
      files.emplace_back(to_double(tag), e.path());
    } catch (const BadValue&) {
      throw Error(ErrorKind::parse_error, e.path().string() + ": no time in the file name");
    }
  }
  if (files.empty()) throw Error(ErrorKind::missing_input, "no metric_t*.csv in " + dir);
  std::sort(files.begin(), files.end());
  GridPtr grid;
  for (const auto& [t, p] : files) {
    auto m = read_metric_csv(p.string(), r.config.n, r.config.cross_section);
    if (grid && grid->points() == m.grid()->points()) m.A.grid = m.B.grid = grid;
    grid = m.grid();
    m.time = t;
    r.traj.snapshots.push_back({std::move(m), 0});
  }
  r.traj.mode = r.config.flow.mode;
  r.traj.records = r.records;
  const auto term = root / "reports" / "termination.json";
  if (fs::exists(term)) {
    try {
      const auto j = nlohmann::json::parse(read_file(term.string()));
      const auto reason = j.value("reason", "");
      for (auto t : {Termination::reached_T, Termination::converged, Termination::blow_up, Termination::instability})
        if (reason == termination_name(t)) r.traj.termination = t;
      r.traj.termination_detail = j.value("detail", "");
      r.traj.steps = j.value("steps", std::size_t(0));
      r.traj.rejected = j.value("rejected", std::size_t(0));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse_error, term.string() + ": " + e.what());
    }
  }
  return r;
}

nlohmann::json report_run(const std::string& dir) {
  const auto r = load_run(dir);
  auto s = summarize(r.config, r.records, r.traj.initial(), r.traj.final(), termination_json(r.traj));
  write_file(fs::path(dir) / "summary.json", s.dump(2) + "\n");
  return s;
}

std::vector<SweepJob> sweep_jobs(const RunConfig& cfg) {
  std::vector<SweepJob> jobs;
  for (double a : cfg.sweep_amplitudes)
    for (double g : cfg.sweep_gammas) {
      SweepJob j;
      j.amplitude = a;
      j.gamma = g;
      j.seed = cfg.seed + jobs.size();
      j.subdir = "amp_" + short_double(a) + "_gamma_" + short_double(g);
      jobs.push_back(j);
    }
  return jobs;
}

std::vector<SweepOutcome> run_sweep(const RunConfig& cfg, const std::string& dir, unsigned jobs) {
  const auto list = sweep_jobs(cfg);
  if (list.empty()) throw Error(ErrorKind::missing_input, "sweep.amplitudes and sweep.gammas must be non-empty");
  make_dirs(dir);
  std::vector<SweepOutcome> out(list.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < list.size(); i = next++) {
      auto& o = out[i];
      o.job = list[i];
      try {
        RunConfig c = cfg;
        c.initial.kind = InitialKind::glued;
        c.initial.scale = 1.0 + o.job.amplitude;
        c.diagnostics.gamma = o.job.gamma;
        c.seed = o.job.seed;
        c.sweep_amplitudes.clear();
        c.sweep_gammas.clear();
        c.output_dir = (fs::path(dir) / o.job.subdir).string();
        validate_config(c);
        const auto r = simulate(c);
        emit_outputs(r, c, c.output_dir);
        o.termination = termination_name(r.traj.termination);
        o.exit_code = exit_code_for(r.traj.termination);
      } catch (const Error& e) {
        o.error = e.what();
        o.exit_code = exit_code_for(e.kind());
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(jobs, unsigned(list.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < count; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  nlohmann::json index = nlohmann::json::array();
  for (const auto& o : out)
    index.push_back({{"subdir", o.job.subdir},
                     {"amplitude", o.job.amplitude},
                     {"gamma", o.job.gamma},
                     {"seed", o.job.seed},
                     {"termination", o.termination},
                     {"exit_code", o.exit_code},
                     {"error", o.error}});
  write_file(fs::path(dir) / "sweep.json", index.dump(2) + "\n");
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io_error: return 4;
    case ErrorKind::stencil_underflow:
    case ErrorKind::nonpositive_metric:
    case ErrorKind::chart_degenerate:
    case ErrorKind::gauge_failure:
    case ErrorKind::quadrature_underresolved:
    case ErrorKind::step_rejected:
    case ErrorKind::nan_detected:
    case ErrorKind::iteration_stall: return 3;
    default: return 2;
  }
}

int exit_code_for(Termination t) {
  return t == Termination::blow_up || t == Termination::instability ? 3 : 0;
}

}  // namespace ahflow
