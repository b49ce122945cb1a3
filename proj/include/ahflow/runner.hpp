#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahflow/error.hpp"
#include "ahflow/fits.hpp"
#include "ahflow/flow.hpp"
#include "ahflow/initial_data.hpp"

namespace ahflow {

enum class InitialKind { hyperbolic, glued, file };

struct InitialRecipe {
  InitialKind kind = InitialKind::hyperbolic;
  GlueRecipe glue;
  double scale = 1.0;  // boundary metric scale * sigma
  std::string file;    // metric CSV for InitialKind::file
};

struct FitWindows {
  double t_lo = 0.1, t_hi = 0.0;  // t_hi = 0 runs to the last record
  double x_lo = 0.0, x_hi = 0.1;  // spatial slope of the initial ||h||
  double drift_x_hi = 0.05;       // spatial slope of the final drift field
  double time_noise_floor = 1e-8;
  double space_noise_floor = 1e-10;
};

struct RunConfig {
  int n = 5;
  std::size_t N = 512;
  double x_max = 1.0, stretch = 4.0;
  CrossSection cross_section = CrossSection::sphere;
  InitialRecipe initial;
  FlowConfig flow;
  // When positive, flow.converge_tol is this fraction of the initial sup ||h||.
  double converge_relative = 0.0;
  DiagnosticsSpec diagnostics;
  double alpha = 4.5, lambda0 = 4.0, epsilon = 100.0;
  FitWindows fit;
  bool condition_b = true;
  bool convergence_study = false;
  std::string output_dir = "run";
  std::uint64_t seed = 0;
  std::vector<double> sweep_amplitudes, sweep_gammas;

  std::vector<std::string> warnings;  // filled by parse_config, not echoed

  // Canonical key = value text; parse_config(echo()) gives back the same config.
  std::string echo() const;
};

// Flat "key = value" lines, '#' starts a comment. Throws ConfigError with
// kind parse-error (every malformed line, with its number) or
// validation-error (every violated constraint, with its key).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

WarpedMetric build_initial(const RunConfig& cfg);

struct RunResult {
  FlowTrajectory traj;
  double initial_sup_h = 0.0;
  nlohmann::json reports = nlohmann::json::object();  // file stem -> content
  nlohmann::json summary;
};

nlohmann::json termination_json(const FlowTrajectory& traj);

// Fits, flags and thresholds from the records and the first and last metric.
nlohmann::json summarize(const RunConfig& cfg, const std::vector<DiagnosticsRecord>& records,
                         const WarpedMetric& initial, const WarpedMetric& final,
                         const nlohmann::json& termination);

// Builds the initial data, runs the flow and derives the summary and reports.
RunResult simulate(const RunConfig& cfg);

// Writes config.snapshot, metric_t<time>.csv, diagnostics.csv, reports/*.json
// and summary.json under dir. Same inputs give the same bytes.
void emit_outputs(const RunResult& result, const RunConfig& cfg, const std::string& dir);

void write_diagnostics_csv(const std::vector<DiagnosticsRecord>& records, const std::string& path);
std::vector<DiagnosticsRecord> read_diagnostics_csv(const std::string& path);

// Stored run: config, records and snapshots sorted by time.
struct StoredRun {
  RunConfig config;
  std::vector<DiagnosticsRecord> records;
  FlowTrajectory traj;
};
StoredRun load_run(const std::string& dir);

// Re-derives summary.json from a run directory and rewrites it.
nlohmann::json report_run(const std::string& dir);

struct SweepJob {
  double amplitude = 0.0, gamma = 0.0;
  std::uint64_t seed = 0;
  std::string subdir;
};
std::vector<SweepJob> sweep_jobs(const RunConfig& cfg);

struct SweepOutcome {
  SweepJob job;
  int exit_code = 0;
  std::string termination, error;
};
// Runs every job on up to `jobs` threads, each in its own subdirectory of dir.
std::vector<SweepOutcome> run_sweep(const RunConfig& cfg, const std::string& dir, unsigned jobs);

// 0 success, 2 validation, 3 numerical failure, 4 io.
int exit_code_for(ErrorKind kind);
int exit_code_for(Termination t);

}  // namespace ahflow
