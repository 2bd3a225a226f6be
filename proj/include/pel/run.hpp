#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pel/evolution.hpp"
#include "pel/initial_data.hpp"
#include "pel/modulation.hpp"
#include "pel/radial_grid.hpp"

namespace pel {

inline constexpr const char* kConfigSchema = "pel-run-v1";

struct OutputConfig {
  std::size_t stride = 16;           // steps between report rows
  std::size_t snapshot_rows = 0;     // field snapshot every N rows (0: final only)
  std::size_t checkpoint_rows = 256; // checkpoint every N rows (0: never)
};

struct DiagnosticsConfig {
  double delta = 0.5;       // weight exponent, in (0, 1)
  double cone_slope = 2.0;  // exterior integral cutoff r >= slope * t
  double c0_sq = 1.5;       // energy-balance interpolation constant, in (1, 2)
};

struct StopConfig {
  double t_end = 1.0;
  double lambda_stop = 1.6e4;
  // Stop when the focus outruns the mesh: 1/lambda < margin * r_first.
  double resolution_margin = 4.0;
};

struct SweepAxes {
  std::vector<double> epsilon;
  std::vector<int> k;
  std::vector<double> u0_amplitude;
};

struct RunConfig {
  GridSpec grid;
  SchemeConfig scheme;
  bool dt_auto = false;  // derive dt from the stable wave step at start
  InitialDataSpec initial;
  OutputConfig output;
  DiagnosticsConfig diagnostics;
  LambdaSource lambda_source = LambdaSource::orthogonality_rootfind;
  StopConfig stop;
  SweepAxes sweep;
};

// JSON text (// comments allowed) against schema pel-run-v1. Every key is
// optional except "schema" and "scheme.dt" (a step in seconds or "auto").
// Unknown keys are rejected with their full path; parse errors carry
// line/column context; all module-level validations run eagerly.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical serialization (alphabetical keys) and its 64-bit FNV-1a hash,
// printed as 16 hex digits. Identical configs hash identically.
std::string canonical_config_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

enum class StopReason { t_end, lambda_stop, resolution, nan };
const char* to_string(StopReason r);

struct RunResult {
  StopReason stop = StopReason::t_end;
  std::size_t steps = 0;
  std::size_t rows = 0;
  double t_final = 0.0;
  double lambda_final = 0.0;
  std::string manifest_json;  // also written to <out_dir>/manifest.json
};

// Drive one trajectory: writes series.csv (one row per sample, header
// fixed and documented in the README), periodic snapshots, checkpoint
// files, final_state snapshot, and manifest.json into out_dir. Mid-run
// failures leave the last checkpoint on disk.
RunResult run_simulation(const RunConfig& cfg, const std::string& out_dir);

// Continue an interrupted run from its checkpoint; the output directory
// is the checkpoint's directory. The time-series rows written after the
// resume point are byte-identical to an uninterrupted run.
RunResult resume_run(const std::string& checkpoint_path);

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

// Invariant suite on the configured grid: profile identities, quadrature
// oracles, static preservation, formulation equivalence, orthogonality
// maintenance.
std::vector<VerifyCheck> verify_suite(const RunConfig& cfg);
std::string verify_table(const std::vector<VerifyCheck>& checks);

struct SweepResult {
  std::size_t points = 0;
  std::size_t failures = 0;
  std::string summary_json;  // also written to <out_dir>/sweep_summary.json
};

// Cartesian product over the sweep axes (absent axes inherit the base
// config); one subdirectory per point, executed by `threads` workers, and
// an aggregate sweep_summary.csv of blowup-time fits.
SweepResult run_sweep(const RunConfig& cfg, const std::string& out_dir,
                      int threads);

}  // namespace pel
