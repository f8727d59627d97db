#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/bsbl_fmlm.hpp"
#include "ncbsbl/estimator.hpp"
#include "ncbsbl/synth.hpp"

namespace ncbsbl {

enum class SolverKind { nc_bsbl, sbl, nc_sbl };

std::string_view to_string(SolverKind kind);
SolverKind parse_solver_kind(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Monte Carlo sweep: every solver is run for `trials` trials at every SNR.
/// Trial t uses seed seed_base + t, shared across solvers and SNR points.
struct ExperimentSpec {
  ScenarioConfig scenario;
  std::vector<double> snr_grid_db{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
  std::size_t trials = 100;
  std::vector<SolverKind> solvers{SolverKind::nc_bsbl, SolverKind::sbl, SolverKind::nc_sbl};
  std::filesystem::path output_dir = "results";
  std::uint64_t seed_base = 1;
  // Phases used to synthesise data for (and given to) NC-SBL. Defaults to
  // scenario.phis_rad[0] repeated for every source.
  std::optional<std::vector<double>> nc_sbl_phis;
  SolverConfig solver;
  std::size_t threads = 1;

  void validate() const;
  std::vector<double> nc_sbl_phases() const;
};

/// Parses the key = value config format (see README). Unknown keys, malformed
/// values and invalid combinations throw ConfigError.
ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::filesystem::path& path);

/// Canonical key = value rendering; parse_config(to_config_text(s)) == s.
std::string to_config_text(const ExperimentSpec& spec);

struct ResultRow {
  SolverKind solver;
  double snr_db;
  double rmse_doa_deg;
  double rmse_phase_rad;  // NaN for solvers without phase output
  double mean_cpu_seconds;
  std::size_t trials_failed;
  double mean_iterations;
};

struct TrialOutcome {
  TrialEstimate estimate;
  Spectrum spectrum;
  double solve_seconds = 0.0;
  std::size_t iterations = 0;
  std::string error;  // non-empty when the solver threw
};

/// Holds the dictionaries shared by every trial of a sweep. Immutable after
/// construction, so run_trial may be called concurrently.
class TrialRunner {
 public:
  explicit TrialRunner(const ExperimentSpec& spec);

  /// Scenario actually simulated for a solver at one (snr, trial) cell.
  ScenarioConfig scenario_for(SolverKind solver, double snr_db, std::size_t trial) const;

  /// Synthesises the trial and runs the solver. Only the solve call is timed.
  /// Solver exceptions are captured as a failed trial.
  TrialOutcome run_trial(SolverKind solver, double snr_db, std::size_t trial) const;

 private:
  const ExperimentSpec* spec_;
  BlockDictionary block_dict_;
  CMatrix nc_dict_;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  // First-trial spectrum per (solver, snr) cell, in row order.
  std::vector<Spectrum> first_spectra;
};

/// Runs the sweep, optionally writing results.csv, per-cell spectra of trial 0,
/// and manifest.json to spec.output_dir. Throws std::runtime_error if the
/// output directory cannot be created or written.
ExperimentOutput run_experiment(const ExperimentSpec& spec, bool write_artifacts = true);

/// Header: solver,snr_db,rmse_doa_deg,rmse_phase_rad,mean_cpu_seconds,trials_failed,mean_iterations
void write_results_csv(std::span<const ResultRow> rows, std::ostream& out);

struct TimingEntry {
  SolverKind solver;
  double mean_seconds;
  double mean_iterations;
};

struct TimingReport {
  double snr_db = 10.0;
  std::size_t trials = 0;
  std::vector<TimingEntry> entries;

  /// mean SBL time / mean NC-BSBL time, when both were timed.
  std::optional<double> speedup() const;
};

/// Mean solve time per solver at one SNR (Table-style CPU comparison).
/// Runs single-threaded regardless of spec.threads so timings do not contend.
TimingReport timing_report(const ExperimentSpec& spec, double snr_db = 10.0);

}  // namespace ncbsbl
