#include "ncbsbl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ncbsbl/sbl_baselines.hpp"

namespace ncbsbl {

namespace {

constexpr const char* kLibraryVersion = "0.1.0";

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool uses(const ExperimentSpec& spec, SolverKind kind) {
  return std::find(spec.solvers.begin(), spec.solvers.end(), kind) != spec.solvers.end();
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string snr_label(double snr) {
  if (std::isinf(snr)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

}  // namespace

TrialRunner::TrialRunner(const ExperimentSpec& spec)
    : spec_(&spec),
      block_dict_(build_block_dictionary(spec.scenario.grid, spec.scenario.num_elements)) {
  if (uses(spec, SolverKind::nc_sbl)) {
    nc_dict_ = nc_dictionary(spec.scenario.grid, spec.scenario.num_elements,
                             common_phase(spec.nc_sbl_phases()));
  }
}

ScenarioConfig TrialRunner::scenario_for(SolverKind solver, double snr_db, std::size_t trial) const {
  ScenarioConfig sc = spec_->scenario;
  sc.snr_db = snr_db;
  sc.seed = spec_->seed_base + trial;
  if (solver == SolverKind::nc_sbl) sc.phis_rad = spec_->nc_sbl_phases();
  return sc;
}

TrialOutcome TrialRunner::run_trial(SolverKind solver, double snr_db, std::size_t trial) const {
  TrialOutcome out;
  const ScenarioConfig sc = scenario_for(solver, snr_db, trial);
  const std::size_t K = sc.num_sources();
  try {
    const AugmentedObservation obs = synthesize(sc);
    EstimationResult est;
    const auto t0 = std::chrono::steady_clock::now();
    switch (solver) {
      case SolverKind::nc_bsbl: {
        const SolverResult res = solve(obs.Y, block_dict_, spec_->solver);
        out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.iterations = res.report.iterations;
        est = estimate_block(res.posterior.mu, sc.grid, K);
        break;
      }
      case SolverKind::sbl: {
        const SblResult res = sbl_em_solve(obs.Z, block_dict_.A, spec_->solver);
        out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.iterations = res.report.iterations;
        est = estimate_scalar(res.mu, sc.grid, K);
        break;
      }
      case SolverKind::nc_sbl: {
        const SblResult res = sbl_em_solve(obs.Y, nc_dict_, spec_->solver);
        out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.iterations = res.report.iterations;
        est = estimate_scalar(res.mu, sc.grid, K);
        break;
      }
    }
    out.estimate = est.as_trial();
    out.spectrum = std::move(est.spectrum);
  } catch (const std::exception& e) {
    out.error = e.what();
    out.estimate.failed = true;
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentSpec& spec, bool write_artifacts) {
  spec.validate();
  const TrialRunner runner(spec);
  const auto& sc = spec.scenario;
  const MissPenalty penalty{sc.grid.span(), kPi / 2.0};

  if (write_artifacts) {
    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create output directory " + spec.output_dir.string() +
                               ": " + ec.message());
    }
  }

  ExperimentOutput result;
  for (SolverKind solver : spec.solvers) {
    const std::vector<double> truth_phis =
        solver == SolverKind::nc_sbl ? spec.nc_sbl_phases() : sc.phis_rad;
    for (double snr : spec.snr_grid_db) {
      std::vector<TrialOutcome> outcomes(spec.trials);
      parallel_for(spec.trials, spec.threads,
                   [&](std::size_t t) { outcomes[t] = runner.run_trial(solver, snr, t); });

      std::vector<TrialEstimate> estimates;
      estimates.reserve(outcomes.size());
      double seconds = 0.0;
      double iterations = 0.0;
      for (const auto& o : outcomes) {
        estimates.push_back(o.estimate);
        seconds += o.solve_seconds;
        iterations += static_cast<double>(o.iterations);
      }
      const RmseResult rmse = pair_and_rmse(estimates, sc.thetas_deg, truth_phis, penalty);
      const double T = static_cast<double>(spec.trials);
      result.rows.push_back(ResultRow{solver, snr, rmse.doa_deg, rmse.phase_rad,
                                      std::max(seconds / T, 1e-12), rmse.failed, iterations / T});
      result.first_spectra.push_back(outcomes.front().spectrum);
    }
  }

  if (write_artifacts) {
    const auto csv_path = spec.output_dir / "results.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    write_results_csv(result.rows, csv);
    if (!csv) throw std::runtime_error("failed writing " + csv_path.string());

    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      const auto& row = result.rows[i];
      const std::string name =
          "spectrum_" + std::string(to_string(row.solver)) + "_snr" + snr_label(row.snr_db) + ".csv";
      if (!result.first_spectra[i].values.empty()) {
        write_spectrum_csv(result.first_spectra[i], sc.grid, spec.output_dir / name);
      }
      cells.push_back({{"solver", to_string(row.solver)}, {"snr_db", row.snr_db}, {"spectrum", name}});
    }

    const std::string config_text = to_config_text(spec);
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config_text)));
    nlohmann::json manifest = {
        {"library_version", kLibraryVersion},
        {"config_hash_fnv1a64", hash},
        {"config", config_text},
        {"seed_base", spec.seed_base},
        {"trials", spec.trials},
        {"trial_seeds", {{"first", spec.seed_base}, {"last", spec.seed_base + spec.trials - 1}}},
        {"rng", "std::mt19937_64"},
        {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
#if defined(__clang__)
        {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
        {"compiler", std::string("gcc ") + __VERSION__},
#else
        {"compiler", "unknown"},
#endif
        {"threads", spec.threads},
        {"cells", cells},
    };
    const auto manifest_path = spec.output_dir / "manifest.json";
    std::ofstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot write " + manifest_path.string());
    mf << manifest.dump(2) << '\n';
  }
  return result;
}

void write_results_csv(std::span<const ResultRow> rows, std::ostream& out) {
  out << "solver,snr_db,rmse_doa_deg,rmse_phase_rad,mean_cpu_seconds,trials_failed,mean_iterations\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.6g,%zu,%.6g\n",
                  std::string(to_string(r.solver)).c_str(), snr_label(r.snr_db).c_str(),
                  r.rmse_doa_deg, r.rmse_phase_rad, r.mean_cpu_seconds, r.trials_failed,
                  r.mean_iterations);
    out << buf;
  }
}

std::optional<double> TimingReport::speedup() const {
  std::optional<double> fast;
  std::optional<double> slow;
  for (const auto& e : entries) {
    if (e.solver == SolverKind::nc_bsbl) fast = e.mean_seconds;
    if (e.solver == SolverKind::sbl) slow = e.mean_seconds;
  }
  if (!fast || !slow || *fast <= 0.0) return std::nullopt;
  return *slow / *fast;
}

TimingReport timing_report(const ExperimentSpec& spec, double snr_db) {
  spec.validate();
  const TrialRunner runner(spec);
  TimingReport report;
  report.snr_db = snr_db;
  report.trials = spec.trials;
  for (SolverKind solver : spec.solvers) {
    double seconds = 0.0;
    double iterations = 0.0;
    for (std::size_t t = 0; t < spec.trials; ++t) {
      const TrialOutcome o = runner.run_trial(solver, snr_db, t);
      seconds += o.solve_seconds;
      iterations += static_cast<double>(o.iterations);
    }
    const double T = static_cast<double>(spec.trials);
    report.entries.push_back(TimingEntry{solver, seconds / T, iterations / T});
  }
  return report;
}

}  // namespace ncbsbl
