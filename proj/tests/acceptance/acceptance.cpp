// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dense_oracles.hpp"
#include "ncbsbl/array_model.hpp"
#include "ncbsbl/bsbl_fmlm.hpp"
#include "ncbsbl/estimator.hpp"
#include "ncbsbl/experiment.hpp"
#include "ncbsbl/synth.hpp"

using namespace ncbsbl;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kPosteriorTol = 1e-8;
constexpr double kPosteriorBudgetS = 5.0;
constexpr double kMonotoneRelTol = 1e-9;
constexpr double kNoiselessPhaseTol = 1e-6;
constexpr double kNoiselessBlockTol = 1e-6;
constexpr double kSpuriousRatio = 0.10;
constexpr double kDoaBoundDeg = 0.2;
constexpr double kPhaseBoundRad = 0.1;
constexpr double kSweepBudgetS = 600.0;
constexpr double kMinSpeedup = 5.0;
constexpr std::size_t kSweepTrials = 100;
constexpr std::size_t kTimingTrials = 50;
const std::vector<double> kSweepSnrs{0.0, 10.0, 20.0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int g_failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("%s criterion %d: %s:%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.str().c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

void run_guarded(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  report(id, name, o);
}

const ResultRow& row_for(const std::vector<ResultRow>& rows, SolverKind s, double snr) {
  for (const auto& r : rows) {
    if (r.solver == s && r.snr_db == snr) return r;
  }
  throw std::runtime_error("missing result row");
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] < v[k - 1])) return false;
  }
  return true;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream out;
  for (std::size_t k = 0; k < v.size(); ++k) out << (k ? "/" : "") << v[k];
  return out.str();
}

// results.csv with the timing column removed.
std::string results_without_timing(const fs::path& dir) {
  std::ifstream in(dir / "results.csv");
  if (!in) throw std::runtime_error("cannot read " + (dir / "results.csv").string());
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 4) continue;  // mean_cpu_seconds
      out += cells[c];
      out += ',';
    }
    out += '\n';
  }
  return out;
}

// 1. Incremental posterior against dense conditioning.
void posterior_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> count(1, 3);
  double worst_mu = 0.0;
  double worst_sigma = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const CMatrix A = oracle::random_complex(4, 6, rng);
    const BlockDictionary dict = build_block_dictionary(A);
    const CMatrix Y = augment(oracle::random_complex(4, 3, rng));
    FmlmSolver s(Y, dict, SolverConfig{});

    std::vector<std::size_t> idx(6);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t k = count(rng);
    for (std::size_t j = 0; j < k; ++j) {
      s.set_block(idx[j], constrain_block(oracle::random_hpd(rng), 0.99).combined());
    }

    std::vector<Mat2c> Ls;
    for (std::size_t i = 0; i < 6; ++i) Ls.push_back(s.block_covariance(i));
    const PosteriorState got = s.posterior();
    const oracle::Posterior want = oracle::posterior(dict.V, Y, Ls, s.active_set(), s.beta());
    worst_mu = std::max(worst_mu, oracle::rel_err(got.mu, want.mu));
    worst_sigma = std::max(worst_sigma, oracle::rel_err(got.Sigma, want.Sigma));
  }
  const double elapsed = seconds_since(t0);
  o.detail << " max rel err mu " << worst_mu << ", Sigma " << worst_sigma << "; " << elapsed << " s";
  o.require(worst_mu <= kPosteriorTol, "mu error");
  o.require(worst_sigma <= kPosteriorTol, "Sigma error");
  o.require(elapsed < kPosteriorBudgetS, "runtime");
}

// 2. Committed marginal costs never rise.
void cost_monotonicity(Outcome& o, const ExperimentSpec& spec) {
  const BlockDictionary dict = build_block_dictionary(spec.scenario.grid, spec.scenario.num_elements);
  std::size_t actions = 0;
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioConfig sc = spec.scenario;
    sc.snr_db = 10.0;
    sc.seed = seed;
    const AugmentedObservation obs = synthesize(sc);
    const SolverResult res = solve(obs.Y, dict, spec.solver);
    const auto& log = res.report.action_log;
    double prev = res.report.initial_cost;
    for (std::size_t k = 0; k < log.size(); ++k) {
      // Inside an accepted escape only the last record is a committed state.
      if (log[k].escape && k + 1 < log.size() && log[k + 1].escape) continue;
      const double rise = (log[k].cost_after - prev) / std::abs(prev);
      worst_rise = std::max(worst_rise, rise);
      prev = log[k].cost_after;
      ++actions;
    }
    // The tracked cost must agree with a fresh evaluation.
    FmlmSolver check(obs.Y, dict, spec.solver);
    for (std::size_t i : res.posterior.active_set) check.set_block(i, res.hypers.L[i]);
    o.require(std::abs(check.marginal_cost() - res.report.final_cost) <=
                  kMonotoneRelTol * std::abs(res.report.final_cost),
              "final cost mismatch at seed " + std::to_string(seed));
  }
  o.detail << " " << actions << " committed actions, max relative rise " << worst_rise;
  o.require(worst_rise <= kMonotoneRelTol, "cost increase");
}

// 3. Noiseless single source.
void noiseless_recovery(Outcome& o, const ExperimentSpec& spec) {
  ScenarioConfig sc = spec.scenario;
  sc.thetas_deg = {10.0};
  sc.phis_rad = {kPi / 4.0};
  sc.snr_db = kNoiseless;
  const AugmentedObservation obs = synthesize(sc);
  const BlockDictionary dict = build_block_dictionary(sc.grid, sc.num_elements);
  SolverConfig cfg = spec.solver;
  cfg.beta_mode = BetaMode::adaptive;
  const SolverResult res = solve(obs.Y, dict, cfg);
  const EstimationResult est = estimate_block(res.posterior.mu, sc.grid, 1);

  const std::size_t want = sc.grid.index_of(10.0).value();
  const std::size_t got = est.peaks.indices.empty() ? sc.grid.size() : est.peaks.indices.front();
  const double phase_err =
      est.phis_rad.empty() ? kPi : std::abs(wrap_phase_mod_pi(est.phis_rad.front() - kPi / 4.0));

  const auto L = static_cast<Eigen::Index>(sc.snapshots);
  CMatrix truth(2, L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const cdouble s = std::polar(1.0, -kPi / 4.0) * obs.truth->real_symbols(0, l);
    truth(0, l) = std::conj(s);
    truth(1, l) = s;
  }
  const double block_err =
      oracle::rel_err(res.posterior.mu.middleRows(static_cast<Eigen::Index>(2 * want), 2), truth);

  o.detail << " index " << got << " (want " << want << "), phase err " << phase_err
           << " rad, block err " << block_err;
  o.require(got == want, "grid index");
  o.require(phase_err <= kNoiselessPhaseTol, "phase");
  o.require(block_err <= kNoiselessBlockTol, "block error");
}

// 4. Single-trial spectrum at 10 dB.
void single_trial_spectrum(Outcome& o, const ExperimentSpec& spec) {
  const TrialRunner runner(spec);
  const ScenarioConfig sc = runner.scenario_for(SolverKind::nc_bsbl, 10.0, 0);
  const AugmentedObservation obs = synthesize(sc);
  const BlockDictionary dict = build_block_dictionary(sc.grid, sc.num_elements);
  const SolverResult res = solve(obs.Y, dict, spec.solver);
  const EstimationResult est = estimate_block(res.posterior.mu, sc.grid, 2);

  std::vector<double> sorted = est.spectrum.values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double second_peak = 0.0;
  if (est.peaks.indices.size() == 2) {
    second_peak = std::min(est.spectrum.values[est.peaks.indices[0]],
                           est.spectrum.values[est.peaks.indices[1]]);
  }
  const double third = sorted.size() > 2 ? sorted[2] : 0.0;
  const double ratio = second_peak > 0.0 ? third / second_peak : std::numeric_limits<double>::infinity();

  o.detail << " seed " << sc.seed << ", peaks " << join(est.thetas_deg) << " deg, third/second "
           << ratio;
  const bool exact = est.thetas_deg.size() == 2 && sc.grid.index_of(10.0) == est.peaks.indices[0] &&
                     sc.grid.index_of(30.0) == est.peaks.indices[1];
  o.require(exact, "peaks not at 10 and 30 deg");
  o.require(ratio <= kSpuriousRatio, "spurious peak");
}

// 5, 6, 7, 9 share the sweeps below.
struct Sweeps {
  std::vector<ResultRow> two_source;
  double two_source_seconds = 0.0;
  std::vector<ResultRow> one_source;
  fs::path first_dir;
};

ExperimentSpec sweep_spec(const ExperimentSpec& base, const fs::path& out) {
  ExperimentSpec s = base;
  s.snr_grid_db = kSweepSnrs;
  s.trials = kSweepTrials;
  s.solvers = {SolverKind::nc_bsbl, SolverKind::sbl};
  s.output_dir = out;
  return s;
}

void doa_trend(Outcome& o, Sweeps& sw, const ExperimentSpec& spec, const fs::path& work) {
  sw.first_dir = work / "sweep_a";
  const auto t0 = Clock::now();
  sw.two_source = run_experiment(sweep_spec(spec, sw.first_dir), true).rows;
  sw.two_source_seconds = seconds_since(t0);

  std::vector<double> doa;
  for (double snr : kSweepSnrs) doa.push_back(row_for(sw.two_source, SolverKind::nc_bsbl, snr).rmse_doa_deg);
  const double sbl20 = row_for(sw.two_source, SolverKind::sbl, 20.0).rmse_doa_deg;
  o.detail << " NC-BSBL DOA RMSE " << join(doa) << " deg at " << join(kSweepSnrs)
           << " dB, SBL at 20 dB " << sbl20 << "; " << sw.two_source_seconds << " s";
  o.require(strictly_decreasing(doa), "not strictly decreasing");
  o.require(doa.back() <= kDoaBoundDeg, "20 dB bound");
  o.require(doa.back() <= sbl20, "worse than SBL at 20 dB");
  o.require(sw.two_source_seconds < kSweepBudgetS, "runtime");
}

void phase_trend(Outcome& o, Sweeps& sw, const ExperimentSpec& spec, const fs::path& work) {
  ExperimentSpec one = sweep_spec(spec, work / "sweep_one");
  one.scenario.thetas_deg = {10.0};
  one.scenario.phis_rad = {kPi / 4.0};
  one.nc_sbl_phis = std::vector<double>{kPi / 4.0};
  one.solvers = {SolverKind::nc_bsbl};
  sw.one_source = run_experiment(one, false).rows;

  std::vector<double> ph1;
  std::vector<double> ph2;
  for (double snr : kSweepSnrs) {
    ph1.push_back(row_for(sw.one_source, SolverKind::nc_bsbl, snr).rmse_phase_rad);
    ph2.push_back(row_for(sw.two_source, SolverKind::nc_bsbl, snr).rmse_phase_rad);
  }
  o.detail << " phase RMSE one-source " << join(ph1) << ", two-source " << join(ph2) << " rad";
  o.require(strictly_decreasing(ph1), "one-source not strictly decreasing");
  o.require(strictly_decreasing(ph2), "two-source not strictly decreasing");
  o.require(ph1.back() <= kPhaseBoundRad, "one-source 20 dB bound");
  o.require(ph2.back() <= kPhaseBoundRad, "two-source 20 dB bound");
}

void speedup(Outcome& o, const ExperimentSpec& spec) {
  ExperimentSpec s = spec;
  s.trials = kTimingTrials;
  s.solvers = {SolverKind::nc_bsbl, SolverKind::sbl};
  const TimingReport r = timing_report(s, 10.0);
  for (const auto& e : r.entries) {
    o.detail << " " << to_string(e.solver) << " " << e.mean_seconds << " s (" << e.mean_iterations
             << " it);";
  }
  const double ratio = r.speedup().value_or(0.0);
  o.detail << " ratio " << ratio;
  o.require(ratio >= kMinSpeedup, "speedup");
}

// 8. Exhaustive structural properties.
void property_suite(Outcome& o) {
  std::size_t checks = 0;

  // Permutation bijectivity and the dictionary identity for every N <= 64.
  for (std::size_t N = 1; N <= 64; ++N) {
    const Permutation P = Permutation::for_blocks(N);
    std::vector<int> hit(2 * N, 0);
    for (std::size_t r = 0; r < 2 * N; ++r) {
      ++hit[P.column(r)];
      o.require(P.row(P.column(r)) == r, "inverse map");
    }
    o.require(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }), "bijectivity");
    const CMatrix J = oracle::permutation_matrix(N);
    for (std::size_t r = 0; r < 2 * N; ++r) {
      o.require(J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(P.column(r))) == 1.0,
                "index map vs dense J");
    }

    std::mt19937_64 drng(N);
    const BlockDictionary d = build_block_dictionary(
        oracle::random_complex(5, static_cast<Eigen::Index>(N), drng));
    const CMatrix dense = oracle::augmented_dictionary(d.A) * J;
    o.require((d.V - dense).cwiseAbs().maxCoeff() == 0.0,
              "dictionary vs dense product, N=" + std::to_string(N));
    checks += 2;
  }

  // Augmentation conjugate symmetry.
  ScenarioConfig sc;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    sc.seed = seed;
    const AugmentedObservation obs = synthesize(sc);
    const auto M = static_cast<Eigen::Index>(sc.num_elements);
    o.require(obs.Y.topRows(M) == obs.Z.conjugate() && obs.Y.bottomRows(M) == obs.Z,
              "augmentation symmetry");
    ++checks;
  }

  // Spectrum against the brute-force double sum.
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const CMatrix X = oracle::random_complex(2 * 64, 9, rng);
    const Spectrum s = block_spectrum(X);
    for (std::size_t n = 0; n < 64; ++n) {
      double sum = 0.0;
      for (Eigen::Index l = 0; l < 9; ++l) {
        sum += std::abs(X(static_cast<Eigen::Index>(2 * n), l)) +
               std::abs(X(static_cast<Eigen::Index>(2 * n + 1), l));
      }
      o.require(std::abs(s.values[n] - sum / 9.0) <= 1e-12 * (1.0 + sum), "spectrum");
    }
    ++checks;
  }

  // RMSE invariant under every relabelling of three sources.
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::vector<double> truth{-15.0, 4.0, 21.0};
  const std::vector<double> phis{0.2, -0.5, 1.1};
  std::vector<TrialEstimate> trials;
  for (int t = 0; t < 25; ++t) {
    TrialEstimate e;
    for (std::size_t k = 0; k < 3; ++k) {
      e.thetas_deg.push_back(truth[k] + noise(rng));
      e.phis_rad.push_back(phis[k] + 0.1 * noise(rng));
    }
    trials.push_back(e);
  }
  const RmseResult base = pair_and_rmse(trials, truth, phis);
  std::vector<std::size_t> perm{0, 1, 2};
  do {
    std::vector<double> t2, p2;
    for (std::size_t k : perm) {
      t2.push_back(truth[k]);
      p2.push_back(phis[k]);
    }
    std::vector<TrialEstimate> shuffled = trials;
    for (auto& e : shuffled) {
      std::reverse(e.thetas_deg.begin(), e.thetas_deg.end());
      std::reverse(e.phis_rad.begin(), e.phis_rad.end());
    }
    const RmseResult r = pair_and_rmse(shuffled, t2, p2);
    o.require(std::abs(r.doa_deg - base.doa_deg) <= 1e-12 * base.doa_deg &&
                  std::abs(r.phase_rad - base.phase_rad) <= 1e-12 * base.phase_rad,
              "RMSE symmetry");
    ++checks;
  } while (std::next_permutation(perm.begin(), perm.end()));

  o.detail << " " << checks << " property groups checked";
}

void determinism(Outcome& o, const Sweeps& sw, const ExperimentSpec& spec, const fs::path& work) {
  const fs::path second = work / "sweep_b";
  run_experiment(sweep_spec(spec, second), true);
  const std::string a = results_without_timing(sw.first_dir);
  const std::string b = results_without_timing(second);
  o.detail << " " << a.size() << " bytes compared";
  o.require(!a.empty() && a == b, "results.csv differs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncbsbl acceptance suite"};
  std::string config;
  std::string work = "acceptance_work";
  app.add_option("--config", config, "Shipped experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--work-dir", work, "Directory for sweep artifacts");
  CLI11_PARSE(app, argc, argv);

  ExperimentSpec spec;
  try {
    spec = load_config(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config: %s\n", e.what());
    return 2;
  }
  const fs::path work_dir(work);
  fs::create_directories(work_dir);

  Sweeps sw;
  run_guarded(1, "posterior matches dense evaluation", posterior_equivalence);
  run_guarded(2, "marginal cost monotone over accepted actions",
              [&](Outcome& o) { cost_monotonicity(o, spec); });
  run_guarded(3, "noiseless single-source exact recovery",
              [&](Outcome& o) { noiseless_recovery(o, spec); });
  run_guarded(4, "single-trial spectrum peaks grid-exact at 10 dB",
              [&](Outcome& o) { single_trial_spectrum(o, spec); });
  run_guarded(5, "DOA RMSE trend over SNR", [&](Outcome& o) { doa_trend(o, sw, spec, work_dir); });
  run_guarded(6, "phase RMSE trend over SNR", [&](Outcome& o) { phase_trend(o, sw, spec, work_dir); });
  run_guarded(7, "EM-SBL vs NC-BSBL solve-time ratio", [&](Outcome& o) { speedup(o, spec); });
  run_guarded(8, "property suite", property_suite);
  run_guarded(9, "sweep determinism", [&](Outcome& o) { determinism(o, sw, spec, work_dir); });

  std::printf("%d of 9 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
