#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/types.hpp"

namespace ncbsbl {

/// Nonnegative power values aligned with the grid angles.
struct Spectrum {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// P_n = (1/L) (sum_l |X_{2n,l}| + sum_l |X_{2n+1,l}|) for a 2N x L block signal.
Spectrum block_spectrum(const CMatrix& x_hat);

/// P_n = (1/L) sum_l |X_{n,l}| for an N x L scalar-atom signal.
Spectrum row_spectrum(const CMatrix& x_hat);

struct PeakSet {
  std::vector<std::size_t> indices;  // grid indices, ascending
  bool padded = false;  // fewer than K local maxima; filled with largest non-peaks
  bool failed = false;  // spectrum identically zero
};

/// The K largest local maxima. A point is a local maximum when it strictly
/// exceeds each existing neighbour (boundary points have one neighbour).
PeakSet find_peaks(const Spectrum& spec, std::size_t K);

/// Per-block NC phase from the first row of each selected block: the mean
/// over snapshots of arg(x_l^2)/2, which lies in (-pi/2, pi/2] and ignores the
/// sign of the underlying real symbol. Zero entries are skipped; a block with
/// no nonzero entry yields nullopt.
std::vector<std::optional<double>> estimate_phases(const CMatrix& x_hat,
                                                   std::span<const std::size_t> blocks);

/// One trial's estimates. Phases are empty for solvers that do not recover them.
struct TrialEstimate {
  std::vector<double> thetas_deg;
  std::vector<double> phis_rad;
  bool failed = false;
};

struct EstimationResult {
  std::vector<double> thetas_deg;  // ascending
  std::vector<double> phis_rad;    // aligned with thetas_deg
  Spectrum spectrum;
  PeakSet peaks;

  TrialEstimate as_trial() const;
};

/// Spectrum, peak search and (optionally) phase recovery from a block signal.
EstimationResult estimate_block(const CMatrix& x_hat, const GridSpec& grid, std::size_t K);

/// Spectrum and peak search from a scalar-atom signal.
EstimationResult estimate_scalar(const CMatrix& x_hat, const GridSpec& grid, std::size_t K);

/// Wraps a phase difference into (-pi/2, pi/2] (NC phases are identifiable modulo pi).
double wrap_phase_mod_pi(double delta);

/// Penalties charged per source on failed trials.
struct MissPenalty {
  double doa_deg = 80.0;
  double phase_rad = kPi / 2.0;
};

struct RmseResult {
  double doa_deg = 0.0;
  double phase_rad = 0.0;  // NaN when no trial carries phase estimates
  std::size_t failed = 0;
};

/// Pairs each trial's estimates with the truth by the injective assignment of
/// least total absolute DOA error, then forms
///   sqrt( (1/(K T)) sum_k sum_t (est - truth)^2 )
/// for DOA and for phase (mod pi). Failed trials contribute the miss penalty.
RmseResult pair_and_rmse(std::span<const TrialEstimate> trials, std::span<const double> thetas_deg,
                         std::span<const double> phis_rad, const MissPenalty& penalty = {});

/// Assignment used by pair_and_rmse: result[k] is the estimate index matched to truth k.
std::vector<std::size_t> pair_estimates(std::span<const double> estimates,
                                        std::span<const double> truth);

/// Two-column CSV "angle_deg,power".
void write_spectrum_csv(const Spectrum& spec, const GridSpec& grid,
                        const std::filesystem::path& path);

}  // namespace ncbsbl
