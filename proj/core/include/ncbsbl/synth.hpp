#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/types.hpp"

namespace ncbsbl {

enum class SourceKind { gaussian_real, bpsk };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);

/// Pseudo-random stream used everywhere in the library. Seeded explicitly with
/// a 64-bit value; trial t of a sweep uses seed_base + t.
using Rng = std::mt19937_64;

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct ScenarioConfig {
  std::size_t num_elements = 12;  // M
  std::size_t snapshots = 20;     // L
  std::vector<double> thetas_deg{10.0, 30.0};
  std::vector<double> phis_rad{kPi / 12.0, kPi / 4.0};
  double snr_db = 10.0;  // +inf disables noise
  GridSpec grid = GridSpec::make(-40.0, 40.0, 0.1);
  std::uint64_t seed = 1;
  SourceKind source_kind = SourceKind::gaussian_real;
  bool on_grid = true;

  std::size_t num_sources() const { return thetas_deg.size(); }

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Real symbols S_R (K x L) and rotated sources S = Psi * S_R with
/// Psi = diag(exp(-j phi_k)).
struct SourceSignals {
  RMatrix real_symbols;
  CMatrix rotated;
};

SourceSignals generate_sources(const ScenarioConfig& cfg, Rng& rng);

struct GroundTruth {
  RMatrix real_symbols;
  std::vector<double> thetas_deg;
  std::vector<double> phis_rad;
};

/// Y = [conj(Z); Z], 2M x L.
struct AugmentedObservation {
  CMatrix Y;
  CMatrix Z;
  std::optional<GroundTruth> truth;
  double noise_variance = 0.0;

  std::size_t num_elements() const { return static_cast<std::size_t>(Z.rows()); }
  std::size_t snapshots() const { return static_cast<std::size_t>(Z.cols()); }
};

/// Stacks conj(Z) on top of Z.
CMatrix augment(const CMatrix& Z);

/// Z = A S + N with N circular Gaussian scaled so that the mean per-entry
/// power of A S over the noise variance equals snr_db; Y = [conj(Z); Z].
AugmentedObservation synthesize(const ScenarioConfig& cfg);

/// Writes `<prefix>_Y.csv` and `<prefix>_truth.csv`.
///
/// Y file: a header line "M,L,K", one line with those values, then 2M rows of
/// 2L values (re,im interleaved per snapshot), row-major. Truth file: header
/// "k,theta_deg,phi_rad,s_1..s_L" and one line per source.
void write_observation(const AugmentedObservation& obs, const std::filesystem::path& prefix);

/// Reads back the Y file written by write_observation; Z is taken from the
/// bottom half. Ground truth is not restored.
AugmentedObservation read_observation(const std::filesystem::path& y_file);

}  // namespace ncbsbl
