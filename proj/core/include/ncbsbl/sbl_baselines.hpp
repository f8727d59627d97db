#pragma once

#include <span>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/bsbl_fmlm.hpp"
#include "ncbsbl/synth.hpp"
#include "ncbsbl/types.hpp"

// Comparator solvers: multiple-measurement SBL with EM hyperparameter updates
// over the whole dictionary every iteration (no basis selection), and its
// non-circular variant whose atoms carry a known, common NC phase.

namespace ncbsbl {

struct ScalarHyperparameters {
  RVector gamma;
  double beta = 1.0;
};

struct SblResult {
  ScalarHyperparameters hypers;
  CMatrix mu;  // N x L
  SolverReport report;
};

struct ScalarPosterior {
  CMatrix mu;     // N x L
  CMatrix Sigma;  // N x N
};

/// Posterior moments for fixed gamma and beta, computed through the
/// rows x rows data covariance beta^{-1} I + A diag(gamma) A^H.
ScalarPosterior sbl_posterior(const CMatrix& data, const CMatrix& dictionary,
                              const RVector& gamma, double beta);

/// EM-SBL on data (rows x L) against dictionary (rows x N). Uses the same
/// stopping rule, iteration cap, prune floor and beta policy as the FMLM
/// solver; gamma_i <- ||mu_i||^2 / L + Sigma_ii.
SblResult sbl_em_solve(const CMatrix& data, const CMatrix& dictionary, const SolverConfig& cfg);

/// Atoms [exp(j phi) conj(a_n); exp(-j phi) a_n], a 2M x N matrix.
CMatrix nc_dictionary(const GridSpec& grid, std::size_t num_elements, double phi_rad);

/// NC-SBL: EM-SBL on the augmented data with the known phase baked into the
/// atoms. All known_phis must be equal (within 1e-12); distinct per-source
/// phases cannot be represented and are rejected with std::invalid_argument.
SblResult nc_sbl_solve(const AugmentedObservation& obs, const GridSpec& grid,
                       std::span<const double> known_phis, const SolverConfig& cfg);

/// Returns the common phase or throws std::invalid_argument.
double common_phase(std::span<const double> known_phis);

}  // namespace ncbsbl
