#pragma once

#include <cstddef>

#include "ncbsbl/types.hpp"

// Closed-form 2x2 algebra for a single signal block: the stationary-point
// update of the block covariance, its PSD projection, the AR(1) Toeplitz
// constraint, and the block's contribution to the marginal cost.

namespace ncbsbl {

inline Mat2c hermitian_part(const Mat2c& m) { return 0.5 * (m + m.adjoint()); }

/// Unconstrained maximiser of the block's marginal likelihood term:
/// U^{-1} (scatter - U) U^{-1}, with scatter = Q Q^H / L.
Mat2c raw_block_update(const Mat2c& U, const Mat2c& scatter);

/// Optimal PSD block covariance. With U = R R^H the term depends on
/// R^H Lambda R only, so the projection clips the negative eigenvalues of
/// R^{-1} scatter R^{-H} - I and maps back. Equals raw_block_update() whenever
/// that is already PSD; returns exactly zero when both eigenvalues clip.
///
/// Throws std::runtime_error if U is not positive definite.
Mat2c update_block(const Mat2c& U, const Mat2c& scatter);

/// Hermitian part of m with negative eigenvalues set to zero.
Mat2c clip_negative_eigenvalues(const Mat2c& m);

/// Scale / AR(1)-correlation split of a block covariance.
struct BlockConstraint {
  double gamma = 0.0;
  Mat2c G = Mat2c::Identity();
  cdouble r{0.0, 0.0};
  bool clipped = false;

  Mat2c combined() const { return gamma * G; }
};

/// gamma = tr(L)/2; r = mean off-diagonal over mean diagonal of L, clipped to
/// |r| <= r_clip; G = [[1, r], [conj(r), 1]]. gamma == 0 gives G = I.
BlockConstraint constrain_block(const Mat2c& L, double r_clip);

/// The block's share of the marginal cost,
///   snapshots * log|I + Lambda U| - tr(Q^H (Lambda^{-1} + U)^{-1} Q),
/// evaluated through Lambda (I + U Lambda)^{-1} so singular Lambda (including
/// zero) is fine. `QQh` is Q Q^H (not divided by the snapshot count).
double block_cost(const Mat2c& lambda, const Mat2c& U, const Mat2c& QQh, std::size_t snapshots);

/// block_cost(candidate) - block_cost(current). Negative means the swap lowers
/// the total marginal cost by exactly that amount.
double block_cost_delta(const Mat2c& candidate, const Mat2c& current, const Mat2c& U,
                        const Mat2c& QQh, std::size_t snapshots);

}  // namespace ncbsbl
