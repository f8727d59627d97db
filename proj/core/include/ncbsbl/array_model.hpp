#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ncbsbl/types.hpp"

namespace ncbsbl {

/// Uniform angular grid with inclusive endpoints, in degrees.
///
/// Point n (zero-based) sits at theta_min + n * step. The point count is
/// floor((theta_max - theta_min) / step) + 1 with a small tolerance so that
/// decimal steps such as 0.1 land on the closing endpoint.
class GridSpec {
 public:
  GridSpec() = default;

  /// Throws std::invalid_argument if step <= 0, the range is inverted, or the
  /// grid would hold fewer than two points.
  static GridSpec make(double theta_min, double theta_max, double step);

  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  double step() const { return step_; }
  std::size_t size() const { return size_; }

  double angle(std::size_t n) const { return theta_min_ + static_cast<double>(n) * step_; }
  std::vector<double> angles() const;

  /// Index of the grid point within `tol` degrees of theta, if any.
  std::optional<std::size_t> index_of(double theta, double tol = 1e-9) const;

  /// Nearest grid index (clamped to the grid).
  std::size_t nearest_index(double theta) const;

  /// Angular span covered by the grid, used as the miss penalty for DOA errors.
  double span() const { return angle(size_ - 1) - theta_min_; }

 private:
  GridSpec(double theta_min, double theta_max, double step, std::size_t size)
      : theta_min_(theta_min), theta_max_(theta_max), step_(step), size_(size) {}

  double theta_min_ = -40.0;
  double theta_max_ = 40.0;
  double step_ = 0.1;
  std::size_t size_ = 801;
};

/// ULA steering vector with half-wavelength spacing: entry m is
/// exp(-j * m * pi * sin(theta)), m = 0..M-1.
///
/// Throws std::invalid_argument for M == 0 or |theta| >= 90 degrees.
CVector steering_vector(double theta_deg, std::size_t num_elements);

/// Overcomplete M x N dictionary whose column n is steering_vector(grid.angle(n), M).
CMatrix build_dictionary(const GridSpec& grid, std::size_t num_elements);

/// Index-map form of the 2N x 2N permutation that interleaves the conjugate
/// and direct halves of blkdiag(conj(A), A) so block i owns grid angle i.
///
/// Stored zero-based: row r has its single unit entry in column `column(r)`.
/// For r < N the column is 2r; for r >= N it is 2(r - N) + 1.
class Permutation {
 public:
  static Permutation for_blocks(std::size_t num_blocks);

  std::size_t size() const { return row_to_col_.size(); }
  std::size_t column(std::size_t row) const { return row_to_col_[row]; }
  std::size_t row(std::size_t col) const { return col_to_row_[col]; }

  const std::vector<std::size_t>& row_to_col() const { return row_to_col_; }
  Permutation inverse() const;

 private:
  std::vector<std::size_t> row_to_col_;
  std::vector<std::size_t> col_to_row_;
};

/// The permuted augmented dictionary V = blkdiag(conj(A), A) * J.
///
/// Block i is the 2M x 2 pair of columns (2i, 2i+1): [conj(a_i); 0] and [0; a_i].
struct BlockDictionary {
  CMatrix V;
  CMatrix A;  // the M x N dictionary V was assembled from
  std::size_t num_elements = 0;  // M
  std::size_t num_blocks = 0;    // N

  auto block(std::size_t i) const { return V.middleCols(2 * i, 2); }
  std::size_t rows() const { return 2 * num_elements; }
};

BlockDictionary build_block_dictionary(const GridSpec& grid, std::size_t num_elements);

/// Same as above from an already assembled M x N dictionary.
BlockDictionary build_block_dictionary(const CMatrix& dictionary);

}  // namespace ncbsbl
