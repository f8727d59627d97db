#include "ncbsbl/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ncbsbl {

GridSpec GridSpec::make(double theta_min, double theta_max, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument("grid step must be positive, got " + std::to_string(step));
  }
  if (!std::isfinite(theta_min) || !std::isfinite(theta_max) || theta_max < theta_min) {
    throw std::invalid_argument("grid range is empty or not finite");
  }
  if (theta_min <= -90.0 || theta_max >= 90.0) {
    throw std::invalid_argument("grid must lie strictly inside (-90, 90) degrees");
  }
  const double span = (theta_max - theta_min) / step;
  const auto size = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  if (size < 2) {
    throw std::invalid_argument("grid needs at least two points");
  }
  return GridSpec(theta_min, theta_max, step, size);
}

std::vector<double> GridSpec::angles() const {
  std::vector<double> out(size_);
  for (std::size_t n = 0; n < size_; ++n) out[n] = angle(n);
  return out;
}

std::optional<std::size_t> GridSpec::index_of(double theta, double tol) const {
  const std::size_t n = nearest_index(theta);
  if (std::abs(angle(n) - theta) <= tol) return n;
  return std::nullopt;
}

std::size_t GridSpec::nearest_index(double theta) const {
  const double pos = std::round((theta - theta_min_) / step_);
  if (pos <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(pos), size_ - 1);
}

CVector steering_vector(double theta_deg, std::size_t num_elements) {
  if (num_elements == 0) throw std::invalid_argument("steering vector needs M >= 1");
  if (!(std::abs(theta_deg) < 90.0)) {
    throw std::invalid_argument("steering angle must satisfy |theta| < 90 degrees");
  }
  const double phase = kPi * std::sin(deg_to_rad(theta_deg));
  CVector a(static_cast<Eigen::Index>(num_elements));
  for (std::size_t m = 0; m < num_elements; ++m) {
    a[static_cast<Eigen::Index>(m)] = std::polar(1.0, -static_cast<double>(m) * phase);
  }
  return a;
}

CMatrix build_dictionary(const GridSpec& grid, std::size_t num_elements) {
  CMatrix A(static_cast<Eigen::Index>(num_elements), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t n = 0; n < grid.size(); ++n) {
    A.col(static_cast<Eigen::Index>(n)) = steering_vector(grid.angle(n), num_elements);
  }
  return A;
}

Permutation Permutation::for_blocks(std::size_t num_blocks) {
  if (num_blocks == 0) throw std::invalid_argument("permutation needs N >= 1");
  Permutation p;
  const std::size_t n2 = 2 * num_blocks;
  p.row_to_col_.resize(n2);
  p.col_to_row_.resize(n2);
  for (std::size_t r = 0; r < n2; ++r) {
    const std::size_t c = r < num_blocks ? 2 * r : 2 * (r - num_blocks) + 1;
    p.row_to_col_[r] = c;
    p.col_to_row_[c] = r;
  }
  return p;
}

Permutation Permutation::inverse() const {
  Permutation p;
  p.row_to_col_ = col_to_row_;
  p.col_to_row_ = row_to_col_;
  return p;
}

BlockDictionary build_block_dictionary(const CMatrix& dictionary) {
  const Eigen::Index M = dictionary.rows();
  const Eigen::Index N = dictionary.cols();
  BlockDictionary d;
  d.num_elements = static_cast<std::size_t>(M);
  d.num_blocks = static_cast<std::size_t>(N);
  d.A = dictionary;
  d.V = CMatrix::Zero(2 * M, 2 * N);
  for (Eigen::Index i = 0; i < N; ++i) {
    d.V.col(2 * i).head(M) = dictionary.col(i).conjugate();
    d.V.col(2 * i + 1).tail(M) = dictionary.col(i);
  }
  return d;
}

BlockDictionary build_block_dictionary(const GridSpec& grid, std::size_t num_elements) {
  return build_block_dictionary(build_dictionary(grid, num_elements));
}

}  // namespace ncbsbl
