#include "ncbsbl/block_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ncbsbl {

Mat2c raw_block_update(const Mat2c& U, const Mat2c& scatter) {
  const Mat2c u_inv = U.inverse();
  return u_inv * (scatter - U) * u_inv;
}

Mat2c clip_negative_eigenvalues(const Mat2c& m) {
  const Mat2c h = hermitian_part(m);
  const double a = h(0, 0).real();
  const double d = h(1, 1).real();
  const cdouble b = h(0, 1);
  const double mean = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), std::abs(b));
  const double hi = mean + rad;
  const double lo = mean - rad;
  if (lo >= 0.0) return h;
  if (hi <= 0.0) return Mat2c::Zero();

  Eigen::Vector2cd v1(b, hi - a);
  Eigen::Vector2cd v2(hi - d, std::conj(b));
  Eigen::Vector2cd v = v1.squaredNorm() >= v2.squaredNorm() ? v1 : v2;
  v.normalize();
  return hi * (v * v.adjoint());
}

Mat2c update_block(const Mat2c& U, const Mat2c& scatter) {
  Eigen::LLT<Mat2c> llt(hermitian_part(U));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("block Gram matrix is not positive definite");
  }
  const Mat2c r_inv = Mat2c(llt.matrixL()).inverse();
  const Mat2c whitened = r_inv * hermitian_part(scatter) * r_inv.adjoint() - Mat2c::Identity();
  const Mat2c clipped = clip_negative_eigenvalues(whitened);
  if (clipped.isZero(0.0)) return Mat2c::Zero();
  return hermitian_part(r_inv.adjoint() * clipped * r_inv);
}

BlockConstraint constrain_block(const Mat2c& L, double r_clip) {
  BlockConstraint out;
  const Mat2c h = hermitian_part(L);
  const double gamma = 0.5 * (h(0, 0).real() + h(1, 1).real());
  if (!(gamma > 0.0)) return out;
  cdouble r = h(0, 1) / gamma;
  if (std::abs(r) > r_clip) {
    r *= r_clip / std::abs(r);
    out.clipped = true;
  }
  out.gamma = gamma;
  out.r = r;
  out.G << cdouble(1.0, 0.0), r, std::conj(r), cdouble(1.0, 0.0);
  return out;
}

double block_cost(const Mat2c& lambda, const Mat2c& U, const Mat2c& QQh, std::size_t snapshots) {
  if (lambda.isZero(0.0)) return 0.0;
  const Mat2c I = Mat2c::Identity();
  const cdouble det = (I + lambda * U).determinant();
  if (!(det.real() > 0.0)) return std::numeric_limits<double>::infinity();
  const Mat2c shrink = lambda * (I + U * lambda).inverse();
  return static_cast<double>(snapshots) * std::log(det.real()) - (shrink * QQh).trace().real();
}

double block_cost_delta(const Mat2c& candidate, const Mat2c& current, const Mat2c& U,
                        const Mat2c& QQh, std::size_t snapshots) {
  return block_cost(candidate, U, QQh, snapshots) - block_cost(current, U, QQh, snapshots);
}

}  // namespace ncbsbl
