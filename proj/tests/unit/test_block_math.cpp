#include <cmath>
#include <random>

#include "doctest.h"
#include "dense_oracles.hpp"
#include "ncbsbl/block_math.hpp"

using namespace ncbsbl;

namespace {

bool is_psd(const Mat2c& m, double tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat2c> es(hermitian_part(m));
  return es.eigenvalues()(0) >= -tol * std::max(1.0, es.eigenvalues()(1));
}

}  // namespace

TEST_CASE("block update zero and identity cases") {
  std::mt19937_64 rng(3);
  const Mat2c U = oracle::random_hpd(rng);
  CHECK(update_block(U, U).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(update_block(Mat2c::Identity(), 2.0 * Mat2c::Identity()).isApprox(Mat2c::Identity(), 1e-14));
  CHECK(raw_block_update(Mat2c::Identity(), 2.0 * Mat2c::Identity()).isApprox(Mat2c::Identity(), 1e-14));
}

TEST_CASE("raw block update matches the explicit formula") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat2c U = oracle::random_hpd(rng);
    const CMatrix Q = oracle::random_complex(2, 3, rng);
    const Mat2c scatter = Q * Q.adjoint() / 3.0;
    const Mat2c want = oracle::raw_update(U, scatter);
    CHECK((raw_block_update(U, scatter) - want).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("projected update equals the raw one when that is already PSD") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat2c U = oracle::random_hpd(rng);
    const Mat2c P = oracle::random_hpd(rng, 0.01);
    const Mat2c scatter = U + U * P * U;  // raw update is exactly P
    const Mat2c got = update_block(U, scatter);
    CHECK((got - oracle::raw_update(U, scatter)).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + P.norm()));
    CHECK((got - P).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + P.norm()));
  }
}

TEST_CASE("projected update minimises the block cost over PSD matrices") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat2c U = oracle::random_hpd(rng);
    const CMatrix Q = oracle::random_complex(2, 4, rng) * 0.7;
    const Mat2c QQh = Q * Q.adjoint();
    const Mat2c best = update_block(U, QQh / 4.0);
    CHECK(is_psd(best));
    const double c_best = block_cost(best, U, QQh, 4);
    for (int probe = 0; probe < 50; ++probe) {
      const Mat2c other = oracle::random_hpd(rng, 0.0) * std::exp(n(rng));
      CHECK(block_cost(other, U, QQh, 4) >= c_best - 1e-9 * (1.0 + std::abs(c_best)));
      const Mat2c nudged = clip_negative_eigenvalues(best + 1e-3 * oracle::random_hpd(rng, 0.0));
      CHECK(block_cost(nudged, U, QQh, 4) >= c_best - 1e-9 * (1.0 + std::abs(c_best)));
    }
  }
}

TEST_CASE("negative eigenvalue clipping agrees with an eigensolver") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const CMatrix X = oracle::random_complex(2, 2, rng);
    const Mat2c H = hermitian_part(Mat2c(X));
    Eigen::SelfAdjointEigenSolver<Mat2c> es(H);
    const Eigen::Vector2d clipped = es.eigenvalues().cwiseMax(0.0);
    const Mat2c want = es.eigenvectors() * clipped.cast<cdouble>().asDiagonal() * es.eigenvectors().adjoint();
    CHECK((clip_negative_eigenvalues(H) - want).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + H.norm()));
  }
}

TEST_CASE("scale and AR split") {
  const BlockConstraint a = constrain_block(2.0 * Mat2c::Identity(), 0.99);
  CHECK(a.gamma == doctest::Approx(2.0));
  CHECK(a.G.isApprox(Mat2c::Identity(), 1e-15));

  Mat2c l;
  l << 1.0, 0.5, 0.5, 1.0;
  const BlockConstraint b = constrain_block(l, 0.99);
  CHECK(b.gamma == doctest::Approx(1.0));
  CHECK(std::abs(b.r - cdouble(0.5, 0.0)) < 1e-15);
  CHECK(b.G.isApprox(l, 1e-15));
  CHECK_FALSE(b.clipped);
  CHECK((b.combined() - l).cwiseAbs().maxCoeff() < 1e-12);

  l << 1.0, 1.2, 1.2, 1.0;
  const BlockConstraint c = constrain_block(l, 0.99);
  CHECK(std::abs(c.r) == doctest::Approx(0.99));
  CHECK(c.clipped);
  Eigen::SelfAdjointEigenSolver<Mat2c> es(c.G);
  CHECK(es.eigenvalues()(0) > 0.0);

  const BlockConstraint z = constrain_block(Mat2c::Zero(), 0.99);
  CHECK(z.gamma == 0.0);
  CHECK(z.G == Mat2c::Identity());
}

TEST_CASE("AR split keeps unit-diagonal Hermitian Toeplitz structure") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat2c L = oracle::random_hpd(rng, 0.0);
    const BlockConstraint c = constrain_block(L, 0.99);
    CHECK(c.gamma == doctest::Approx(0.5 * L.trace().real()));
    CHECK(c.G(0, 0) == cdouble(1.0, 0.0));
    CHECK(c.G(1, 1) == cdouble(1.0, 0.0));
    CHECK(c.G(1, 0) == std::conj(c.G(0, 1)));
    CHECK(std::abs(c.r) <= 0.99 + 1e-15);
    CHECK(std::abs(c.combined().trace() - L.trace()) < 1e-12 * L.norm());
  }
}

TEST_CASE("block cost of a no-op is zero") {
  std::mt19937_64 rng(55);
  const Mat2c U = oracle::random_hpd(rng);
  const CMatrix Q = oracle::random_complex(2, 3, rng);
  const Mat2c QQh = Q * Q.adjoint();
  CHECK(block_cost(Mat2c::Zero(), U, QQh, 3) == 0.0);
  CHECK(block_cost_delta(Mat2c::Zero(), Mat2c::Zero(), U, QQh, 3) == 0.0);
  const Mat2c lam = oracle::random_hpd(rng);
  CHECK(block_cost_delta(lam, lam, U, QQh, 3) == 0.0);
}

TEST_CASE("block cost matches the inverse form for invertible covariances") {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat2c U = oracle::random_hpd(rng);
    const Mat2c lam = oracle::random_hpd(rng);
    const CMatrix Q = oracle::random_complex(2, 5, rng);
    const double logdet = std::log(std::abs((Mat2c::Identity() + lam * U).determinant()));
    const double want =
        5.0 * logdet - (Q.adjoint() * (lam.inverse() + U).inverse() * Q).trace().real();
    CHECK(block_cost(lam, U, Q * Q.adjoint(), 5) == doctest::Approx(want).epsilon(1e-10));
  }
}
