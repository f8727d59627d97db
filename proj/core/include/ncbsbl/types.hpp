#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace ncbsbl {

using cdouble = std::complex<double>;

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Per-block 2x2 quantities (U_i, L_i, G_i, ...).
using Mat2c = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace ncbsbl
