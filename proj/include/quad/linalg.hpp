#pragma once

#include <Eigen/Dense>

namespace quad::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Symmetric positive-definite square root via eigendecomposition. Throws
// quad::Error(NotPositiveDefinite) when any eigenvalue falls below
// 1e-12 * lambda_max (or when the matrix is not symmetric to round-off).
MatrixXd spd_sqrt(const MatrixXd& A);

// Inverse square root, same validity conditions as spd_sqrt.
MatrixXd spd_sqrt_inv(const MatrixXd& A);

// Dense matrix exponential, Pade-13 scaling and squaring.
MatrixXd expm(const MatrixXd& A);

// Exact flow of dx/dt = A x + b over time t: returns x(t) given x(0) = x0.
// Uses the augmented-matrix exponential, so it is exact up to expm accuracy
// even when A is singular.
VectorXd flow(const MatrixXd& A, const VectorXd& b, const VectorXd& x0,
              double t);

// Spectral norm (largest singular value).
double spectral_norm(const MatrixXd& A);

// 2-norm condition number sigma_max / sigma_min; returns +inf when
// sigma_min underflows to zero.
double cond2(const MatrixXd& A);

// Logarithmic norm with respect to the 2-norm: lambda_max((A + A^T)/2).
double lognorm(const MatrixXd& A);

}  // namespace quad::linalg
