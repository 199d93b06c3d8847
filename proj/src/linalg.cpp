#include "quad/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "quad/errors.hpp"

namespace quad::linalg {

namespace {

constexpr double kSpdRelTol = 1e-12;

Eigen::SelfAdjointEigenSolver<MatrixXd> spd_eigen(const MatrixXd& A,
                                                  const char* who) {
  if (A.rows() != A.cols()) {
    fail(Errc::DimensionMismatch, std::string(who) + " expects a square matrix");
  }
  double asym = (A - A.transpose()).norm();
  double scale = A.norm();
  if (asym > 1e-10 * (scale > 0 ? scale : 1.0)) {
    fail(Errc::NotPositiveDefinite,
         std::string(who) + " expects a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
  double lmax = es.eigenvalues().maxCoeff();
  if (!(lmax > 0) || es.eigenvalues().minCoeff() < kSpdRelTol * lmax) {
    fail(Errc::NotPositiveDefinite,
         std::string(who) + ": eigenvalue below positive-definite threshold");
  }
  return es;
}

}  // namespace

MatrixXd spd_sqrt(const MatrixXd& A) {
  auto es = spd_eigen(A, "spd_sqrt");
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

MatrixXd spd_sqrt_inv(const MatrixXd& A) {
  auto es = spd_eigen(A, "spd_sqrt_inv");
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

MatrixXd expm(const MatrixXd& A) {
  // Higham's scaling-and-squaring with the order-13 Pade approximant.
  const Eigen::Index n = A.rows();
  if (n != A.cols()) {
    fail(Errc::DimensionMismatch, "expm expects a square matrix");
  }
  const double theta13 = 5.371920351148152;
  double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int squarings = 0;
  if (nrm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
  }
  MatrixXd As = A / std::pow(2.0, squarings);

  static const double b[] = {64764752532480000.0, 32382376266240000.0,
                             7771770303897600.0,  1187353796428800.0,
                             129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,
                             1323241920.0,        40840800.0,
                             960960.0,            16380.0,
                             182.0,               1.0};

  MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd A2 = As * As;
  MatrixXd A4 = A2 * A2;
  MatrixXd A6 = A2 * A4;
  MatrixXd U = As * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) +
                     b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  MatrixXd V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
               b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  MatrixXd F = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) F = F * F;
  return F;
}

VectorXd flow(const MatrixXd& A, const VectorXd& b, const VectorXd& x0,
              double t) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || x0.size() != n || (b.size() != 0 && b.size() != n)) {
    fail(Errc::DimensionMismatch, "flow: inconsistent dimensions");
  }
  if (b.size() == 0 || b.isZero(0.0)) {
    return expm(A * t) * x0;
  }
  MatrixXd Aug = MatrixXd::Zero(n + 1, n + 1);
  Aug.topLeftCorner(n, n) = A;
  Aug.topRightCorner(n, 1) = b;
  VectorXd z(n + 1);
  z.head(n) = x0;
  z(n) = 1.0;
  VectorXd zt = expm(Aug * t) * z;
  return zt.head(n);
}

double spectral_norm(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(A).singularValues()(0);
}

double cond2(const MatrixXd& A) {
  Eigen::BDCSVD<MatrixXd> svd(A);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

double lognorm(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
  return es.eigenvalues().maxCoeff();
}

}  // namespace quad::linalg
