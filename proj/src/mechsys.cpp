#include "quad/mechsys.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "quad/linalg.hpp"

namespace quad::mechsys {

namespace {

void check_symmetric(const MatrixXd& A, const char* name) {
  const double scale = std::max(1.0, A.norm());
  if ((A - A.transpose()).norm() > 1e-9 * scale) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
}

MatrixXd sqrt_m(const MechanicalSystem& sys) {
  return sys.masses.array().sqrt().matrix().asDiagonal();
}

MatrixXd sqrt_m_inv(const MechanicalSystem& sys) {
  return sys.masses.array().rsqrt().matrix().asDiagonal();
}

VectorXd forcing_or_zero(const MechanicalSystem& sys) {
  if (sys.forcing.size() == 0) return VectorXd::Zero(sys.d);
  return sys.forcing;
}

bool has_forcing(const MechanicalSystem& sys) {
  return sys.forcing.size() != 0 && sys.forcing.norm() != 0.0;
}

int ytilde_cols(int d) { return d * (d + 1) / 2; }

}  // namespace

void validate(MechanicalSystem& sys) {
  if (sys.d < 1) throw std::invalid_argument("d must be at least 1");
  if (sys.masses.size() != sys.d) {
    fail(Errc::DimensionMismatch, "masses must have length d");
  }
  for (int i = 0; i < sys.d; ++i) {
    if (!(sys.masses(i) > 0.0)) {
      fail(Errc::SingularMass, "mass entries must be positive");
    }
  }
  if (sys.damping.size() == 0) {
    sys.damping = MatrixXd::Zero(sys.d, sys.d);
  }
  if (sys.damping.rows() != sys.d || sys.damping.cols() != sys.d) {
    fail(Errc::DimensionMismatch, "damping must be d x d");
  }
  check_symmetric(sys.damping, "damping");
  if (sys.springs) {
    MatrixXd derived = potential_from_springs(sys.d, *sys.springs);
    if (sys.potential.size() == 0) {
      sys.potential = derived;
    } else if ((sys.potential - derived).norm() >
               1e-9 * std::max(1.0, derived.norm())) {
      throw std::invalid_argument("potential disagrees with spring list");
    }
  }
  if (sys.potential.rows() != sys.d || sys.potential.cols() != sys.d) {
    fail(Errc::DimensionMismatch, "potential must be d x d");
  }
  check_symmetric(sys.potential, "potential");
  if (sys.forcing.size() != 0 && sys.forcing.size() != sys.d) {
    fail(Errc::DimensionMismatch, "forcing must have length d");
  }
}

MatrixXd potential_from_springs(int d, const std::vector<Spring>& springs) {
  std::map<std::pair<int, int>, double> merged;
  for (const auto& s : springs) {
    if (s.j < 0 || s.j >= d || s.k < 0 || s.k >= d) {
      fail(Errc::DimensionMismatch, "spring index out of range");
    }
    if (s.kappa < 0.0) fail(Errc::NegativeSpring, "spring constants must be nonnegative");
    merged[{std::min(s.j, s.k), std::max(s.j, s.k)}] += s.kappa;
  }
  MatrixXd V = MatrixXd::Zero(d, d);
  for (const auto& [jk, kappa] : merged) {
    auto [j, k] = jk;
    if (j == k) {
      V(j, j) += kappa;
    } else {
      V(j, j) += kappa;
      V(k, k) += kappa;
      V(j, k) -= kappa;
      V(k, j) -= kappa;
    }
  }
  return V;
}

MatrixXd build_B(const MechanicalSystem& sys) {
  if (!sys.springs) fail(Errc::MissingSprings, "spring list required");
  std::map<std::pair<int, int>, double> merged;
  for (const auto& s : sys.springs.value()) {
    if (s.j < 0 || s.j >= sys.d || s.k < 0 || s.k >= sys.d) {
      fail(Errc::DimensionMismatch, "spring index out of range");
    }
    if (s.kappa < 0.0) fail(Errc::NegativeSpring, "spring constants must be nonnegative");
    merged[{std::min(s.j, s.k), std::max(s.j, s.k)}] += s.kappa;
  }
  const int d = sys.d;
  MatrixXd B = MatrixXd::Zero(d, ytilde_cols(d));
  int col = 0;
  for (int j = 0; j < d; ++j, ++col) {
    auto it = merged.find({j, j});
    if (it != merged.end() && it->second > 0.0) {
      B(j, col) = std::sqrt(it->second / sys.masses(j));
    }
  }
  for (int j = 0; j < d; ++j) {
    for (int k = j + 1; k < d; ++k, ++col) {
      auto it = merged.find({j, k});
      if (it != merged.end() && it->second > 0.0) {
        B(j, col) = std::sqrt(it->second / sys.masses(j));
        B(k, col) = -std::sqrt(it->second / sys.masses(k));
      }
    }
  }
  return B;
}

LinearODE assemble(const MechanicalSystem& sys, Basis basis) {
  const int d = sys.d;
  const MatrixXd& R = sys.damping;
  const MatrixXd& V = sys.potential;
  const MatrixXd Minv = sys.masses.array().inverse().matrix().asDiagonal();
  LinearODE ode;
  switch (basis) {
    case Basis::X: {
      ode.A = MatrixXd::Zero(2 * d, 2 * d);
      ode.A.topRightCorner(d, d) = MatrixXd::Identity(d, d);
      ode.A.bottomLeftCorner(d, d) = -Minv * V;
      ode.A.bottomRightCorner(d, d) = -Minv * R;
      if (has_forcing(sys)) {
        ode.b = VectorXd::Zero(2 * d);
        ode.b.tail(d) = -Minv * forcing_or_zero(sys);
      }
      break;
    }
    case Basis::Z: {
      ode.A = MatrixXd::Zero(2 * d, 2 * d);
      ode.A.topRightCorner(d, d) = Minv;
      ode.A.bottomLeftCorner(d, d) = -V;
      ode.A.bottomRightCorner(d, d) = -R * Minv;
      if (has_forcing(sys)) {
        ode.b = VectorXd::Zero(2 * d);
        ode.b.tail(d) = -forcing_or_zero(sys);
      }
      break;
    }
    case Basis::Y: {
      const MatrixXd sv = linalg::spd_sqrt(V);
      const MatrixXd smi = sqrt_m_inv(sys);
      ode.A = MatrixXd::Zero(2 * d, 2 * d);
      ode.A.topRightCorner(d, d) = sv * smi;
      ode.A.bottomLeftCorner(d, d) = -smi * sv;
      ode.A.bottomRightCorner(d, d) = -smi * R * smi;
      if (has_forcing(sys)) {
        ode.b = VectorXd::Zero(2 * d);
        ode.b.tail(d) = -smi * forcing_or_zero(sys);
      }
      break;
    }
    case Basis::YTilde: {
      const MatrixXd B = build_B(sys);
      const MatrixXd smi = sqrt_m_inv(sys);
      const int d1 = ytilde_cols(d);
      ode.A = MatrixXd::Zero(d1 + d, d1 + d);
      ode.A.topRightCorner(d1, d) = B.transpose();
      ode.A.bottomLeftCorner(d, d1) = -B;
      ode.A.bottomRightCorner(d, d) = -smi * R * smi;
      if (has_forcing(sys)) {
        ode.b = VectorXd::Zero(d1 + d);
        ode.b.tail(d) = -smi * forcing_or_zero(sys);
      }
      break;
    }
  }
  return ode;
}

VectorXd initial_state(const MechanicalSystem& sys, Basis basis,
                       const VectorXd& q0, const VectorXd& qdot0) {
  const int d = sys.d;
  if (q0.size() != d || qdot0.size() != d) {
    fail(Errc::DimensionMismatch, "q0 and qdot0 must have length d");
  }
  switch (basis) {
    case Basis::X: {
      VectorXd x(2 * d);
      x << q0, qdot0;
      return x;
    }
    case Basis::Z: {
      VectorXd x(2 * d);
      x << q0, sys.masses.cwiseProduct(qdot0);
      return x;
    }
    case Basis::Y: {
      VectorXd x(2 * d);
      x << linalg::spd_sqrt(sys.potential) * q0, sqrt_m(sys) * qdot0;
      return x;
    }
    case Basis::YTilde: {
      const MatrixXd B = build_B(sys);
      VectorXd x(ytilde_cols(d) + d);
      x << B.transpose() * sqrt_m(sys) * q0, sqrt_m(sys) * qdot0;
      return x;
    }
  }
  throw std::logic_error("unreachable");
}

State recover_state(const MechanicalSystem& sys, Basis basis,
                    const VectorXd& x) {
  const int d = sys.d;
  State st;
  switch (basis) {
    case Basis::X:
      if (x.size() != 2 * d) fail(Errc::DimensionMismatch, "state must have length 2d");
      st.q = x.head(d);
      st.qdot = x.tail(d);
      return st;
    case Basis::Z:
      if (x.size() != 2 * d) fail(Errc::DimensionMismatch, "state must have length 2d");
      st.q = x.head(d);
      st.qdot = x.tail(d).cwiseQuotient(sys.masses);
      return st;
    case Basis::Y:
      if (x.size() != 2 * d) fail(Errc::DimensionMismatch, "state must have length 2d");
      st.q = linalg::spd_sqrt_inv(sys.potential) * x.head(d);
      st.qdot = sqrt_m_inv(sys) * x.tail(d);
      return st;
    case Basis::YTilde: {
      const int d1 = ytilde_cols(d);
      if (x.size() != d1 + d) {
        fail(Errc::DimensionMismatch, "state must have length d(d+1)/2 + d");
      }
      const MatrixXd Bt = build_B(sys).transpose() * sqrt_m(sys);
      st.q = Bt.completeOrthogonalDecomposition().solve(x.head(d1));
      st.qdot = sqrt_m_inv(sys) * x.tail(d);
      return st;
    }
  }
  throw std::logic_error("unreachable");
}

Energies energies(const MechanicalSystem& sys, const VectorXd& q,
                  const VectorXd& qdot) {
  if (q.size() != sys.d || qdot.size() != sys.d) {
    fail(Errc::DimensionMismatch, "q and qdot must have length d");
  }
  Energies e;
  e.kinetic = 0.5 * qdot.dot(sys.masses.cwiseProduct(qdot));
  e.total = e.kinetic + 0.5 * q.dot(sys.potential * q);
  return e;
}

MatrixXd exp_jq(const MatrixXd& V, double t) {
  const int d = static_cast<int>(V.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es;
  // spd_sqrt validates positive definiteness; reuse its eigensystem path.
  const MatrixXd sv = linalg::spd_sqrt(V);
  es.compute(sv);
  const VectorXd omega = es.eigenvalues();  // sqrt of the eigenvalues of V
  const MatrixXd& U = es.eigenvectors();
  VectorXd c(d), s(d);
  for (int i = 0; i < d; ++i) {
    c(i) = std::cos(omega(i) * t);
    s(i) = std::sin(omega(i) * t);
  }
  const MatrixXd C = U * c.asDiagonal() * U.transpose();
  const MatrixXd Sw = U * (omega.array() * s.array()).matrix().asDiagonal() *
                      U.transpose();
  const MatrixXd Sinvw =
      U * (s.array() / omega.array()).matrix().asDiagonal() * U.transpose();
  MatrixXd E(2 * d, 2 * d);
  E.topLeftCorner(d, d) = C;
  E.topRightCorner(d, d) = Sinvw;
  E.bottomLeftCorner(d, d) = -Sw;
  E.bottomRightCorner(d, d) = C;
  return E;
}

NormBound norm_bound_A(const MechanicalSystem& sys) {
  const MatrixXd Minv = sys.masses.array().inverse().matrix().asDiagonal();
  LinearODE ode = assemble(sys, Basis::X);
  NormBound nb;
  nb.exact = linalg::spectral_norm(ode.A);
  nb.bound = 2.0 * std::max({linalg::spectral_norm(Minv * sys.potential),
                             linalg::spectral_norm(Minv * sys.damping), 1.0});
  return nb;
}

double c_of_a(const MatrixXd& A, double T, int grid) {
  if (T < 0.0) throw std::invalid_argument("T must be nonnegative");
  if (grid < 2) grid = 2;
  if (T == 0.0 || A.size() == 0) return 1.0;
  const double h = T / grid;
  const MatrixXd Estep = linalg::expm(A * h);
  MatrixXd P = MatrixXd::Identity(A.rows(), A.cols());
  double best = 1.0;
  int best_i = 0;
  for (int i = 1; i <= grid; ++i) {
    if (i % 32 == 0) {
      P = linalg::expm(A * (i * h));  // refresh against cumulative drift
    } else {
      P = Estep * P;
    }
    const double v = linalg::spectral_norm(P);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  // golden-section polish around the grid argmax
  double lo = std::max(0.0, (best_i - 1) * h);
  double hi = std::min(T, (best_i + 1) * h);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
  double fa = linalg::spectral_norm(linalg::expm(A * a));
  double fb = linalg::spectral_norm(linalg::expm(A * b));
  for (int it = 0; it < 40; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = linalg::spectral_norm(linalg::expm(A * b));
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = linalg::spectral_norm(linalg::expm(A * a));
    }
  }
  return std::max(best, std::max(fa, fb));
}

double c_of_a(const LinearODE& ode, int grid) {
  return c_of_a(ode.A, ode.T, grid);
}

double c_of_a_bound(const MatrixXd& F0, const MatrixXd& F1, const MatrixXd& F2,
                    const MatrixXd& F3, double T, int grid) {
  const double n0 = F0.size() ? linalg::spectral_norm(F0) : 0.0;
  const double n2 = F2.size() ? linalg::spectral_norm(F2) : 0.0;
  const double cd =
      std::max(c_of_a(F1, T, grid), c_of_a(F3, T, grid));
  const bool z0 = (n0 == 0.0), z2 = (n2 == 0.0);
  if (z0 && z2) return cd;
  if (z0) return cd * (1.0 + cd * n2 * T);
  if (z2) return cd * (1.0 + cd * n0 * T);
  const double mu = std::max(linalg::lognorm(F1), linalg::lognorm(F3));
  return std::max(1.0, std::exp((mu + n0 + n2) * T));
}

double c_of_a_bound(const MechanicalSystem& sys) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (sys.damping + sys.damping.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, sys.damping.norm())) {
    fail(Errc::NotPositiveDefinite, "damping must be positive semidefinite");
  }
  const MatrixXd sv = linalg::spd_sqrt(sys.potential);
  const VectorXd sm = sys.masses.array().sqrt();
  const double smax = std::max(linalg::spectral_norm(sv), sm.maxCoeff());
  const double smin =
      std::min(1.0 / linalg::spectral_norm(linalg::spd_sqrt_inv(sys.potential)),
               sm.minCoeff());
  return smax / smin;
}

}  // namespace quad::mechsys
