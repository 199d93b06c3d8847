#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "quad/errors.hpp"

namespace quad::mechsys {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One spring: kappa couples coordinates j and k (j == k means a self spring
// anchoring coordinate j to the origin). Indices are 0-based.
struct Spring {
  int j = 0;
  int k = 0;
  double kappa = 0.0;
};

// Linear second-order system  M q'' + R q' + V q + f = 0 with diagonal mass
// matrix. forcing may be empty (treated as zero); springs, when present, are
// an alternative description of V.
struct MechanicalSystem {
  int d = 0;
  VectorXd masses;
  MatrixXd damping;    // R, d x d, symmetric PSD where the bounds need it
  MatrixXd potential;  // V, d x d, symmetric
  VectorXd forcing;    // f, size d or empty
  std::optional<std::vector<Spring>> springs;
};

enum class Basis { X, Z, Y, YTilde };

// First-order form  x' = A x + b  on [0, T]. b empty means zero. x0 empty
// until initial data is attached.
struct LinearODE {
  MatrixXd A;
  VectorXd b;
  VectorXd x0;
  double T = 0.0;
};

struct Energies {
  double kinetic = 0.0;
  double total = 0.0;
};

struct NormBound {
  double bound = 0.0;  // 2 * max{||M^-1 V||, ||M^-1 R||, 1}
  double exact = 0.0;  // spectral norm of the x-basis generator
};

struct State {
  VectorXd q;
  VectorXd qdot;
};

// Checks shapes, positivity of masses, symmetry of R and V, spring indices
// and signs. If springs are present and potential is empty, fills potential
// from them. Throws quad::Error / std::invalid_argument.
void validate(MechanicalSystem& sys);

// V from a spring list: V[j][j] = kappa(j,j) + sum_{k != j} kappa(j,k),
// V[j][k] = -kappa(j,k).
MatrixXd potential_from_springs(int d, const std::vector<Spring>& springs);

// The d x d(d+1)/2 incidence-like factor with B B^T = M^-1/2 V M^-1/2.
// Columns: self springs for j = 0..d-1, then pairs (j,k), j < k, in
// lexicographic order. Zero columns are kept so the shape is predictable.
MatrixXd build_B(const MechanicalSystem& sys);

// Generator and drift in the requested basis. T is left 0; x0 empty.
LinearODE assemble(const MechanicalSystem& sys, Basis basis);

VectorXd initial_state(const MechanicalSystem& sys, Basis basis,
                       const VectorXd& q0, const VectorXd& qdot0);

// Inverse of initial_state along the trajectory. For YTilde the position is
// recovered through a pseudoinverse (V may be singular there).
State recover_state(const MechanicalSystem& sys, Basis basis,
                    const VectorXd& x);

Energies energies(const MechanicalSystem& sys, const VectorXd& q,
                  const VectorXd& qdot);

// exp(J Q t) for Q = diag(V, I) in closed form:
//   [ cos(sqrt(V) t)            V^-1/2 sin(sqrt(V) t) ]
//   [ -sqrt(V) sin(sqrt(V) t)   cos(sqrt(V) t)        ]
// V must be symmetric positive definite.
MatrixXd exp_jq(const MatrixXd& V, double t);

NormBound norm_bound_A(const MechanicalSystem& sys);

// sup over [0, T] of ||exp(A t)|| estimated on a uniform grid with a local
// golden-section polish around the grid argmax. A lower estimate by nature.
double c_of_a(const MatrixXd& A, double T, int grid = 1024);
double c_of_a(const LinearODE& ode, int grid = 1024);

// Closed-form upper bound on C(A) for the block generator
// A = [[F1, F0], [F2, F3]], by case on which off-diagonal blocks vanish.
double c_of_a_bound(const MatrixXd& F0, const MatrixXd& F1,
                    const MatrixXd& F2, const MatrixXd& F3, double T,
                    int grid = 1024);

// Damped mechanical special case: kappa(diag(sqrt(V), sqrt(M))), valid for
// symmetric PSD damping and positive definite V.
double c_of_a_bound(const MechanicalSystem& sys);

}  // namespace quad::mechsys
