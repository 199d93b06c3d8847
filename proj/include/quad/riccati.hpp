#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "quad/errors.hpp"
#include "quad/odecore.hpp"

namespace quad::riccati {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sign convention for the quadratic and affine terms. Minus solves
//   y' = F0 + F1 y - y F2 y - y F3,
// the form the linearization below propagates; Plus negates F2 and F3 on
// input so y' = F0 + F1 y + y F2 y + y F3 can be posed directly.
enum class Convention { Minus, Plus };

enum class Mode { IVP, BVP };

// Matrix Riccati problem for y(t) of shape N x M. In BVP mode y0 is the
// value at T and the flow is integrated backwards. A nonzero offset w
// shifts the represented solution: the trace then follows y with
// y(0) = y0 + w.
struct RiccatiProblem {
  MatrixXd F0;  // N x M
  MatrixXd F1;  // N x N
  MatrixXd F2;  // M x N
  MatrixXd F3;  // M x M
  MatrixXd y0;  // N x M
  MatrixXd w;   // N x M, empty = zero
  double T = 0.0;
  Convention convention = Convention::Minus;
  Mode mode = Mode::IVP;
};

// y = (u + w) v^-1 under x' = A x + b with x = [u; v], A = [[F1, F0],
// [F2, F3]], x(0) = [y0; I], b = [F1 w; F2 w].
struct Linearized {
  MatrixXd A;   // (N+M) x (N+M)
  MatrixXd B;   // (N+M) x M, empty when w is zero
  MatrixXd X0;  // (N+M) x M
  double T = 0.0;
  int N = 0;
  int M = 0;
  bool initial_shift = false;  // true when w != 0, so y(0) = y0 + w
};

struct RiccatiTrace {
  std::vector<double> times;   // solver steps, ascending
  std::vector<MatrixXd> y;
  std::vector<double> sigma_min_v;
  double kappa_v = 1.0;        // max condition number of v along the grid
  bool singular_flag = false;
  MatrixXd y_final;
  bool initial_shift = false;
  double eps1 = 0.0;
  // error budget 2 eps1 (1 + 1/||y(T)|| + 1/||u(T) + w||)
  double soln_error_budget = std::numeric_limits<double>::quiet_NaN();
  // post-selection statistics; populated in vector mode only
  double p_success = std::numeric_limits<double>::quiet_NaN();
  double g = std::numeric_limits<double>::quiet_NaN();
  double p_bound = std::numeric_limits<double>::quiet_NaN();
  VectorXd y_hat_normalized;
};

Linearized linearize(const RiccatiProblem& prob);

// Single-column problems, with the full post-selection report.
RiccatiTrace solve_vector(const RiccatiProblem& prob,
                          const odecore::SolverParams& params);

// General matrix problems; v is inverted at every step.
RiccatiTrace solve_matrix(const RiccatiProblem& prob,
                          const odecore::SolverParams& params);

// Second-variation data for a Lagrangian on curves: blocks of the Hessian
// with respect to (q, qdot). Lqdotqdot must be positive definite and
// Lqqdot = Lqdotq^T.
struct JacobiSystem {
  MatrixXd Lqq;
  MatrixXd Lqqdot;
  MatrixXd Lqdotq;
  MatrixXd Lqdotqdot;
};

// Times in (a, b] where the accessory boundary problem degenerates, i.e.
// U(t) from W' = [[A, B], [C, -A^T]] W, U(a) = 0, V(a) = I loses rank.
// Found by a sign-change and singular-value scan over the grid with local
// refinement to 1e-8.
std::vector<double> conjugate_points(const JacobiSystem& sys, double a,
                                     double b, int grid = 512);

}  // namespace quad::riccati
