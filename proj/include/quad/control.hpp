#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "quad/errors.hpp"
#include "quad/odecore.hpp"
#include "quad/riccati.hpp"

namespace quad::control {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Finite-horizon regulator for xdot = F x + G u with running cost
// u^T R u + x^T Q x and terminal cost x(tf)^T Pf x(tf). Coefficients are
// time-invariant.
struct LQRProblem {
  MatrixXd F;   // n x n
  MatrixXd G;   // n x p
  MatrixXd Q;   // n x n, symmetric PSD
  MatrixXd R;   // p x p, symmetric PD
  MatrixXd Pf;  // n x n, symmetric PSD
  VectorXd x0;  // n
  double tf = 0.0;
};

struct LQRSolution {
  std::vector<double> times;
  std::vector<MatrixXd> P;   // value matrix, P.back() at tf
  std::vector<MatrixXd> K;   // feedback gain R^-1 G^T P
  std::vector<VectorXd> x;   // closed-loop state
  std::vector<VectorXd> u;   // applied control -K x
  MatrixXd P0;               // P.front()
  double J = 0.0;
  double value_identity_gap = 0.0;  // |J - x0^T P0 x0|
  // two-pass mode only: distance of the re-integrated terminal value from Pf
  double round_trip_defect = std::numeric_limits<double>::quiet_NaN();
};

// Boundary-value matrix Riccati problem whose minus-convention right-hand
// side equals Pdot = P G R^-1 G^T P - P F - F^T P - Q, with y(tf) = Pf.
riccati::RiccatiProblem reduce_to_riccati(const LQRProblem& prob);

// Solves the value matrix backwards over [0, tf], then forward-simulates the
// closed loop xdot = (F - G K(t)) x from x0 and evaluates the cost with
// trapezoidal quadrature on the solver grid (each interval split into
// quad_refine Runge-Kutta substeps, gain interpolated linearly).
//
// two_pass replays the boundary handling explicitly: the linearized flow is
// run backwards from [Pf; I], the recovered P(0) seeds a forward
// initial-value solve, and round_trip_defect records ||P(tf) - Pf||.
LQRSolution solve_lqr(const LQRProblem& prob,
                      const odecore::SolverParams& params,
                      bool two_pass = false, int quad_refine = 1);

}  // namespace quad::control
