#include "quad/control.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "quad/linalg.hpp"

namespace quad::control {

namespace {

void check_symmetric(const MatrixXd& M, const char* name) {
  if ((M - M.transpose()).norm() > 1e-9 * std::max(1.0, M.norm())) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
}

void validate(const LQRProblem& prob) {
  const auto n = prob.F.rows();
  const auto p = prob.G.cols();
  if (prob.F.cols() != n || prob.G.rows() != n || prob.Q.rows() != n ||
      prob.Q.cols() != n || prob.R.rows() != p || prob.R.cols() != p ||
      prob.Pf.rows() != n || prob.Pf.cols() != n || prob.x0.size() != n) {
    fail(Errc::DimensionMismatch, "regulator blocks are inconsistent");
  }
  if (prob.tf < 0.0) throw std::invalid_argument("horizon must be >= 0");
  if ((prob.R - prob.R.transpose()).norm() >
      1e-9 * std::max(1.0, prob.R.norm())) {
    fail(Errc::SingularR, "input cost must be symmetric positive definite");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (prob.R + prob.R.transpose()));
  if (es.eigenvalues().minCoeff() <=
      1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    fail(Errc::SingularR, "input cost must be symmetric positive definite");
  }
  check_symmetric(prob.Q, "state cost");
  check_symmetric(prob.Pf, "terminal cost");
}

MatrixXd r_inv_gt(const LQRProblem& prob) {
  return prob.R.ldlt().solve(prob.G.transpose());
}

}  // namespace

riccati::RiccatiProblem reduce_to_riccati(const LQRProblem& prob) {
  validate(prob);
  riccati::RiccatiProblem rp;
  rp.F0 = -prob.Q;
  rp.F1 = -prob.F.transpose();
  rp.F2 = -prob.G * r_inv_gt(prob);
  rp.F3 = prob.F;
  rp.y0 = prob.Pf;
  rp.T = prob.tf;
  rp.convention = riccati::Convention::Minus;
  rp.mode = riccati::Mode::BVP;
  return rp;
}

LQRSolution solve_lqr(const LQRProblem& prob,
                      const odecore::SolverParams& params, bool two_pass,
                      int quad_refine) {
  if (quad_refine < 1) quad_refine = 1;
  riccati::RiccatiProblem rp = reduce_to_riccati(prob);
  const int n = static_cast<int>(prob.F.rows());

  LQRSolution sol;
  riccati::RiccatiTrace tr;
  if (!two_pass) {
    tr = riccati::solve_matrix(rp, params);
  } else {
    riccati::Linearized lin = riccati::linearize(rp);
    MatrixXd X0 = MatrixXd::Zero(2 * n, n);
    X0.topRows(n) = prob.Pf;
    X0.bottomRows(n) = MatrixXd::Identity(n, n);
    const odecore::HistoryState back = odecore::solve_history(
        -lin.A, MatrixXd(), X0, prob.tf, params);
    const MatrixXd u0 = back.steps.back().topRows(n);
    const MatrixXd v0 = back.steps.back().bottomRows(n);
    Eigen::JacobiSVD<MatrixXd> svd(v0);
    if (svd.singularValues().minCoeff() <=
        1e-12 * std::max(1.0, svd.singularValues().maxCoeff())) {
      fail(Errc::SingularV, "recovered initial denominator is singular");
    }
    const MatrixXd P0 =
        v0.transpose().partialPivLu().solve(u0.transpose()).transpose();
    riccati::RiccatiProblem fwd = rp;
    fwd.mode = riccati::Mode::IVP;
    fwd.y0 = P0;
    tr = riccati::solve_matrix(fwd, params);
    sol.round_trip_defect = (tr.y.back() - prob.Pf).norm();
  }

  sol.times = tr.times;
  sol.P = tr.y;
  sol.P0 = tr.y.front();
  const int m = static_cast<int>(sol.times.size()) - 1;

  const MatrixXd RinvGt = r_inv_gt(prob);
  sol.K.resize(m + 1);
  for (int i = 0; i <= m; ++i) sol.K[i] = RinvGt * sol.P[i];

  sol.x.resize(m + 1);
  sol.u.resize(m + 1);
  sol.x[0] = prob.x0;

  const auto running_cost = [&](const VectorXd& xv, const VectorXd& uv) {
    return uv.dot(prob.R * uv) + xv.dot(prob.Q * xv);
  };

  double integral = 0.0;
  for (int i = 0; i < m; ++i) {
    const double dt = sol.times[i + 1] - sol.times[i];
    const MatrixXd dK = sol.K[i + 1] - sol.K[i];
    const auto gain_at = [&](double s) -> MatrixXd {
      return dt > 0.0 ? MatrixXd(sol.K[i] + (s / dt) * dK) : sol.K[i];
    };
    const auto rhs = [&](double s, const VectorXd& xv) -> VectorXd {
      return prob.F * xv - prob.G * (gain_at(s) * xv);
    };
    VectorXd xv = sol.x[i];
    double c_prev = running_cost(xv, -(gain_at(0.0) * xv));
    const double hs = dt / quad_refine;
    for (int r = 0; r < quad_refine; ++r) {
      const double s = r * hs;
      const VectorXd k1 = rhs(s, xv);
      const VectorXd k2 = rhs(s + 0.5 * hs, xv + 0.5 * hs * k1);
      const VectorXd k3 = rhs(s + 0.5 * hs, xv + 0.5 * hs * k2);
      const VectorXd k4 = rhs(s + hs, xv + hs * k3);
      xv += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double c_next = running_cost(xv, -(gain_at(s + hs) * xv));
      integral += 0.5 * hs * (c_prev + c_next);
      c_prev = c_next;
    }
    sol.x[i + 1] = xv;
  }
  for (int i = 0; i <= m; ++i) sol.u[i] = -(sol.K[i] * sol.x[i]);

  sol.J = integral + sol.x[m].dot(prob.Pf * sol.x[m]);
  sol.value_identity_gap = std::abs(sol.J - prob.x0.dot(sol.P0 * prob.x0));
  return sol;
}

}  // namespace quad::control
