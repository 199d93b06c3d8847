#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "quad/control.hpp"

using namespace quad;
using namespace quad::control;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scalar(double v) {
  MatrixXd m(1, 1);
  m(0, 0) = v;
  return m;
}

MatrixXd random_mat(int r, int c, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

LQRProblem scalar_tanh_problem() {
  LQRProblem prob;
  prob.F = scalar(0.0);
  prob.G = scalar(1.0);
  prob.Q = scalar(1.0);
  prob.R = scalar(1.0);
  prob.Pf = scalar(0.0);
  prob.x0 = VectorXd::Ones(1);
  prob.tf = 2.0;
  return prob;
}

LQRProblem double_integrator() {
  LQRProblem prob;
  prob.F = MatrixXd::Zero(2, 2);
  prob.F(0, 1) = 1.0;
  prob.G = MatrixXd::Zero(2, 1);
  prob.G(1, 0) = 1.0;
  prob.Q = MatrixXd::Identity(2, 2);
  prob.R = scalar(1.0);
  prob.Pf = MatrixXd::Zero(2, 2);
  prob.x0 = VectorXd(2);
  prob.x0 << 1.0, -0.5;
  prob.tf = 5.0;
  return prob;
}

// value matrix at t = 0 by integrating the backward form of the value
// equation with a classical Runge-Kutta oracle
MatrixXd p0_oracle(const LQRProblem& prob, int steps) {
  const MatrixXd RinvGt = prob.R.ldlt().solve(prob.G.transpose());
  const auto rhs = [&](double, const MatrixXd& S) -> MatrixXd {
    return -(S * prob.G * RinvGt * S - S * prob.F -
             prob.F.transpose() * S - prob.Q);
  };
  return oracle::rk4m(rhs, prob.Pf, 0.0, prob.tf, steps);
}

// exact cost of a piecewise-constant control on a uniform segment grid
double piecewise_cost(const LQRProblem& prob, const std::vector<VectorXd>& u,
                      int fine) {
  const int segs = static_cast<int>(u.size());
  const double dt = prob.tf / segs;
  const double hs = dt / fine;
  VectorXd x = prob.x0;
  double integral = 0.0;
  for (int s = 0; s < segs; ++s) {
    const VectorXd& us = u[s];
    const auto rhs = [&](const VectorXd& xv) -> VectorXd {
      return prob.F * xv + prob.G * us;
    };
    double c_prev = us.dot(prob.R * us) + x.dot(prob.Q * x);
    for (int r = 0; r < fine; ++r) {
      const VectorXd k1 = rhs(x);
      const VectorXd k2 = rhs(x + 0.5 * hs * k1);
      const VectorXd k3 = rhs(x + 0.5 * hs * k2);
      const VectorXd k4 = rhs(x + hs * k3);
      x += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double c_next = us.dot(prob.R * us) + x.dot(prob.Q * x);
      integral += 0.5 * hs * (c_prev + c_next);
      c_prev = c_next;
    }
  }
  return integral + x.dot(prob.Pf * x);
}

}  // namespace

TEST_CASE("reduction reproduces the value equation right-hand side") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    LQRProblem prob;
    const int n = 3, p = 2;
    prob.F = random_mat(n, n, rng, 1.0);
    prob.G = random_mat(n, p, rng, 1.0);
    const MatrixXd C = random_mat(n, n, rng, 0.7);
    prob.Q = C.transpose() * C;
    const MatrixXd D = random_mat(p, p, rng, 0.7);
    prob.R = D.transpose() * D + 0.5 * MatrixXd::Identity(p, p);
    prob.Pf = MatrixXd::Zero(n, n);
    prob.x0 = VectorXd::Zero(n);
    prob.tf = 1.0;

    const riccati::RiccatiProblem rp = reduce_to_riccati(prob);
    CHECK(rp.mode == riccati::Mode::BVP);
    CHECK(rp.convention == riccati::Convention::Minus);
    CHECK((rp.y0 - prob.Pf).norm() == 0.0);

    const MatrixXd S = random_mat(n, n, rng, 1.0);
    const MatrixXd P = S + S.transpose();
    const MatrixXd lhs = rp.F0 + rp.F1 * P - P * rp.F2 * P - P * rp.F3;
    const MatrixXd ref = P * prob.G * prob.R.ldlt().solve(prob.G.transpose()) * P -
                         P * prob.F - prob.F.transpose() * P - prob.Q;
    CHECK((lhs - ref).norm() <= 1e-12 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("input cost must be symmetric positive definite") {
  LQRProblem prob = scalar_tanh_problem();
  prob.G = MatrixXd::Ones(1, 2);
  prob.R = MatrixXd::Identity(2, 2);
  prob.R(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(reduce_to_riccati(prob), Error);
  try {
    reduce_to_riccati(prob);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularR);
  }

  prob.R = MatrixXd::Ones(2, 2);  // rank one
  try {
    reduce_to_riccati(prob);
    FAIL("expected SingularR");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularR);
  }

  prob.R = MatrixXd::Identity(2, 2);
  prob.R(1, 1) = -1.0;  // indefinite
  try {
    reduce_to_riccati(prob);
    FAIL("expected SingularR");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularR);
  }
}

TEST_CASE("scalar benchmark follows tanh") {
  LQRProblem prob = scalar_tanh_problem();
  odecore::SolverParams params;
  params.epsilon = 1e-12;
  params.m = 1600;
  const LQRSolution sol = solve_lqr(prob, params);

  REQUIRE(sol.P.size() == 1601);
  CHECK((sol.P.back() - prob.Pf).norm() == 0.0);
  for (std::size_t i = 0; i < sol.P.size(); i += 100) {
    const double expect = std::tanh(prob.tf - sol.times[i]);
    CHECK(std::abs(sol.P[i](0, 0) - expect) <= 1e-9);
  }
  CHECK(std::abs(sol.J - std::tanh(2.0)) <= 1e-5);
  CHECK(sol.value_identity_gap <= 1e-4 * (1.0 + sol.J));
  CHECK(std::isnan(sol.round_trip_defect));

  // gain equals the value matrix here, and the control is its negative
  CHECK(std::abs(sol.K[0](0, 0) - sol.P0(0, 0)) <= 1e-15);
  CHECK(std::abs(sol.u[0](0) + sol.K[0](0, 0) * prob.x0(0)) <= 1e-15);
}

TEST_CASE("zero cost keeps the value matrix at zero") {
  std::mt19937_64 rng(11);
  LQRProblem prob;
  const int n = 3;
  prob.F = random_mat(n, n, rng, 0.6);
  prob.G = random_mat(n, 2, rng, 0.6);
  prob.Q = MatrixXd::Zero(n, n);
  prob.R = MatrixXd::Identity(2, 2);
  prob.Pf = MatrixXd::Zero(n, n);
  prob.x0 = VectorXd::Ones(n);
  prob.tf = 1.5;
  odecore::SolverParams params;
  params.epsilon = 1e-10;
  const LQRSolution sol = solve_lqr(prob, params);
  for (const MatrixXd& P : sol.P) CHECK(P.norm() <= 1e-13);
  for (const VectorXd& u : sol.u) CHECK(u.norm() <= 1e-13);
  CHECK(sol.J == 0.0);
}

TEST_CASE("double integrator benchmark") {
  LQRProblem prob = double_integrator();
  odecore::SolverParams params;
  params.epsilon = 1e-12;
  params.m = 2000;
  const LQRSolution sol = solve_lqr(prob, params);

  const MatrixXd P0_ref = p0_oracle(prob, 4000);
  CHECK((sol.P0 - P0_ref).norm() <= 1e-6);
  CHECK(sol.value_identity_gap <= 1e-5 * (1.0 + sol.J));

  // the closed loop beats twenty perturbed piecewise-constant controls
  const int segs = 40;
  const double dt = prob.tf / segs;
  std::vector<VectorXd> base(segs);
  for (int s = 0; s < segs; ++s) {
    const double mid = (s + 0.5) * dt;
    const auto idx = static_cast<std::size_t>(
        std::min<double>(sol.times.size() - 1.0,
                         std::round(mid / prob.tf * (sol.times.size() - 1))));
    base[s] = sol.u[idx];
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> bump(-0.25, 0.25);
  for (int sample = 0; sample < 20; ++sample) {
    std::vector<VectorXd> pert = base;
    for (auto& u : pert) u.array() += bump(rng);
    const double cost = piecewise_cost(prob, pert, 25);
    CHECK(sol.J <= cost);
  }
}

TEST_CASE("value matrix stays symmetric positive semidefinite") {
  std::mt19937_64 rng(31);
  odecore::SolverParams params;
  params.epsilon = 1e-12;
  params.m = 800;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int p = 1 + static_cast<int>(rng() % 2);
    LQRProblem prob;
    prob.F = random_mat(n, n, rng, 0.5);
    prob.G = random_mat(n, p, rng, 0.8);
    const MatrixXd C = random_mat(n, n, rng, 0.5);
    prob.Q = C.transpose() * C;
    const MatrixXd D = random_mat(p, p, rng, 0.5);
    prob.R = D.transpose() * D + 0.5 * MatrixXd::Identity(p, p);
    const MatrixXd E = random_mat(n, n, rng, 0.4);
    prob.Pf = E.transpose() * E;
    prob.x0 = random_mat(n, 1, rng, 1.0);
    prob.tf = 1.5;

    const LQRSolution sol = solve_lqr(prob, params);
    CHECK((sol.P.back() - prob.Pf).norm() == 0.0);
    CHECK(sol.value_identity_gap <= 1e-4 * (1.0 + sol.J));
    for (const MatrixXd& P : sol.P) {
      CHECK((P - P.transpose()).norm() <= 1e-9 * std::max(1.0, P.norm()));
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (P + P.transpose()));
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("two-pass boundary handling returns to the terminal value") {
  LQRProblem prob = scalar_tanh_problem();
  odecore::SolverParams params;
  params.epsilon = 1e-12;
  params.m = 1600;
  const LQRSolution direct = solve_lqr(prob, params);
  const LQRSolution two = solve_lqr(prob, params, true);
  CHECK(two.round_trip_defect <= 1e-5);
  CHECK((two.P0 - direct.P0).norm() <= 1e-8);
  CHECK(std::abs(two.J - direct.J) <= 1e-8);

  LQRProblem di = double_integrator();
  odecore::SolverParams p2;
  p2.epsilon = 1e-12;
  p2.m = 2000;
  const LQRSolution two_di = solve_lqr(di, p2, true);
  CHECK(two_di.round_trip_defect <= 1e-5);
  CHECK(two_di.value_identity_gap <= 1e-4 * (1.0 + two_di.J));
}

TEST_CASE("quadrature refinement changes the cost only slightly") {
  LQRProblem prob = double_integrator();
  odecore::SolverParams params;
  params.epsilon = 1e-10;
  params.m = 400;
  const LQRSolution coarse = solve_lqr(prob, params, false, 1);
  const LQRSolution fine = solve_lqr(prob, params, false, 4);
  CHECK(std::abs(coarse.J - fine.J) <= 1e-4 * (1.0 + fine.J));
  CHECK(fine.value_identity_gap <= coarse.value_identity_gap + 1e-6);
}
