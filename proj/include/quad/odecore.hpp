#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "quad/errors.hpp"
#include "quad/mechsys.hpp"

namespace quad::odecore {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using mechsys::Basis;
using mechsys::LinearODE;
using mechsys::MechanicalSystem;

enum class Noise { Worst, Random };

// Requested solver configuration. Unset fields are resolved from the
// problem: m defaults to max(1, ceil(T ||A||)), h to T/m, and k to the
// smallest order with m e^3 / (k+1)! <= epsilon.
struct SolverParams {
  double epsilon = 1e-8;   // target relative accuracy, must lie in (0, 1)
  std::optional<double> h;
  std::optional<int> m;
  std::optional<int> k;
  double gamma = 0.0;      // multiplicative readout noise level, in [0, 1)
  Noise noise = Noise::Worst;
  std::uint64_t seed = 0;
};

struct ResolvedParams {
  double epsilon = 0.0;
  double h = 0.0;
  int m = 0;
  int k = 0;
  double gamma = 0.0;
  Noise noise = Noise::Worst;
  std::uint64_t seed = 0;
  double anorm = 0.0;  // operator norm used to resolve the step size
};

// Step history x_0 .. x_m. Steps are matrices so vector and matrix
// right-hand sides share one type; vector problems have a single column.
// total_norm is taken over the padded register, where the final step is
// repeated m times. When explicit h and m are supplied the history ends at
// time m h, which may exceed T.
struct HistoryState {
  std::vector<MatrixXd> steps;
  ResolvedParams params;
  double total_norm = 0.0;
  // max relative gap between the recurrence and the assembled linear-system
  // solve; NaN when the system was too large to assemble
  double dual_path_delta = std::numeric_limits<double>::quiet_NaN();
  bool l_assembled = false;
};

// The lower-triangular one-shot system whose solution holds every Taylor
// level of every step, followed by m padding copies of the final state.
struct LSystem {
  int n = 0;
  int m = 0;
  int k = 0;
  Eigen::SparseMatrix<double> L;
  MatrixXd z_in;
  double kappa = std::numeric_limits<double>::quiet_NaN();
};

struct SuccessReport {
  double p = 0.0;      // post-selection success probability
  double g = 0.0;      // max_i ||u_i||^2 / ||u_m||^2 over the history
  double bound = 0.0;  // 1 / (108 g^2)
};

struct KineticReport {
  double K_hat = 0.0;   // noisy readout (1 + delta)^2 K_num
  double K_num = 0.0;   // kinetic energy of the numeric final state
  double K_true = 0.0;  // kinetic energy of the exact flow at the same time
  double K_max = 0.0;   // m_max ||qdot(T)||^2
  double delta = 0.0;
  double eps1 = 0.0;    // m e^3 / (k+1)!
  // bound assuming the velocity error is eps1-relative to ||qdot(T)||
  double chain_bound = 0.0;
  // unconditional bound built from the measured velocity error
  double cert_bound = 0.0;
};

struct HardnessReport {
  double gap = 0.0;    // |K - K_R| / E
  double bound = 0.0;  // 2 ||R|| t (1 + ||R|| t / 2)
  double K = 0.0;
  double K_R = 0.0;
  double E = 0.0;
  double normR = 0.0;
};

struct ReverseReport {
  VectorXd x0;
  double round_trip_defect = 0.0;
  double budget = 0.0;  // 10x the one-way truncation bound
};

ResolvedParams resolve(const MatrixXd& A, double T, const SolverParams& params);

// m e^3 / (k+1)!
double eps1(const ResolvedParams& rp);
double error_bound(const ResolvedParams& rp, double sup_norm);

// Truncated-Taylor stepping. Every step applies the order-k propagator and
// the matching inhomogeneous term; when the one-shot system is small enough
// (m (k+1) n <= 20000) it is assembled and solved as well and the two paths
// are compared.
HistoryState solve_history(const LinearODE& ode, const SolverParams& params);
HistoryState solve_history(const MatrixXd& A, const MatrixXd& B,
                           const MatrixXd& X0, double T,
                           const SolverParams& params);

LSystem assemble_l(const LinearODE& ode, const SolverParams& params);
LSystem assemble_l(const MatrixXd& A, const MatrixXd& B, const MatrixXd& X0,
                   double T, const SolverParams& params);

// Exact 2-norm condition number (dense SVD; desk sizes only). Fills and
// returns sys.kappa.
double kappa_l(LSystem& sys);

// Post-selection statistics over the padded history. projector lists the
// retained coordinates (empty = all); w is an optional offset added to
// every slot before projecting (empty = zero).
SuccessReport success_probability(const HistoryState& hist,
                                  const std::vector<int>& projector,
                                  const VectorXd& w = VectorXd());

// Kinetic-energy readout of the final step in the given basis, with
// multiplicative noise of level gamma taken from the history's params
// (worst case or seeded uniform). The exact flow provides the reference.
KineticReport estimate_kinetic(const MechanicalSystem& sys, Basis basis,
                               const HistoryState& hist);

// Damping sensitivity of the kinetic energy for a unit-mass system:
// relative gap at time t between the undamped and damped flows, against
// the closed-form perturbation bound.
HardnessReport hardness_gap(const MechanicalSystem& sys, double t);

// Integrate x' = -A x - b from xf back to t = 0, then forward again;
// reports the recovered initial state and the round-trip defect.
ReverseReport reverse_evolve(const LinearODE& ode, const VectorXd& xf,
                             const SolverParams& params);

}  // namespace quad::odecore
