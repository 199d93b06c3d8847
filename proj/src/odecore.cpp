#include "quad/odecore.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <random>

#include "quad/linalg.hpp"

namespace quad::odecore {

namespace {

constexpr double kOverflow = 1e300;

int pick_order(int m, double epsilon) {
  const double target = static_cast<double>(m) * std::exp(3.0) / epsilon;
  double fact = 2.0;  // (k+1)! for k = 1
  int k = 1;
  while (fact < target && k < 200) {
    ++k;
    fact *= (k + 1);
  }
  return k;
}

// order-k Taylor propagator T_k(Ah) and source weight S_k(Ah) with
// x_{i+1} = T_k x_i + S_k (h b)
void taylor_pair(const MatrixXd& Ah, int k, MatrixXd& Tk, MatrixXd& Sk) {
  const int n = static_cast<int>(Ah.rows());
  Tk = MatrixXd::Identity(n, n);
  Sk = MatrixXd::Zero(n, n);
  MatrixXd pw = MatrixXd::Identity(n, n);  // (Ah)^{j-1} inside the loop
  double fact = 1.0;
  for (int j = 1; j <= k; ++j) {
    fact *= j;
    Sk += pw / fact;
    pw = Ah * pw;
    Tk += pw / fact;
  }
}

double padded_norm(const std::vector<MatrixXd>& steps) {
  const int m = static_cast<int>(steps.size()) - 1;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += steps[i].squaredNorm();
  s += m * steps[m].squaredNorm();
  return std::sqrt(s);
}

std::vector<MatrixXd> run_recurrence(const MatrixXd& A, const MatrixXd& B,
                                     const MatrixXd& X0,
                                     const ResolvedParams& rp) {
  MatrixXd Tk, Sk;
  taylor_pair(A * rp.h, rp.k, Tk, Sk);
  const bool forced = B.size() != 0;
  std::vector<MatrixXd> steps;
  steps.reserve(rp.m + 1);
  steps.push_back(X0);
  for (int i = 0; i < rp.m; ++i) {
    MatrixXd next = Tk * steps.back();
    if (forced) next += Sk * (rp.h * B);
    if (!next.allFinite() || next.norm() > kOverflow) {
      fail(Errc::StepOverflow, "state norm exceeded the overflow guard");
    }
    steps.push_back(std::move(next));
  }
  return steps;
}

LSystem build_l(const MatrixXd& A, const MatrixXd& B, const MatrixXd& X0,
                const ResolvedParams& rp) {
  const int n = static_cast<int>(A.rows());
  const int m = rp.m;
  const int k = rp.k;
  const int cols = static_cast<int>(X0.cols());
  const int blocks = m * (k + 1) + m;  // Taylor levels plus padding copies
  const auto lvl = [&](int i, int j) { return (i * (k + 1) + j) * n; };
  const auto pad = [&](int p) { return (m * (k + 1) + p) * n; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(blocks) * n +
               static_cast<size_t>(m * k) * n * n +
               static_cast<size_t>(m + 1) * (k + 1) * n);
  MatrixXd Zin = MatrixXd::Zero(blocks * n, cols);

  for (int r = 0; r < blocks * n; ++r) trip.emplace_back(r, r, 1.0);

  Zin.block(lvl(0, 0), 0, n, cols) = X0;
  for (int i = 0; i < m; ++i) {
    for (int j = 1; j <= k; ++j) {
      const double w = -rp.h / j;
      for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) {
          if (A(r, c) != 0.0) {
            trip.emplace_back(lvl(i, j) + r, lvl(i, j - 1) + c, w * A(r, c));
          }
        }
      }
      if (j == 1 && B.size() != 0) {
        Zin.block(lvl(i, 1), 0, n, cols) = rp.h * B;
      }
    }
    if (i > 0) {
      for (int j = 0; j <= k; ++j) {
        for (int r = 0; r < n; ++r) {
          trip.emplace_back(lvl(i, 0) + r, lvl(i - 1, j) + r, -1.0);
        }
      }
    }
  }
  for (int j = 0; j <= k; ++j) {
    for (int r = 0; r < n; ++r) {
      trip.emplace_back(pad(0) + r, lvl(m - 1, j) + r, -1.0);
    }
  }
  for (int p = 1; p < m; ++p) {
    for (int r = 0; r < n; ++r) {
      trip.emplace_back(pad(p) + r, pad(p - 1) + r, -1.0);
    }
  }

  LSystem sys;
  sys.n = n;
  sys.m = m;
  sys.k = k;
  sys.L.resize(blocks * n, blocks * n);
  sys.L.setFromTriplets(trip.begin(), trip.end());
  sys.L.makeCompressed();
  sys.z_in = std::move(Zin);
  return sys;
}

std::vector<MatrixXd> solve_l(const LSystem& sys) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(sys.L);
  lu.factorize(sys.L);
  if (lu.info() != Eigen::Success) {
    fail(Errc::SingularL, "one-shot system factorization failed");
  }
  const MatrixXd Z = lu.solve(sys.z_in);
  const int n = sys.n;
  const int k = sys.k;
  std::vector<MatrixXd> steps;
  steps.reserve(sys.m + 1);
  for (int i = 0; i < sys.m; ++i) {
    steps.push_back(Z.block(i * (k + 1) * n, 0, n, sys.z_in.cols()));
  }
  steps.push_back(Z.block(sys.m * (k + 1) * n, 0, n, sys.z_in.cols()));
  return steps;
}

MatrixXd forcing_matrix(const LinearODE& ode) {
  if (ode.b.size() == 0) return MatrixXd();
  return ode.b;
}

}  // namespace

ResolvedParams resolve(const MatrixXd& A, double T, const SolverParams& params) {
  if (!(params.epsilon > 0.0) || !(params.epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  }
  if (!(params.gamma >= 0.0) || !(params.gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1)");
  }
  if (T < 0.0) throw std::invalid_argument("T must be nonnegative");
  ResolvedParams rp;
  rp.epsilon = params.epsilon;
  rp.gamma = params.gamma;
  rp.noise = params.noise;
  rp.seed = params.seed;
  rp.anorm = linalg::spectral_norm(A);
  if (params.h && !(*params.h > 0.0)) {
    throw std::invalid_argument("h must be positive");
  }
  if (params.m && *params.m < 1) {
    throw std::invalid_argument("m must be at least 1");
  }
  if (params.h && params.m) {
    rp.h = *params.h;
    rp.m = *params.m;
  } else if (params.h) {
    rp.h = *params.h;
    rp.m = std::max(1, static_cast<int>(std::ceil(T / rp.h - 1e-12)));
  } else {
    rp.m = params.m ? *params.m
                    : std::max(1, static_cast<int>(std::ceil(T * rp.anorm - 1e-12)));
    rp.h = T / rp.m;
  }
  if (rp.h * rp.m < T - 1e-12) {
    throw std::invalid_argument("h m must cover the horizon T");
  }
  if (params.k) {
    if (*params.k < 1) throw std::invalid_argument("k must be at least 1");
    rp.k = *params.k;
  } else {
    rp.k = pick_order(rp.m, rp.epsilon);
  }
  return rp;
}

double eps1(const ResolvedParams& rp) {
  return std::exp(std::log(static_cast<double>(rp.m)) + 3.0 -
                  std::lgamma(rp.k + 2.0));
}

double error_bound(const ResolvedParams& rp, double sup_norm) {
  return eps1(rp) * sup_norm;
}

HistoryState solve_history(const MatrixXd& A, const MatrixXd& B,
                           const MatrixXd& X0, double T,
                           const SolverParams& params) {
  if (A.rows() != A.cols()) fail(Errc::DimensionMismatch, "A must be square");
  if (X0.rows() != A.rows()) {
    fail(Errc::DimensionMismatch, "initial state size must match A");
  }
  if (B.size() != 0 && (B.rows() != A.rows() || B.cols() != X0.cols())) {
    fail(Errc::DimensionMismatch, "forcing shape must match the state");
  }
  HistoryState hist;
  hist.params = resolve(A, T, params);
  hist.steps = run_recurrence(A, B, X0, hist.params);
  hist.total_norm = padded_norm(hist.steps);

  const long long gate = static_cast<long long>(hist.params.m) *
                         (hist.params.k + 1) * A.rows();
  if (gate <= 20000) {
    LSystem sys = build_l(A, B, X0, hist.params);
    const std::vector<MatrixXd> via_l = solve_l(sys);
    double delta = 0.0;
    for (size_t i = 0; i < hist.steps.size(); ++i) {
      const double ref = std::max(1.0, hist.steps[i].norm());
      delta = std::max(delta, (via_l[i] - hist.steps[i]).norm() / ref);
    }
    hist.dual_path_delta = delta;
    hist.l_assembled = true;
  }
  return hist;
}

HistoryState solve_history(const LinearODE& ode, const SolverParams& params) {
  if (ode.x0.size() == 0) {
    throw std::invalid_argument("initial state is not attached");
  }
  return solve_history(ode.A, forcing_matrix(ode), ode.x0, ode.T, params);
}

LSystem assemble_l(const MatrixXd& A, const MatrixXd& B, const MatrixXd& X0,
                   double T, const SolverParams& params) {
  return build_l(A, B, X0, resolve(A, T, params));
}

LSystem assemble_l(const LinearODE& ode, const SolverParams& params) {
  if (ode.x0.size() == 0) {
    throw std::invalid_argument("initial state is not attached");
  }
  return assemble_l(ode.A, forcing_matrix(ode), ode.x0, ode.T, params);
}

double kappa_l(LSystem& sys) {
  const MatrixXd dense = MatrixXd(sys.L);
  Eigen::BDCSVD<MatrixXd> svd(dense);
  const auto& sv = svd.singularValues();
  sys.kappa = sv(0) / sv(sv.size() - 1);
  return sys.kappa;
}

SuccessReport success_probability(const HistoryState& hist,
                                  const std::vector<int>& projector,
                                  const VectorXd& w) {
  const int m = static_cast<int>(hist.steps.size()) - 1;
  const int n = static_cast<int>(hist.steps[0].rows());
  if (hist.steps[0].cols() != 1) {
    throw std::invalid_argument("post-selection statistics need a vector history");
  }
  if (w.size() != 0 && w.size() != n) {
    fail(Errc::DimensionMismatch, "offset w must match the state size");
  }
  const VectorXd shift = w.size() ? w : VectorXd::Zero(n);
  std::vector<int> idx = projector;
  if (idx.empty()) {
    idx.resize(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
  }
  for (int i : idx) {
    if (i < 0 || i >= n) fail(Errc::DimensionMismatch, "projector index out of range");
  }
  const auto proj_sq = [&](const VectorXd& v) {
    double s = 0.0;
    for (int i : idx) s += v(i) * v(i);
    return s;
  };

  const double um_sq = proj_sq(hist.steps[m].col(0) + shift);
  if (um_sq <= 0.0) {
    fail(Errc::ZeroFinalState, "projected final state vanishes");
  }
  double zsq = 0.0;
  for (int i = 1; i <= m; ++i) zsq += hist.steps[i].squaredNorm();
  zsq += m * (hist.steps[m].col(0) + shift).squaredNorm();

  double g = 1.0;
  for (int i = 0; i <= m; ++i) {
    g = std::max(g, proj_sq(hist.steps[i].col(0) + shift) / um_sq);
  }
  SuccessReport rep;
  rep.p = m * um_sq / zsq;
  rep.g = g;
  rep.bound = 1.0 / (108.0 * g * g);
  return rep;
}

namespace {

double kinetic_from_state(const MechanicalSystem& sys, Basis basis,
                          const VectorXd& x) {
  const int d = sys.d;
  switch (basis) {
    case Basis::X: {
      const VectorXd v = x.tail(d);
      return 0.5 * v.dot(sys.masses.cwiseProduct(v));
    }
    case Basis::Z: {
      const VectorXd p = x.tail(d);
      return 0.5 * p.dot(p.cwiseQuotient(sys.masses));
    }
    case Basis::Y:
    case Basis::YTilde:
      return 0.5 * x.tail(d).squaredNorm();
  }
  throw std::logic_error("unreachable");
}

}  // namespace

KineticReport estimate_kinetic(const MechanicalSystem& sys, Basis basis,
                               const HistoryState& hist) {
  const int d = sys.d;
  const int expected =
      basis == Basis::YTilde ? d * (d + 1) / 2 + d : 2 * d;
  if (hist.steps[0].cols() != 1) {
    throw std::invalid_argument("kinetic readout needs a vector history");
  }
  if (hist.steps[0].rows() != expected) {
    fail(Errc::NoVelocityBlock,
         "history dimension does not expose a velocity block in this basis");
  }
  KineticReport rep;
  const VectorXd xN = hist.steps.back().col(0);
  rep.K_num = kinetic_from_state(sys, basis, xN);

  const ResolvedParams& rp = hist.params;
  if (rp.noise == Noise::Worst) {
    rep.delta = rp.gamma;
  } else {
    std::mt19937_64 rng(rp.seed);
    std::uniform_real_distribution<double> u(-rp.gamma, rp.gamma);
    rep.delta = u(rng);
  }
  rep.K_hat = (1.0 + rep.delta) * (1.0 + rep.delta) * rep.K_num;

  LinearODE ode = mechsys::assemble(sys, basis);
  const double horizon = rp.m * rp.h;
  const VectorXd exact =
      linalg::flow(ode.A, ode.b.size() ? VectorXd(ode.b) : VectorXd(),
                   hist.steps[0].col(0), horizon);
  rep.K_true = kinetic_from_state(sys, basis, exact);
  const VectorXd qdot = mechsys::recover_state(sys, basis, exact).qdot;
  const double mmax = sys.masses.maxCoeff();
  rep.K_max = mmax * qdot.squaredNorm();
  rep.eps1 = eps1(rp);

  const double gam = rp.gamma;
  const double noise_term = gam * (2.0 + gam);
  const double amp = 1.0 + noise_term;
  rep.chain_bound = 0.5 * amp * mmax * rep.eps1 * (2.0 + rep.eps1) *
                        qdot.squaredNorm() +
                    0.5 * noise_term * qdot.dot(sys.masses.cwiseProduct(qdot));

  const VectorXd qdot_num = mechsys::recover_state(sys, basis, xN).qdot;
  const double verr = (qdot_num - qdot).norm();
  rep.cert_bound = 0.5 * amp * mmax * verr * (2.0 * qdot.norm() + verr) +
                   0.5 * noise_term * qdot.dot(sys.masses.cwiseProduct(qdot));
  return rep;
}

HardnessReport hardness_gap(const MechanicalSystem& sys, double t) {
  const int d = sys.d;
  for (int i = 0; i < d; ++i) {
    if (std::abs(sys.masses(i) - 1.0) > 1e-12) {
      fail(Errc::NonUnitMasses, "damping sensitivity needs unit masses");
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (sys.damping + sys.damping.transpose()));
  if (es.eigenvalues().minCoeff() <
      -1e-12 * std::max(1.0, sys.damping.norm())) {
    fail(Errc::NotPositiveDefinite, "damping must be positive semidefinite");
  }

  VectorXd q0 = VectorXd::Zero(d);
  VectorXd qd0 = VectorXd::Zero(d);
  qd0(0) = 1.0;
  if (d > 1) qd0(1) = -1.0;
  const double E = 0.5 * qd0.squaredNorm();

  VectorXd z0(2 * d);
  z0 << q0, qd0;
  const VectorXd zu = mechsys::exp_jq(sys.potential, t) * z0;

  MatrixXd Ad = MatrixXd::Zero(2 * d, 2 * d);
  Ad.topRightCorner(d, d) = MatrixXd::Identity(d, d);
  Ad.bottomLeftCorner(d, d) = -sys.potential;
  Ad.bottomRightCorner(d, d) = -sys.damping;
  const VectorXd zd = linalg::expm(Ad * t) * z0;

  HardnessReport rep;
  rep.K = 0.5 * zu.tail(d).squaredNorm();
  rep.K_R = 0.5 * zd.tail(d).squaredNorm();
  rep.E = E;
  rep.gap = std::abs(rep.K - rep.K_R) / E;
  rep.normR = linalg::spectral_norm(sys.damping);
  rep.bound = 2.0 * rep.normR * t * (1.0 + 0.5 * rep.normR * t);
  return rep;
}

ReverseReport reverse_evolve(const LinearODE& ode, const VectorXd& xf,
                             const SolverParams& params) {
  LinearODE back;
  back.A = -ode.A;
  back.b = ode.b.size() ? VectorXd(-ode.b) : VectorXd();
  back.x0 = xf;
  back.T = ode.T;
  const HistoryState rev = solve_history(back, params);

  LinearODE fwd = ode;
  fwd.x0 = rev.steps.back().col(0);
  const HistoryState again = solve_history(fwd, params);

  double sup = 0.0;
  for (const auto& s : rev.steps) sup = std::max(sup, s.norm());
  for (const auto& s : again.steps) sup = std::max(sup, s.norm());

  ReverseReport rep;
  rep.x0 = rev.steps.back().col(0);
  rep.round_trip_defect = (again.steps.back().col(0) - xf).norm();
  rep.budget = 10.0 * error_bound(rev.params, sup);
  return rep;
}

}  // namespace quad::odecore
