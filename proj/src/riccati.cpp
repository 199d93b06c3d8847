#include "quad/riccati.hpp"

#include <algorithm>
#include <cmath>

#include "quad/linalg.hpp"

namespace quad::riccati {

namespace {

constexpr double kSingularRel = 1e-10;

void check_shapes(const RiccatiProblem& p, int& N, int& M) {
  N = static_cast<int>(p.y0.rows());
  M = static_cast<int>(p.y0.cols());
  if (N < 1 || M < 1) fail(Errc::DimensionMismatch, "y0 must be nonempty");
  if (p.F0.rows() != N || p.F0.cols() != M) {
    fail(Errc::DimensionMismatch, "F0 must be N x M");
  }
  if (p.F1.rows() != N || p.F1.cols() != N) {
    fail(Errc::DimensionMismatch, "F1 must be N x N");
  }
  if (p.F2.rows() != M || p.F2.cols() != N) {
    fail(Errc::DimensionMismatch, "F2 must be M x N");
  }
  if (p.F3.rows() != M || p.F3.cols() != M) {
    fail(Errc::DimensionMismatch, "F3 must be M x M");
  }
  if (p.w.size() != 0 && (p.w.rows() != N || p.w.cols() != M)) {
    fail(Errc::DimensionMismatch, "w must be N x M");
  }
}

}  // namespace

Linearized linearize(const RiccatiProblem& prob) {
  int N = 0, M = 0;
  check_shapes(prob, N, M);
  MatrixXd F2 = prob.F2;
  MatrixXd F3 = prob.F3;
  if (prob.convention == Convention::Plus) {
    F2 = -F2;
    F3 = -F3;
  }
  Linearized lin;
  lin.N = N;
  lin.M = M;
  lin.T = prob.T;
  lin.A = MatrixXd::Zero(N + M, N + M);
  lin.A.topLeftCorner(N, N) = prob.F1;
  lin.A.topRightCorner(N, M) = prob.F0;
  lin.A.bottomLeftCorner(M, N) = F2;
  lin.A.bottomRightCorner(M, M) = F3;
  lin.X0 = MatrixXd::Zero(N + M, M);
  lin.X0.topRows(N) = prob.y0;
  lin.X0.bottomRows(M) = MatrixXd::Identity(M, M);
  if (prob.w.size() != 0 && prob.w.norm() != 0.0) {
    lin.B = MatrixXd::Zero(N + M, M);
    lin.B.topRows(N) = prob.F1 * prob.w;
    lin.B.bottomRows(M) = F2 * prob.w;
    lin.initial_shift = true;
  }
  return lin;
}

namespace {

MatrixXd problem_w(const RiccatiProblem& prob) {
  if (prob.w.size() == 0) {
    return MatrixXd::Zero(prob.y0.rows(), prob.y0.cols());
  }
  return prob.w;
}

RiccatiTrace solve_common(const RiccatiProblem& prob,
                          const odecore::SolverParams& params, bool vector_mode) {
  Linearized lin = linearize(prob);
  if (vector_mode && lin.M != 1) {
    fail(Errc::DimensionMismatch, "vector solve needs a single column");
  }
  MatrixXd A = lin.A;
  MatrixXd B = lin.B;
  if (prob.mode == Mode::BVP) {
    A = -A;
    if (B.size()) B = -B;
  }
  odecore::HistoryState hist = odecore::solve_history(A, B, lin.X0, lin.T, params);
  const int m = hist.params.m;
  const double h = hist.params.h;
  const MatrixXd W = problem_w(prob);

  RiccatiTrace tr;
  tr.initial_shift = lin.initial_shift;
  tr.eps1 = odecore::eps1(hist.params);
  tr.times.resize(m + 1);
  tr.y.resize(m + 1);
  tr.sigma_min_v.resize(m + 1);

  std::vector<MatrixXd> u(m + 1), v(m + 1);
  double sigma_scale = 0.0;
  for (int i = 0; i <= m; ++i) {
    const MatrixXd& x = hist.steps[i];
    u[i] = x.topRows(lin.N) + W;
    v[i] = x.bottomRows(lin.M);
    Eigen::JacobiSVD<MatrixXd> svd(v[i]);
    tr.sigma_min_v[i] = svd.singularValues().minCoeff();
    sigma_scale = std::max(sigma_scale, svd.singularValues().maxCoeff());
    tr.times[i] = i * h;
  }
  double kv = 1.0;
  for (int i = 0; i <= m; ++i) {
    if (tr.sigma_min_v[i] <= kSingularRel * sigma_scale) {
      tr.singular_flag = true;
      fail(Errc::SingularV,
           "denominator became singular along the trajectory");
    }
    kv = std::max(kv, linalg::cond2(v[i]));
    // y = u v^-1, i.e. y^T solves v^T y^T = u^T
    tr.y[i] =
        v[i].transpose().partialPivLu().solve(u[i].transpose()).transpose();
  }
  tr.kappa_v = kv;

  if (prob.mode == Mode::BVP) {
    // the uniform time grid maps onto itself under reversal
    std::reverse(tr.y.begin(), tr.y.end());
    std::reverse(tr.sigma_min_v.begin(), tr.sigma_min_v.end());
  }
  tr.y_final = tr.y.back();

  // budget is anchored at the end of the integration run
  const double ynorm =
      (prob.mode == Mode::BVP ? tr.y.front() : tr.y.back()).norm();
  const double unorm = u.back().norm();
  tr.soln_error_budget =
      2.0 * tr.eps1 *
      (1.0 + 1.0 / std::max(ynorm, 1e-300) + 1.0 / std::max(unorm, 1e-300));

  if (vector_mode) {
    std::vector<int> proj(lin.N);
    for (int i = 0; i < lin.N; ++i) proj[i] = i;
    VectorXd w_ext = VectorXd::Zero(lin.N + 1);
    w_ext.head(lin.N) = W.col(0);
    const odecore::SuccessReport sr =
        odecore::success_probability(hist, proj, w_ext);
    tr.p_success = sr.p;
    tr.g = sr.g;
    tr.p_bound = sr.bound;
    VectorXd proj_final = u.back().col(0);
    tr.y_hat_normalized = proj_final / proj_final.norm();
  }
  return tr;
}

}  // namespace

RiccatiTrace solve_vector(const RiccatiProblem& prob,
                          const odecore::SolverParams& params) {
  return solve_common(prob, params, true);
}

RiccatiTrace solve_matrix(const RiccatiProblem& prob,
                          const odecore::SolverParams& params) {
  return solve_common(prob, params, false);
}

std::vector<double> conjugate_points(const JacobiSystem& sys, double a,
                                     double b, int grid) {
  const int d = static_cast<int>(sys.Lqdotqdot.rows());
  if (sys.Lqq.rows() != d || sys.Lqq.cols() != d ||
      sys.Lqqdot.rows() != d || sys.Lqqdot.cols() != d ||
      sys.Lqdotq.rows() != d || sys.Lqdotq.cols() != d ||
      sys.Lqdotqdot.cols() != d) {
    fail(Errc::DimensionMismatch, "Hessian blocks must all be d x d");
  }
  if ((sys.Lqqdot - sys.Lqdotq.transpose()).norm() >
      1e-9 * std::max(1.0, sys.Lqdotq.norm())) {
    throw std::invalid_argument("Lqqdot must equal Lqdotq transposed");
  }
  if (b <= a) throw std::invalid_argument("need a < b");
  if (grid < 8) grid = 8;

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (sys.Lqdotqdot + sys.Lqdotqdot.transpose()));
  if ((sys.Lqdotqdot - sys.Lqdotqdot.transpose()).norm() >
          1e-9 * std::max(1.0, sys.Lqdotqdot.norm()) ||
      es.eigenvalues().minCoeff() <=
          1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    fail(Errc::LegendreViolated,
         "Lqdotqdot must be symmetric positive definite");
  }

  const MatrixXd Binv = sys.Lqdotqdot.inverse();
  const MatrixXd Ablk = -Binv * sys.Lqdotq;
  const MatrixXd Cblk = sys.Lqq - sys.Lqqdot * Binv * sys.Lqdotq;
  MatrixXd gen = MatrixXd::Zero(2 * d, 2 * d);
  gen.topLeftCorner(d, d) = Ablk;
  gen.topRightCorner(d, d) = Binv;
  gen.bottomLeftCorner(d, d) = Cblk;
  gen.bottomRightCorner(d, d) = -Ablk.transpose();

  MatrixXd W0 = MatrixXd::Zero(2 * d, d);
  W0.bottomRows(d) = MatrixXd::Identity(d, d);

  const auto u_at = [&](double t) -> MatrixXd {
    return (linalg::expm(gen * (t - a)) * W0).topRows(d);
  };
  const auto sigma_min = [&](double t) {
    Eigen::JacobiSVD<MatrixXd> svd(u_at(t));
    return svd.singularValues().minCoeff();
  };

  std::vector<double> sig(grid + 1), det(grid + 1), ts(grid + 1);
  double scale = 0.0;
  for (int i = 0; i <= grid; ++i) {
    ts[i] = a + (b - a) * i / grid;
    const MatrixXd U = u_at(ts[i]);
    Eigen::JacobiSVD<MatrixXd> svd(U);
    sig[i] = svd.singularValues().minCoeff();
    scale = std::max(scale, svd.singularValues().maxCoeff());
    det[i] = U.determinant();
  }
  if (scale == 0.0) return {};

  std::vector<double> found;
  const double left_guard = a + 0.5 * (b - a) / grid;

  // sign changes of det U: bisect
  for (int i = 1; i < grid; ++i) {
    if (det[i] == 0.0 && ts[i] > left_guard) {
      found.push_back(ts[i]);
      continue;
    }
    if (det[i] * det[i + 1] < 0.0) {
      double lo = ts[i], hi = ts[i + 1];
      double flo = det[i];
      for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = u_at(mid).determinant();
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (flo * fm < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      const double t = 0.5 * (lo + hi);
      if (t > left_guard) found.push_back(t);
    }
  }

  // interior minima of the smallest singular value: ternary refine. The
  // pre-filter only prunes work; the acceptance threshold after refinement
  // does the real filtering.
  for (int i = 1; i < grid; ++i) {
    if (sig[i] <= sig[i - 1] && sig[i] <= sig[i + 1] &&
        sig[i] < 0.1 * scale) {
      double lo = ts[i - 1], hi = ts[i + 1];
      for (int it = 0; it < 80 && hi - lo > 1e-9; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (sigma_min(m1) < sigma_min(m2)) {
          hi = m2;
        } else {
          lo = m1;
        }
      }
      const double t = 0.5 * (lo + hi);
      if (t > left_guard && sigma_min(t) <= 1e-7 * scale) {
        found.push_back(t);
      }
    }
  }

  std::sort(found.begin(), found.end());
  std::vector<double> out;
  const double dedup = 1e-6 * (b - a);
  for (double t : found) {
    if (out.empty() || t - out.back() > dedup) out.push_back(t);
  }
  return out;
}

}  // namespace quad::riccati
