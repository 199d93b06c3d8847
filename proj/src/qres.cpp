#include "quad/qres.hpp"

#include <cmath>
#include <stdexcept>

namespace quad::qres {

double plog(double x) {
  if (!std::isfinite(x) || x <= 0.0) return 1.0;
  return std::max(std::log2(x), 1.0);
}

namespace {

// ceil(log2(base)) floored at 1
int order_k(double base) {
  if (!std::isfinite(base) || base <= 2.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log2(base))));
}

double delta_precondition(double kappa, double eps) {
  const double logs = plog(kappa * kappa / eps);
  return eps / (kappa * kappa * logs * logs * logs);
}

BETriple invert_impl(const BETriple& t, double kappa, double eps) {
  BETriple out;
  out.alpha = 2.0 * kappa;
  const double incr = kappa * kappa * plog(1.0 / eps);
  out.ancillas =
      t.ancillas +
      std::max(0, static_cast<int>(std::ceil(std::log2(std::max(1.0, incr)))));
  out.eps = eps;
  out.query_cost = kappa * plog(1.0 / eps) * t.query_cost;
  const double lg = plog(kappa * kappa / eps);
  out.gate_cost = t.alpha * kappa * (t.ancillas + t.gate_cost) * lg * lg;
  out.delta_required = delta_precondition(kappa, eps);
  out.delta_ok = t.eps <= out.delta_required;
  out.formula =
      "(2 kappa, a + ceil(log2(kappa^2 plog(1/eps))), eps); "
      "gates alpha kappa (a + T_in) plog(kappa^2/eps)^2";
  return out;
}

double require(const std::map<std::string, double>& params,
               const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) {
    fail(Errc::MissingParameter, "missing parameter: " + name);
  }
  return it->second;
}

double optional(const std::map<std::string, double>& params,
                const std::string& name, double fallback) {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

bool has(const std::map<std::string, double>& params,
         const std::string& name) {
  return params.count(name) > 0;
}

const char* kUnitsNote =
    "leading-order units: unit constants, logs base 2, each log floored at 1";

}  // namespace

BETriple sparse_encode(double s_r, double s_c, int a, double eps) {
  if (s_r < 1.0 || s_c < 1.0) {
    throw std::invalid_argument("row and column sparsities must be >= 1");
  }
  if (a < 0) throw std::invalid_argument("ancilla count must be >= 0");
  if (eps < 0.0) throw std::invalid_argument("encoding error must be >= 0");
  BETriple t;
  t.alpha = std::sqrt(s_r * s_c);
  t.ancillas = a + 3;
  t.eps = eps;
  t.query_cost = 1.0;
  const double lg = plog(s_r * s_c / eps);
  t.gate_cost = a + lg * lg * std::sqrt(lg);
  t.formula = "(sqrt(s_r s_c), a+3, eps); gates a + plog(s_r s_c/eps)^2.5";
  return t;
}

BETriple complement(const BETriple& t) {
  BETriple out = t;
  out.ancillas = t.ancillas + 1;
  out.formula = "(alpha, a+1, eps)";
  return out;
}

BETriple add(const BETriple& t1, const BETriple& t2) {
  BETriple out;
  out.alpha = t1.alpha + t2.alpha;
  out.ancillas = t1.ancillas + t2.ancillas;
  out.eps = t2.alpha * t1.eps + t1.alpha * t2.eps;
  out.query_cost = t1.query_cost + t2.query_cost;
  out.gate_cost = t1.gate_cost + t2.gate_cost;
  out.formula = "(alpha+beta, a+b, beta eps + alpha delta)";
  return out;
}

BETriple multiply(const BETriple& t1, const BETriple& t2) {
  BETriple out;
  out.alpha = t1.alpha * t2.alpha;
  out.ancillas = t1.ancillas + t2.ancillas;
  out.eps = t1.alpha * t2.eps + t2.alpha * t1.eps;
  out.query_cost = t1.query_cost + t2.query_cost;
  out.gate_cost = t1.gate_cost + t2.gate_cost;
  out.formula = "(alpha beta, a+b, alpha delta + beta eps)";
  return out;
}

BETriple invert(const BETriple& t, double kappa, double eps) {
  if (kappa < 2.0) {
    fail(Errc::KappaTooSmall, "inversion needs a condition number >= 2");
  }
  if (eps <= 0.0) throw std::invalid_argument("target error must be > 0");
  return invert_impl(t, kappa, eps);
}

double qlsa_cost(double kappa, double eps) {
  if (kappa < 1.0) throw std::invalid_argument("condition number must be >= 1");
  if (eps <= 0.0 || eps >= 1.0) {
    throw std::invalid_argument("target error must lie in (0, 1)");
  }
  return std::max(kappa * plog(1.0 / eps), 1.0);
}

double norm_est_cost(double kappa, double gamma, double s, double d) {
  if (kappa < 1.0) throw std::invalid_argument("condition number must be >= 1");
  if (gamma <= 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("relative error must lie in (0, 1)");
  }
  const double lkg = plog(kappa / gamma);
  const double t_u = plog(d) + std::pow(plog(s * kappa / gamma * lkg), 2.5);
  const double t_b = plog(d);
  const double lk = plog(kappa);
  return (kappa / gamma) * (s * t_u * lkg * lkg + t_b) * lk * lk * lk *
         plog(plog(kappa));
}

CostReport pipeline_matrix_riccati(double s, double kappa_l, double kappa_v,
                                   double N, double M, double eps) {
  if (s < 1.0 || kappa_l < 1.0 || kappa_v < 1.0 || N < 1.0 || M < 1.0 ||
      eps < 0.0) {
    throw std::invalid_argument("pipeline parameters must be positive");
  }
  // time register normalized to a single step, so the base ancilla budget is
  // ceil(log2(N + M))
  const int a0 = static_cast<int>(
      std::ceil(std::log2(std::max(2.0, N + M))));

  const double delta_l = delta_precondition(kappa_l, eps);
  const double delta_v = delta_precondition(kappa_v, eps);

  const BETriple enc_l = sparse_encode(s, s, a0, delta_l);
  const BETriple inv_l = invert_impl(enc_l, kappa_l, eps);
  const BETriple z_in = sparse_encode(s, s, a0, eps);
  const BETriple prod = multiply(inv_l, z_in);
  const BETriple offset = sparse_encode(1.0, 1.0, a0, eps);
  const BETriple shifted = add(prod, offset);
  const BETriple enc_v = sparse_encode(s, s, a0, delta_v);
  const BETriple inv_v = invert_impl(enc_v, kappa_v, eps);
  const BETriple final = multiply(inv_v, shifted);

  CostReport report;
  report.params["s"] = s;
  report.params["kappa_L"] = kappa_l;
  report.params["kappa_V"] = kappa_v;
  report.params["N"] = N;
  report.params["M"] = M;
  report.params["eps"] = eps;
  report.params["alpha_final"] = final.alpha;
  report.params["eps_final"] = final.eps;
  report.params["ancillas"] = final.ancillas;
  report.params["delta_L"] = delta_l;
  report.params["delta_V"] = delta_v;
  report.query_cost = s * kappa_v * kappa_l * plog(1.0 / eps) * plog(s) *
                      plog(kappa_v) * plog(kappa_l) * plog(M + N);
  report.gate_cost = final.gate_cost;
  report.formulas.push_back("alpha_final = 2 kappa_V (2 kappa_L s + 1)");
  report.formulas.push_back(
      "query = s kappa_V kappa_L plog(1/eps) plog(s) plog(kappa_V) "
      "plog(kappa_L) plog(M+N)");
  report.formulas.push_back(
      "gates = sum of step lemma gate costs; ancilla base ceil(log2(N+M)) "
      "with the time register normalized to one step");
  report.notes.push_back(kUnitsNote);
  if (!inv_l.delta_ok || !inv_v.delta_ok) {
    report.notes.push_back("inversion input error exceeds the precondition");
  }
  return report;
}

namespace {

CostReport ham_canon_costs(const std::map<std::string, double>& p) {
  const double T = require(p, "T");
  const double norm_a = require(p, "norm_A");
  const double c = require(p, "C");
  const double g = require(p, "g");
  const double s = require(p, "s");
  const double d = require(p, "d");
  const double eps = require(p, "eps");
  const double norm_f = optional(p, "norm_f", 0.0);
  const double norm_xt = optional(p, "norm_xT", 1.0);

  const double kappa_l = T * norm_a * c;
  const int k = order_k(T * norm_a * (1.0 + T * norm_f / norm_xt));
  const double t_q =
      g * kappa_l * plog(kappa_l) * s * k * plog(d) * plog(1.0 / eps);
  const double t_g = t_q * k * plog(1.0 / eps) * plog(norm_a * T);
  const double t_k = (1.0 / eps) * kappa_l * plog(kappa_l) * s * k * plog(d);

  CostReport report;
  report.params = p;
  report.params["kappa_L"] = kappa_l;
  report.params["k"] = k;
  report.params["T_K"] = t_k;
  report.query_cost = t_q;
  report.gate_cost = t_g;
  report.formulas.push_back("kappa_L = T ||A|| C(A)");
  report.formulas.push_back(
      "T_Q = g kappa_L plog(kappa_L) s k plog(d) plog(1/eps)");
  report.formulas.push_back("T_G = T_Q k plog(1/eps) plog(||A|| T)");
  report.formulas.push_back(
      "T_K = (1/eps) kappa_L plog(kappa_L) s k plog(d)");
  report.notes.push_back(kUnitsNote);
  report.notes.push_back(
      "k read as ceil(log2(T ||A|| (1 + T ||f|| / ||x(T)||)))");
  return report;
}

CostReport qpe_variant_costs(const std::map<std::string, double>& p) {
  const double T = require(p, "T");
  const double norm_a = require(p, "norm_A");
  const double s = require(p, "s");
  const double d = require(p, "d");
  const double eps = require(p, "eps");
  const double norm_f = optional(p, "norm_f", 0.0);
  const double norm_xt = optional(p, "norm_xT", 1.0);

  const double m = T * norm_a;
  const int k = order_k(m * (1.0 + T * norm_f / norm_xt));
  const double t_q = (m / (eps * eps)) * plog(m) * s * k * plog(d);
  const double t_g = t_q * k * plog(1.0 / eps) * plog(m);

  CostReport report;
  report.params = p;
  report.params["m"] = m;
  report.params["k"] = k;
  report.query_cost = t_q;
  report.gate_cost = t_g;
  report.formulas.push_back("m = T ||A||");
  report.formulas.push_back("T_Q = (m/eps^2) plog(m) s k plog(d)");
  report.formulas.push_back("T_G = T_Q k plog(1/eps) plog(m)");
  report.notes.push_back(kUnitsNote);
  return report;
}

CostReport oscillator_costs(const std::map<std::string, double>& p) {
  const double T = require(p, "T");
  const double s = require(p, "s");
  const double r_max = require(p, "R_max");
  const double s_max = require(p, "S_max");
  const double m_min = require(p, "M_min");
  const double m_max = require(p, "M_max");
  const double d = require(p, "d");
  const double eps = require(p, "eps");
  const double norm_f = optional(p, "norm_f", 0.0);
  const double norm_yt = optional(p, "norm_yT", 1.0);

  const double m = T * s * std::max(r_max / m_min, std::sqrt(s_max / m_min));
  const int k = order_k(m * (1.0 + T * norm_f / norm_yt));
  const double t_q = (m / eps) * k * plog(1.0 / eps) * plog(m);
  const double t_g =
      t_q * plog(m) * plog(1.0 / eps) * plog(d) * plog(m_max / m_min);

  CostReport report;
  report.params = p;
  report.params["m"] = m;
  report.params["k"] = k;
  report.query_cost = t_q;
  report.gate_cost = t_g;
  report.formulas.push_back(
      "m = T s max(R_max/M_min, sqrt(S_max/M_min))");
  report.formulas.push_back("T_Q = (m/eps) k plog(1/eps) plog(m)");
  report.formulas.push_back(
      "T_G = T_Q plog(m) plog(1/eps) plog(d) plog(M_max/M_min)");
  report.notes.push_back(kUnitsNote);
  return report;
}

CostReport vector_riccati_costs(const std::map<std::string, double>& p) {
  const double T = require(p, "T");
  const double s = require(p, "s");
  const double d = require(p, "d");
  const double eps = require(p, "eps");
  const double g = require(p, "g");
  const double nf0 = require(p, "norm_F0");
  const double nf1 = require(p, "norm_F1");
  const double nf2 = require(p, "norm_F2");
  const double nf3 = require(p, "norm_F3");
  const double norm_b = optional(p, "norm_b", 0.0);
  const double norm_xt = optional(p, "norm_xT", 1.0);

  // the cost model's norm expression, evaluated verbatim
  const double norm_a = std::max(nf0 + nf1, nf2 + nf3);

  double c;
  std::string c_formula;
  if (has(p, "C")) {
    c = p.at("C");
    c_formula = "C(A) supplied";
  } else {
    const double cd = require(p, "C_d");
    if (nf0 == 0.0 && nf2 != 0.0) {
      c = cd * (1.0 + cd * T * nf2);
      c_formula = "C(A) = C_d (1 + C_d T ||F2||)";
    } else if (nf2 == 0.0 && nf0 != 0.0) {
      c = cd * (1.0 + cd * T * nf0);
      c_formula = "C(A) = C_d (1 + C_d T ||F0||)";
    } else if (nf0 == 0.0 && nf2 == 0.0) {
      c = cd;
      c_formula = "C(A) = C_d";
    } else {
      const double mu = require(p, "mu");
      c = std::max(1.0, std::exp((mu + nf0 + nf2) * T));
      c_formula = "C(A) = max(1, exp((mu + ||F0|| + ||F2||) T))";
    }
  }

  const int k = order_k(1.0 + norm_b * T * std::exp(2.0) / norm_xt);
  const double tac = T * norm_a * c;
  const double query =
      g * tac * s * k * plog(k) * plog(1.0 / eps) * plog(tac);
  const double gate = query * plog(d);

  CostReport report;
  report.params = p;
  report.params["norm_A"] = norm_a;
  report.params["C"] = c;
  report.params["k"] = k;
  report.query_cost = query;
  report.gate_cost = gate;
  report.formulas.push_back("||A|| = max(||F0||+||F1||, ||F2||+||F3||)");
  report.formulas.push_back(c_formula);
  report.formulas.push_back(
      "query = g T ||A|| C(A) s k plog(k) plog(1/eps) plog(T ||A|| C(A))");
  report.formulas.push_back("gates = query plog(d)");
  report.notes.push_back(kUnitsNote);
  report.notes.push_back(
      "the norm expression is the cost model's formula, not a certified "
      "upper bound on the block matrix norm");
  return report;
}

CostReport hjb_costs(const std::map<std::string, double>& p) {
  const double s = require(p, "s");
  const double kappa_v = require(p, "kappa_V");
  const double eps = require(p, "eps");
  const double n = require(p, "N");
  double kappa_l;
  std::string kl_formula;
  if (has(p, "kappa_L")) {
    kappa_l = p.at("kappa_L");
    kl_formula = "kappa_L supplied";
  } else {
    kappa_l = require(p, "C") * require(p, "T") * require(p, "norm_A");
    kl_formula = "kappa_L = C(A) T ||A||";
  }

  const double query = s * kappa_v * kappa_l * plog(1.0 / eps) * plog(s) *
                       plog(kappa_v) * plog(kappa_l) * plog(n);

  CostReport report;
  report.params = p;
  report.params["kappa_L"] = kappa_l;
  report.query_cost = query;
  report.gate_cost = query;
  report.formulas.push_back(kl_formula);
  report.formulas.push_back(
      "query = gates = s kappa_V kappa_L plog(1/eps) plog(s) plog(kappa_V) "
      "plog(kappa_L) plog(N)");
  report.notes.push_back(kUnitsNote);
  return report;
}

}  // namespace

CostReport theorem_costs(const std::string& which,
                         const std::map<std::string, double>& params) {
  if (which == "ham_canon") return ham_canon_costs(params);
  if (which == "qpe_variant") return qpe_variant_costs(params);
  if (which == "oscillators") return oscillator_costs(params);
  if (which == "vector_riccati") return vector_riccati_costs(params);
  if (which == "hjb") return hjb_costs(params);
  throw std::invalid_argument("unknown estimate name: " + which);
}

}  // namespace quad::qres
