#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "quad/errors.hpp"

namespace quad::qres {

// max(log2(x), 1); nonpositive or nonfinite arguments collapse to 1 so every
// cost expression stays finite and monotone
double plog(double x);

// Subnormalized block encoding descriptor with leading-order cost counters.
// All constants are unit and all logs are base 2; the numbers are
// leading-order units, not absolute gate counts.
struct BETriple {
  double alpha = 1.0;
  int ancillas = 0;
  double eps = 0.0;
  double query_cost = 1.0;
  double gate_cost = 0.0;
  std::string formula;
  // inversion precondition: the input error the inversion lemma needs, and
  // whether the actual input met it
  double delta_required = std::numeric_limits<double>::quiet_NaN();
  bool delta_ok = true;
};

// (sqrt(s_r s_c), a + 3, eps) from one oracle use
BETriple sparse_encode(double s_r, double s_c, int a, double eps);

// (alpha, a + 1, eps), costs carried through
BETriple complement(const BETriple& t);

// (alpha + beta, a + b, beta eps + alpha delta), costs add
BETriple add(const BETriple& t1, const BETriple& t2);

// (alpha beta, a + b, alpha delta + beta eps), costs add
BETriple multiply(const BETriple& t1, const BETriple& t2);

// (2 kappa, a + ceil(log2(kappa^2 plog(1/eps))), eps); requires kappa >= 2
// and flags the input-error precondition delta <= eps / (kappa^2
// plog(kappa^2/eps)^3) in delta_ok
BETriple invert(const BETriple& t, double kappa, double eps);

// kappa plog(1/eps) oracle calls, floored at 1
double qlsa_cost(double kappa, double eps);

// (kappa/gamma) (s T_U plog(kappa/gamma)^2 + T_b) plog(kappa)^3
// plog(plog(kappa)) gates for norm estimation to relative error gamma
double norm_est_cost(double kappa, double gamma, double s, double d);

struct CostReport {
  std::map<std::string, double> params;
  double query_cost = 0.0;
  double gate_cost = 0.0;
  std::vector<std::string> formulas;
  std::vector<std::string> notes;
};

// Six-step composition for the matrix flow: sparse encode and invert the
// one-shot system, multiply by the input block, add the offset, invert the
// denominator block, multiply. The composed subnormalization is exactly
// 2 kappa_V (2 kappa_L s + 1).
CostReport pipeline_matrix_riccati(double s, double kappa_l, double kappa_v,
                                   double N, double M, double eps);

// Evaluates the leading-order query/gate expressions of one of the composed
// estimates: ham_canon, qpe_variant, oscillators, vector_riccati, hjb.
// Throws MissingParameter when a needed name is absent and
// std::invalid_argument for an unknown estimate name.
CostReport theorem_costs(const std::string& which,
                         const std::map<std::string, double>& params);

}  // namespace quad::qres
