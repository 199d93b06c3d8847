#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quad/control.hpp"
#include "quad/errors.hpp"
#include "quad/linalg.hpp"
#include "quad/mechsys.hpp"
#include "quad/odecore.hpp"
#include "quad/qres.hpp"
#include "quad/riccati.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using namespace quad;

namespace {

// ---------------------------------------------------------------------------
// schema handling

struct SchemaError : std::runtime_error {
  std::string field;
  explicit SchemaError(std::string f)
      : std::runtime_error("schema error at field: " + f),
        field(std::move(f)) {}
};

json load_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("input");
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw SchemaError("input");
    return j;
  } catch (const json::exception&) {
    throw SchemaError("input");
  }
}

const json& member(const json& j, const std::string& field) {
  const auto it = j.find(field);
  if (it == j.end()) throw SchemaError(field);
  return *it;
}

double get_number(const json& j, const std::string& field) {
  const json& v = member(j, field);
  if (!v.is_number()) throw SchemaError(field);
  return v.get<double>();
}

double get_number_or(const json& j, const std::string& field, double fallback) {
  const auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw SchemaError(field);
  return it->get<double>();
}

int get_index(const json& j, const std::string& field) {
  const json& v = member(j, field);
  if (!v.is_number_integer()) throw SchemaError(field);
  return v.get<int>();
}

std::string get_string_or(const json& j, const std::string& field,
                          const std::string& fallback) {
  const auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw SchemaError(field);
  return it->get<std::string>();
}

bool get_bool_or(const json& j, const std::string& field, bool fallback) {
  const auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw SchemaError(field);
  return it->get<bool>();
}

VectorXd parse_vector(const json& v, const std::string& field,
                      int size_hint = -1) {
  if (!v.is_array() || v.empty()) throw SchemaError(field);
  VectorXd out(static_cast<int>(v.size()));
  for (int i = 0; i < out.size(); ++i) {
    if (!v[i].is_number()) throw SchemaError(field);
    out(i) = v[i].get<double>();
  }
  if (size_hint >= 0 && out.size() != size_hint) throw SchemaError(field);
  return out;
}

// dense rows [[..],[..]] or sparse {"rows":r,"cols":c,"coo":[[i,j,v],..]}
// (duplicate coordinate entries accumulate)
MatrixXd parse_matrix(const json& m, const std::string& field,
                      int rows_hint = -1, int cols_hint = -1) {
  if (m.is_array()) {
    if (m.empty() || !m[0].is_array() || m[0].empty()) throw SchemaError(field);
    const int rows = static_cast<int>(m.size());
    const int cols = static_cast<int>(m[0].size());
    MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i) {
      if (!m[i].is_array() || static_cast<int>(m[i].size()) != cols) {
        throw SchemaError(field);
      }
      for (int j = 0; j < cols; ++j) {
        if (!m[i][j].is_number()) throw SchemaError(field);
        out(i, j) = m[i][j].get<double>();
      }
    }
    if ((rows_hint >= 0 && rows != rows_hint) ||
        (cols_hint >= 0 && cols != cols_hint)) {
      throw SchemaError(field);
    }
    return out;
  }
  if (m.is_object() && m.contains("coo")) {
    const int rows = m.contains("rows") ? get_index(m, "rows") : rows_hint;
    const int cols = m.contains("cols") ? get_index(m, "cols") : cols_hint;
    if (rows <= 0 || cols <= 0) throw SchemaError(field);
    if ((rows_hint >= 0 && rows != rows_hint) ||
        (cols_hint >= 0 && cols != cols_hint)) {
      throw SchemaError(field);
    }
    const json& coo = m.at("coo");
    if (!coo.is_array()) throw SchemaError(field);
    MatrixXd out = MatrixXd::Zero(rows, cols);
    for (const json& e : coo) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
          !e[1].is_number_integer() || !e[2].is_number()) {
        throw SchemaError(field);
      }
      const int i = e[0].get<int>();
      const int j = e[1].get<int>();
      if (i < 0 || i >= rows || j < 0 || j >= cols) throw SchemaError(field);
      out(i, j) += e[2].get<double>();
    }
    return out;
  }
  throw SchemaError(field);
}

mechsys::MechanicalSystem parse_system(const json& root) {
  const json& s = member(root, "system");
  if (!s.is_object()) throw SchemaError("system");
  mechsys::MechanicalSystem sys;
  sys.d = get_index(s, "d");
  if (sys.d < 1) throw SchemaError("system.d");
  sys.masses = parse_vector(member(s, "masses"), "system.masses", sys.d);
  if (s.contains("damping")) {
    sys.damping = parse_matrix(s.at("damping"), "system.damping", sys.d, sys.d);
  }
  if (s.contains("potential")) {
    sys.potential =
        parse_matrix(s.at("potential"), "system.potential", sys.d, sys.d);
  }
  if (s.contains("forcing")) {
    sys.forcing = parse_vector(s.at("forcing"), "system.forcing", sys.d);
  }
  if (s.contains("springs")) {
    const json& sp = s.at("springs");
    if (!sp.is_array()) throw SchemaError("system.springs");
    std::vector<mechsys::Spring> springs;
    for (const json& e : sp) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
          !e[1].is_number_integer() || !e[2].is_number()) {
        throw SchemaError("system.springs");
      }
      springs.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
    }
    sys.springs = std::move(springs);
  }
  if (!s.contains("potential") && !s.contains("springs")) {
    throw SchemaError("system.potential");
  }
  return sys;
}

mechsys::Basis parse_basis(const std::string& name) {
  if (name == "x") return mechsys::Basis::X;
  if (name == "z") return mechsys::Basis::Z;
  if (name == "y") return mechsys::Basis::Y;
  if (name == "ytilde") return mechsys::Basis::YTilde;
  throw SchemaError("basis");
}

// ---------------------------------------------------------------------------
// output handling

json vec_to_json(const VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json mat_to_json(const MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move " + tmp + " into place");
  }
}

void write_report(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// command context

struct Options {
  std::string input;
  std::string output;
  std::string trace;
  std::optional<double> epsilon;
  std::optional<double> gamma;
  std::optional<int> grid;
  std::string convention;
  std::string noise;
  std::uint64_t seed = 0;
  std::string theorem;
};

odecore::SolverParams solver_params(const Options& opt, const json& root) {
  odecore::SolverParams p;
  p.epsilon = opt.epsilon ? *opt.epsilon : get_number_or(root, "epsilon", 1e-8);
  p.gamma = opt.gamma ? *opt.gamma : get_number_or(root, "gamma", 0.0);
  std::string noise = opt.noise.empty()
                          ? get_string_or(root, "noise", "worst")
                          : opt.noise;
  if (noise == "worst") {
    p.noise = odecore::Noise::Worst;
  } else if (noise == "random") {
    p.noise = odecore::Noise::Random;
  } else {
    throw SchemaError("noise");
  }
  p.seed = opt.seed;
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_integer()) throw SchemaError("seed");
    p.seed = root.at("seed").get<std::uint64_t>();
  }
  if (opt.grid) p.m = *opt.grid;
  if (root.contains("steps")) p.m = get_index(root, "steps");
  return p;
}

// ---------------------------------------------------------------------------
// subcommands

json run_simulate(const Options& opt, const json& root) {
  mechsys::MechanicalSystem sys = parse_system(root);
  mechsys::validate(sys);
  const mechsys::Basis basis = parse_basis(get_string_or(root, "basis", "x"));
  const VectorXd q0 = parse_vector(member(root, "q0"), "q0", sys.d);
  const VectorXd qdot0 = parse_vector(member(root, "qdot0"), "qdot0", sys.d);
  const double T = get_number(root, "T");
  if (!(T >= 0.0)) throw SchemaError("T");

  mechsys::LinearODE ode = mechsys::assemble(sys, basis);
  ode.x0 = mechsys::initial_state(sys, basis, q0, qdot0);
  ode.T = T;
  const odecore::SolverParams params = solver_params(opt, root);
  const odecore::HistoryState hist = odecore::solve_history(ode, params);

  double sup = 0.0;
  for (const MatrixXd& step : hist.steps) sup = std::max(sup, step.norm());

  json out;
  out["x_final"] = vec_to_json(hist.steps.back().col(0));
  out["error_bound"] = odecore::error_bound(hist.params, sup);
  const int n = static_cast<int>(ode.A.rows());
  const long rows = static_cast<long>(hist.params.m) *
                        (hist.params.k + 1) * n +
                    static_cast<long>(hist.params.m) * n;
  if (rows <= 2000) {
    odecore::LSystem lsys = odecore::assemble_l(ode, params);
    out["kappa_L"] = odecore::kappa_l(lsys);
  } else {
    out["kappa_L"] = nullptr;
  }
  const odecore::SuccessReport sr = odecore::success_probability(hist, {});
  out["p_success"] = sr.p;
  out["p_bound"] = sr.bound;
  const odecore::KineticReport kr = odecore::estimate_kinetic(sys, basis, hist);
  out["K_hat"] = kr.K_hat;
  out["K_true"] = kr.K_true;

  if (!opt.trace.empty()) {
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < n; ++i) csv << ",x" << i;
    csv << "\n";
    for (std::size_t s = 0; s < hist.steps.size(); ++s) {
      csv << csv_number(s * hist.params.h);
      for (int i = 0; i < n; ++i) {
        csv << "," << csv_number(hist.steps[s](i, 0));
      }
      csv << "\n";
    }
    write_text(opt.trace, csv.str());
  }
  return out;
}

json run_energy(const Options&, const json& root) {
  mechsys::MechanicalSystem sys = parse_system(root);
  mechsys::validate(sys);
  const VectorXd q0 = parse_vector(member(root, "q0"), "q0", sys.d);
  const VectorXd qdot0 = parse_vector(member(root, "qdot0"), "qdot0", sys.d);
  const mechsys::Energies e = mechsys::energies(sys, q0, qdot0);
  const mechsys::NormBound nb = mechsys::norm_bound_A(sys);
  json out;
  out["kinetic"] = e.kinetic;
  out["potential"] = e.total - e.kinetic;
  out["total"] = e.total;
  out["norm_bound"] = nb.bound;
  out["norm_exact"] = nb.exact;
  out["c_of_a_bound"] = mechsys::c_of_a_bound(sys);
  return out;
}

json run_riccati(const Options& opt, const json& root) {
  riccati::RiccatiProblem p;
  p.F0 = parse_matrix(member(root, "F0"), "F0");
  p.F1 = parse_matrix(member(root, "F1"), "F1");
  p.F2 = parse_matrix(member(root, "F2"), "F2");
  p.F3 = parse_matrix(member(root, "F3"), "F3");
  p.y0 = parse_matrix(member(root, "y0"), "y0");
  if (root.contains("w")) p.w = parse_matrix(root.at("w"), "w");
  p.T = get_number(root, "T");

  const std::string convention = opt.convention.empty()
                                     ? get_string_or(root, "convention", "minus")
                                     : opt.convention;
  if (convention == "minus") {
    p.convention = riccati::Convention::Minus;
  } else if (convention == "plus") {
    p.convention = riccati::Convention::Plus;
  } else {
    throw SchemaError("convention");
  }
  const std::string mode = get_string_or(root, "mode", "ivp");
  if (mode == "ivp") {
    p.mode = riccati::Mode::IVP;
  } else if (mode == "bvp") {
    p.mode = riccati::Mode::BVP;
  } else {
    throw SchemaError("mode");
  }

  const odecore::SolverParams params = solver_params(opt, root);
  const bool vector_mode = p.y0.cols() == 1;
  const riccati::RiccatiTrace tr =
      vector_mode ? riccati::solve_vector(p, params)
                  : riccati::solve_matrix(p, params);

  json out;
  out["y_final"] = mat_to_json(tr.y_final);
  out["kappa_V"] = tr.kappa_v;
  out["eps1"] = tr.eps1;
  out["soln_error_budget"] = tr.soln_error_budget;
  out["sigma_min"] =
      *std::min_element(tr.sigma_min_v.begin(), tr.sigma_min_v.end());
  if (vector_mode) {
    out["p_success"] = tr.p_success;
    out["g"] = tr.g;
    out["p_bound"] = tr.p_bound;
  } else {
    out["p_success"] = nullptr;
    out["g"] = nullptr;
    out["p_bound"] = nullptr;
  }

  if (!opt.trace.empty()) {
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < tr.y_final.rows(); ++i) {
      for (int j = 0; j < tr.y_final.cols(); ++j) csv << ",y" << i << j;
    }
    csv << ",sigma_min\n";
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
      csv << csv_number(tr.times[s]);
      for (int i = 0; i < tr.y[s].rows(); ++i) {
        for (int j = 0; j < tr.y[s].cols(); ++j) {
          csv << "," << csv_number(tr.y[s](i, j));
        }
      }
      csv << "," << csv_number(tr.sigma_min_v[s]) << "\n";
    }
    write_text(opt.trace, csv.str());
  }
  return out;
}

json run_lqr(const Options& opt, const json& root) {
  control::LQRProblem prob;
  prob.F = parse_matrix(member(root, "F"), "F");
  const int n = static_cast<int>(prob.F.rows());
  prob.G = parse_matrix(member(root, "G"), "G", n);
  prob.Q = parse_matrix(member(root, "Q"), "Q", n, n);
  prob.R = parse_matrix(member(root, "R"), "R");
  prob.Pf = parse_matrix(member(root, "Pf"), "Pf", n, n);
  prob.x0 = parse_vector(member(root, "x0"), "x0", n);
  prob.tf = get_number(root, "tf");
  const bool two_pass = get_bool_or(root, "two_pass", false);

  const odecore::SolverParams params = solver_params(opt, root);
  const control::LQRSolution sol =
      control::solve_lqr(prob, params, two_pass);

  json out;
  out["J"] = sol.J;
  out["P0"] = mat_to_json(sol.P0);
  out["value_identity_gap"] = sol.value_identity_gap;
  out["u0"] = vec_to_json(sol.u.front());
  out["x_final"] = vec_to_json(sol.x.back());
  out["round_trip_defect"] =
      two_pass ? json(sol.round_trip_defect) : json(nullptr);

  if (!opt.trace.empty()) {
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < n; ++i) csv << ",x" << i;
    for (int i = 0; i < sol.u.front().size(); ++i) csv << ",u" << i;
    csv << "\n";
    for (std::size_t s = 0; s < sol.times.size(); ++s) {
      csv << csv_number(sol.times[s]);
      for (int i = 0; i < n; ++i) csv << "," << csv_number(sol.x[s](i));
      for (int i = 0; i < sol.u[s].size(); ++i) {
        csv << "," << csv_number(sol.u[s](i));
      }
      csv << "\n";
    }
    write_text(opt.trace, csv.str());
  }
  return out;
}

json run_conjugate(const Options& opt, const json& root) {
  riccati::JacobiSystem sys;
  sys.Lqq = parse_matrix(member(root, "Lqq"), "Lqq");
  const int d = static_cast<int>(sys.Lqq.rows());
  sys.Lqqdot = parse_matrix(member(root, "Lqqdot"), "Lqqdot", d, d);
  sys.Lqdotq = parse_matrix(member(root, "Lqdotq"), "Lqdotq", d, d);
  sys.Lqdotqdot = parse_matrix(member(root, "Lqdotqdot"), "Lqdotqdot", d, d);
  const double a = get_number_or(root, "a", 0.0);
  const double b = get_number(root, "b");
  const int grid = opt.grid ? *opt.grid : 512;
  const std::vector<double> pts = riccati::conjugate_points(sys, a, b, grid);
  json out;
  out["points"] = pts;
  out["count"] = pts.size();
  return out;
}

json cost_report_json(const qres::CostReport& report) {
  json out;
  json params = json::object();
  for (const auto& [name, value] : report.params) params[name] = value;
  out["params"] = params;
  out["query_cost"] = report.query_cost;
  out["gate_cost"] = report.gate_cost;
  out["formulas"] = report.formulas;
  out["notes"] = report.notes;
  return out;
}

json run_resources(const Options& opt, const json& root) {
  if (root.contains("pipeline")) {
    const json& pl = root.at("pipeline");
    if (!pl.is_object()) throw SchemaError("pipeline");
    const qres::CostReport report = qres::pipeline_matrix_riccati(
        get_number(pl, "s"), get_number(pl, "kappa_L"),
        get_number(pl, "kappa_V"), get_number(pl, "N"), get_number(pl, "M"),
        get_number(pl, "eps"));
    return cost_report_json(report);
  }
  const std::string which =
      opt.theorem.empty() ? get_string_or(root, "theorem", "") : opt.theorem;
  if (which.empty()) throw SchemaError("theorem");
  const json& p = member(root, "params");
  if (!p.is_object()) throw SchemaError("params");
  std::map<std::string, double> params;
  for (const auto& [name, value] : p.items()) {
    if (!value.is_number()) throw SchemaError("params." + name);
    params[name] = value.get<double>();
  }
  return cost_report_json(qres::theorem_costs(which, params));
}

json run_hardness(const Options&, const json& root) {
  mechsys::MechanicalSystem sys = parse_system(root);
  mechsys::validate(sys);
  const double t = get_number(root, "t");
  const odecore::HardnessReport hr = odecore::hardness_gap(sys, t);
  json out;
  out["gap"] = hr.gap;
  out["bound"] = hr.bound;
  out["K"] = hr.K;
  out["K_R"] = hr.K_R;
  out["E"] = hr.E;
  out["norm_R"] = hr.normR;
  return out;
}

bool numerical_failure(Errc code) {
  switch (code) {
    case Errc::SingularV:
    case Errc::SingularL:
    case Errc::LegendreViolated:
    case Errc::StepOverflow:
    case Errc::ZeroFinalState:
    case Errc::NotPositiveDefinite:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadratic dynamics, Riccati flows and control costs"};
  app.require_subcommand(1);

  Options opt;
  double epsilon_flag = 0.0;
  double gamma_flag = 0.0;
  int grid_flag = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", opt.input, "input JSON file")->required();
    sub->add_option("--output", opt.output,
                    "output JSON file (stdout when omitted)");
    sub->add_option("--trace", opt.trace, "CSV trace file");
    sub->add_option("--epsilon", epsilon_flag, "solver accuracy target")
        ->each([&](const std::string&) { opt.epsilon = epsilon_flag; });
    sub->add_option("--gamma", gamma_flag, "readout noise level")
        ->each([&](const std::string&) { opt.gamma = gamma_flag; });
    sub->add_option("--grid", grid_flag,
                    "step count override (scan resolution for conjugate)")
        ->each([&](const std::string&) { opt.grid = grid_flag; });
    sub->add_option("--convention", opt.convention,
                    "riccati sign convention: minus|plus");
    sub->add_option("--noise", opt.noise, "noise mode: worst|random");
    sub->add_option("--seed", opt.seed, "seed for random noise mode");
    return sub;
  };

  CLI::App* simulate = add_common(
      app.add_subcommand("simulate", "integrate a mechanical system"));
  CLI::App* energy = add_common(
      app.add_subcommand("energy", "energies and generator norm bounds"));
  CLI::App* riccati_cmd = add_common(
      app.add_subcommand("riccati", "solve a Riccati flow"));
  CLI::App* lqr = add_common(
      app.add_subcommand("lqr", "finite-horizon regulator"));
  CLI::App* conjugate = add_common(
      app.add_subcommand("conjugate", "conjugate point scan"));
  CLI::App* resources = add_common(
      app.add_subcommand("resources", "block-encoding cost report"));
  resources->add_option("--theorem", opt.theorem,
                        "estimate name, overrides the input file");
  CLI::App* hardness = add_common(
      app.add_subcommand("hardness", "damping sensitivity of the energy"));

  CLI11_PARSE(app, argc, argv);

  json out;
  int code = 0;
  try {
    const json root = load_input(opt.input);
    if (simulate->parsed()) {
      out = run_simulate(opt, root);
    } else if (energy->parsed()) {
      out = run_energy(opt, root);
    } else if (riccati_cmd->parsed()) {
      out = run_riccati(opt, root);
    } else if (lqr->parsed()) {
      out = run_lqr(opt, root);
    } else if (conjugate->parsed()) {
      out = run_conjugate(opt, root);
    } else if (resources->parsed()) {
      out = run_resources(opt, root);
    } else if (hardness->parsed()) {
      out = run_hardness(opt, root);
    }
  } catch (const SchemaError& e) {
    out = json{{"error", "schema"}, {"field", e.field}};
    code = 2;
  } catch (const Error& e) {
    if (numerical_failure(e.code())) {
      out = json{{"error", to_string(e.code())}};
      code = 3;
    } else {
      out = json{{"error", "schema"}, {"field", to_string(e.code())}};
      code = 2;
    }
  } catch (const std::invalid_argument&) {
    out = json{{"error", "schema"}, {"field", "input"}};
    code = 2;
  } catch (const std::exception& e) {
    out = json{{"error", e.what()}};
    code = 1;
  }

  try {
    write_report(opt.output, out);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return code;
}
