// place: load a power-system case, run placement solvers and experiment
// sweeps, and emit CSV or JSON records.
//
// Exit codes: 0 success, 1 usage or case-validation error, 2 infeasible or
// non-detectable result, 3 certificate failure.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmuplace/batch_eval.hpp"
#include "pmuplace/descriptor_model.hpp"
#include "pmuplace/errors.hpp"
#include "pmuplace/placement.hpp"
#include "pmuplace/power_system.hpp"
#include "pmuplace/riccati.hpp"
#include "pmuplace/rng.hpp"

namespace {

using pmuplace::AlgebraicCoords;
using pmuplace::Method;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest round-trip decimal representation, so output bytes are stable.
std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// One output cell: text, number, or empty.
struct Cell {
  enum Kind { Text, Number, Empty, Boolean } kind = Empty;
  std::string text;
  double num = 0.0;
  bool flag = false;

  static Cell str(std::string s) { return Cell{Text, std::move(s), 0.0, false}; }
  static Cell number(double v) { return Cell{Number, {}, v, false}; }
  static Cell empty() { return Cell{}; }
  static Cell boolean(bool b) { return Cell{Boolean, {}, 0.0, b}; }
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

void write_csv(const Table& t, std::ostream& os) {
  for (size_t j = 0; j < t.columns.size(); ++j) {
    if (j) os << ',';
    os << csv_escape(t.columns[j]);
  }
  os << "\r\n";
  for (const auto& row : t.rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) os << ',';
      const Cell& c = row[j];
      switch (c.kind) {
        case Cell::Text: os << csv_escape(c.text); break;
        case Cell::Number: os << fmt_double(c.num); break;
        case Cell::Boolean: os << (c.flag ? "true" : "false"); break;
        case Cell::Empty: break;
      }
    }
    os << "\r\n";
  }
}

void write_json(const Table& t, std::ostream& os) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (size_t j = 0; j < row.size(); ++j) {
      const Cell& c = row[j];
      switch (c.kind) {
        case Cell::Text: obj[t.columns[j]] = c.text; break;
        case Cell::Number:
          // JSON has no inf literal; non-finite values go out as strings.
          if (std::isfinite(c.num)) obj[t.columns[j]] = c.num;
          else obj[t.columns[j]] = fmt_double(c.num);
          break;
        case Cell::Boolean: obj[t.columns[j]] = c.flag; break;
        case Cell::Empty: obj[t.columns[j]] = nullptr; break;
      }
    }
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << "\n";
}

struct CommonOpts {
  std::string case_path;
  std::string coords = "voltages";
  std::string method = "bnb";
  double budget = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string format = "csv";
  double tol = 1e-10;
  int max_iter = 100000;
  bool timings = false;
  bool serial = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_budget = true) {
  cmd->add_option("--case", o.case_path, "case file (JSON)")->required();
  cmd->add_option("--coords", o.coords, "algebraic coordinates")
      ->check(CLI::IsMember({"voltages", "currents"}));
  cmd->add_option("--method", o.method,
                  "bnb | greedy-in | greedy-out | exhaustive | all");
  if (with_budget) cmd->add_option("--budget", o.budget, "sensor cost budget");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", o.out_path, "output file (default: stdout)");
  cmd->add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--tol", o.tol, "fixed-point relative tolerance");
  cmd->add_option("--max-iter", o.max_iter, "fixed-point iteration cap");
  cmd->add_flag("--timings", o.timings,
                "emit real wall times (off: wall_time prints as 0)");
  cmd->add_flag("--serial", o.serial, "force the serial evaluation kernel");
}

struct LoadedCase {
  pmuplace::CaseDefinition def;
  pmuplace::DescriptorSystem sys;
  std::vector<pmuplace::MeasurementCandidate> candidates;
};

LoadedCase load_for_run(const CommonOpts& o) {
  LoadedCase lc;
  lc.def = pmuplace::load_case(o.case_path);
  // Rejects operating points inconsistent with the machine equations before
  // anything is linearized around them.
  pmuplace::initialize_generators(lc.def);
  auto lin = pmuplace::linearize(lc.def);
  lc.sys = pmuplace::discretize(lin, lc.def);
  lc.candidates = pmuplace::build_candidates(lc.def, lc.sys);
  if (o.coords == "currents") {
    Eigen::MatrixXd Y = pmuplace::build_admittance(lc.def);
    auto [tsys, tcands] = pmuplace::transform_algebraic_coordinates(
        lc.sys, lc.candidates, Y);
    lc.sys = std::move(tsys);
    lc.candidates = std::move(tcands);
  }
  return lc;
}

pmuplace::PlacementProblem make_problem(const LoadedCase& lc,
                                        const CommonOpts& o, double budget) {
  pmuplace::PlacementProblem prob;
  prob.sys = lc.sys;
  prob.candidates = lc.candidates;
  prob.budget = budget;
  prob.riccati.tol = o.tol;
  prob.riccati.max_iter = o.max_iter;
  return prob;
}

std::vector<Method> parse_methods(const std::string& m, bool allow_all) {
  if (m == "bnb") return {Method::BranchAndBound};
  if (m == "greedy-in") return {Method::GreedyBestIn};
  if (m == "greedy-out") return {Method::GreedyWorstOut};
  if (m == "exhaustive") return {Method::Exhaustive};
  if (m == "all" && allow_all)
    return {Method::BranchAndBound, Method::GreedyBestIn,
            Method::GreedyWorstOut};
  throw CLI::ValidationError("--method", "unknown method '" + m + "'");
}

pmuplace::PlacementSolution run_method(const pmuplace::PlacementProblem& prob,
                                       Method m) {
  switch (m) {
    case Method::BranchAndBound: return pmuplace::branch_and_bound(prob);
    case Method::GreedyBestIn: return pmuplace::greedy_best_in(prob);
    case Method::GreedyWorstOut: return pmuplace::greedy_worst_out(prob);
    case Method::Exhaustive: return pmuplace::exhaustive(prob);
  }
  throw std::logic_error("unreachable");
}

std::string selected_ids(const pmuplace::PlacementSolution& sol,
                         const std::vector<pmuplace::MeasurementCandidate>& cands) {
  std::vector<std::string> ids;
  for (int i : sol.gamma.indices()) ids.push_back(cands[static_cast<size_t>(i)].id);
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += ids[i];
  }
  return out;
}

void emit(const Table& t, const CommonOpts& o) {
  if (o.out_path.empty()) {
    if (o.format == "csv") write_csv(t, std::cout);
    else write_json(t, std::cout);
    return;
  }
  std::ofstream f(o.out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + o.out_path);
  if (o.format == "csv") write_csv(t, f);
  else write_json(t, f);
}

std::vector<Cell> solution_row(const pmuplace::PlacementSolution& sol,
                               const LoadedCase& lc, double budget,
                               bool timings) {
  std::vector<Cell> row;
  row.push_back(Cell::str(pmuplace::method_name(sol.method)));
  row.push_back(Cell::number(budget));
  row.push_back(Cell::str(selected_ids(sol, lc.candidates)));
  row.push_back(Cell::number(sol.objective));
  if (sol.certificate) row.push_back(Cell::number(sol.certificate->gap));
  else row.push_back(Cell::empty());
  row.push_back(Cell::number(timings ? sol.wall_time : 0.0));
  return row;
}

const std::vector<std::string> kSolveColumns = {
    "method", "budget", "selected", "objective", "gap", "wall_time"};

int cmd_solve(const CommonOpts& o) {
  LoadedCase lc = load_for_run(o);
  std::vector<Method> methods = parse_methods(o.method, /*allow_all=*/false);
  pmuplace::PlacementProblem prob = make_problem(lc, o, o.budget);
  pmuplace::PlacementSolution sol = run_method(prob, methods.front());

  Table t;
  t.columns = kSolveColumns;
  t.rows.push_back(solution_row(sol, lc, o.budget, o.timings));
  emit(t, o);
  return (sol.non_detectable || sol.budget_infeasible) ? 2 : 0;
}

int cmd_budget_sweep(const CommonOpts& o, int b_min, int b_max) {
  if (b_min > b_max)
    throw CLI::ValidationError("--b-min", "b-min must not exceed b-max");
  LoadedCase lc = load_for_run(o);
  std::vector<Method> methods = parse_methods(o.method, /*allow_all=*/true);

  struct Rec {
    std::string method;
    int budget;
    pmuplace::PlacementSolution sol;
  };
  std::vector<Rec> recs;
  for (Method m : methods)
    for (int b = b_min; b <= b_max; ++b) {
      pmuplace::PlacementProblem prob = make_problem(lc, o, b);
      recs.push_back({pmuplace::method_name(m), b, run_method(prob, m)});
    }
  std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.budget < b.budget;
  });

  Table t;
  t.columns = kSolveColumns;
  bool bad = false;
  for (const auto& r : recs) {
    t.rows.push_back(solution_row(r.sol, lc, r.budget, o.timings));
    bad = bad || r.sol.non_detectable || r.sol.budget_infeasible;
  }
  emit(t, o);
  return bad ? 2 : 0;
}

int cmd_noise_sweep(const CommonOpts& o, int equation_index, double scale_min,
                    double scale_max, int points) {
  if (points < 1)
    throw CLI::ValidationError("--points", "need at least one point");
  if (scale_min <= 0 || scale_max < scale_min)
    throw CLI::ValidationError("--scale-min",
                               "scales must be positive and ordered");
  LoadedCase lc = load_for_run(o);
  if (equation_index < 0 || equation_index >= lc.sys.ntilde())
    throw CLI::ValidationError("--equation-index",
                               "outside the process-noise diagonal");
  std::vector<Method> methods = parse_methods(o.method, /*allow_all=*/true);

  struct Rec {
    double scale;
    std::string method;
    pmuplace::PlacementSolution sol;
  };
  std::vector<Rec> recs;
  for (int k = 0; k < points; ++k) {
    double scale =
        points == 1
            ? scale_min
            : scale_min * std::pow(scale_max / scale_min,
                                   static_cast<double>(k) / (points - 1));
    LoadedCase scaled = lc;
    scaled.sys.Q(equation_index, equation_index) *= scale;
    for (Method m : methods) {
      pmuplace::PlacementProblem prob = make_problem(scaled, o, o.budget);
      recs.push_back({scale, pmuplace::method_name(m), run_method(prob, m)});
    }
  }
  std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    if (a.scale != b.scale) return a.scale < b.scale;
    return a.method < b.method;
  });

  Table t;
  t.columns = {"scale", "method", "budget", "trace"};
  bool bad = false;
  for (const auto& r : recs) {
    t.rows.push_back({Cell::number(r.scale), Cell::str(r.method),
                      Cell::number(o.budget), Cell::number(r.sol.objective)});
    bad = bad || r.sol.non_detectable || r.sol.budget_infeasible;
  }
  emit(t, o);
  return bad ? 2 : 0;
}

int cmd_condition_compare(const CommonOpts& o, int configs_per_count,
                          int count_min, int count_max) {
  if (configs_per_count < 1)
    throw CLI::ValidationError("--configs-per-count", "must be positive");
  CommonOpts ov = o;
  ov.coords = "voltages";
  LoadedCase lc = load_for_run(ov);
  const int M = static_cast<int>(lc.candidates.size());
  if (count_min < 1 || count_max > M || count_min > count_max)
    throw CLI::ValidationError("--count-min",
                               "count range must lie within 1..M");

  Eigen::MatrixXd Y = pmuplace::build_admittance(lc.def);
  auto [csys, ccands] =
      pmuplace::transform_algebraic_coordinates(lc.sys, lc.candidates, Y);

  pmuplace::SteadyStateOptions ropts;
  ropts.tol = o.tol;
  ropts.max_iter = o.max_iter;

  constexpr int kResampleCap = 200;
  pmuplace::Rng rng(o.seed);

  struct Rec {
    int count;
    std::string coords;
    double avg_cond;
    int samples;
    std::string note;
  };
  std::vector<Rec> recs;

  for (int count = count_min; count <= count_max; ++count) {
    // Draw subsets in Voltages coordinates; reuse the same subsets for the
    // Currents run so the comparison is paired.
    std::vector<std::uint64_t> masks;
    int attempts = 0;
    bool insufficient = false;
    while (static_cast<int>(masks.size()) < configs_per_count) {
      if (attempts >= kResampleCap) {
        insufficient = true;
        break;
      }
      ++attempts;
      std::vector<int> pick = pmuplace::sample_without_replacement(
          rng, M, count);
      std::uint64_t mask = 0;
      for (int i : pick) mask |= std::uint64_t{1} << i;
      auto ev = pmuplace::evaluate_subsets(lc.sys, lc.candidates, {mask},
                                           ropts, o.serial);
      if (ev.front().converged) masks.push_back(mask);
    }

    auto run = [&](const pmuplace::DescriptorSystem& sys,
                   const std::vector<pmuplace::MeasurementCandidate>& cands,
                   const char* name) {
      auto evals = pmuplace::evaluate_subsets(sys, cands, masks, ropts,
                                              o.serial);
      double sum = 0.0;
      int good = 0;
      for (const auto& ev : evals)
        if (ev.converged && std::isfinite(ev.condition_number)) {
          sum += ev.condition_number;
          ++good;
        }
      Rec r;
      r.count = count;
      r.coords = name;
      r.avg_cond = good > 0 ? sum / good : kInf;
      r.samples = good;
      r.note = insufficient ? "insufficient convergent samples" : "";
      recs.push_back(std::move(r));
    };
    run(lc.sys, lc.candidates, "voltages");
    run(csys, ccands, "currents");
  }

  std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    if (a.count != b.count) return a.count < b.count;
    return a.coords < b.coords;
  });

  Table t;
  t.columns = {"count", "coordinates", "avg_condition_number",
               "convergent_samples", "note"};
  for (const auto& r : recs)
    t.rows.push_back({Cell::number(r.count), Cell::str(r.coords),
                      Cell::number(r.avg_cond), Cell::number(r.samples),
                      Cell::str(r.note)});
  emit(t, o);
  return 0;
}

int cmd_certify(const CommonOpts& o, bool debug_perturb_p) {
  LoadedCase lc = load_for_run(o);
  std::vector<Method> methods = parse_methods(o.method, /*allow_all=*/false);
  if (methods.front() != Method::BranchAndBound &&
      methods.front() != Method::Exhaustive)
    throw CLI::ValidationError("--method",
                               "certify requires bnb or exhaustive");
  pmuplace::PlacementProblem prob = make_problem(lc, o, o.budget);
  pmuplace::PlacementSolution sol = run_method(prob, methods.front());
  if (sol.non_detectable || sol.budget_infeasible) return 2;

  Eigen::MatrixXd S = pmuplace::assemble_precision(lc.candidates, sol.gamma);
  pmuplace::SteadyStateResult ss =
      pmuplace::solve_steady_state(lc.sys, S, prob.riccati);
  Eigen::MatrixXd P = ss.P_inf;
  if (debug_perturb_p) {
    // Deliberately break the fixed point to exercise the failure path.
    P *= 1.5;
  }
  pmuplace::CertificateReport rep =
      pmuplace::verify_certificate(lc.sys, S, P);

  Table t;
  t.columns = {"method", "budget", "selected", "objective",
               "fixed_point_residual", "schur_pair_min_eig", "theta_min_eig",
               "passed"};
  t.rows.push_back({Cell::str(pmuplace::method_name(sol.method)),
                    Cell::number(o.budget),
                    Cell::str(selected_ids(sol, lc.candidates)),
                    Cell::number(sol.objective),
                    Cell::number(rep.fixed_point_residual),
                    Cell::number(rep.schur_pair_min_eig),
                    Cell::number(rep.theta_min_eig),
                    Cell::boolean(rep.passed)});
  emit(t, o);
  return rep.passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PMU placement for descriptor Kalman filters"};
  app.require_subcommand(1);

  CommonOpts o;
  int b_min = 1, b_max = 1;
  int equation_index = 0;
  double scale_min = 0.1, scale_max = 10.0;
  int points = 7;
  int configs_per_count = 20;
  int count_min = 1, count_max = 1;
  bool count_max_set = false;
  bool debug_perturb_p = false;

  CLI::App* solve = app.add_subcommand("solve", "single placement run");
  add_common(solve, o);

  CLI::App* sweep =
      app.add_subcommand("budget-sweep", "one record per budget per method");
  add_common(sweep, o);
  sweep->add_option("--b-min", b_min, "smallest budget")->required();
  sweep->add_option("--b-max", b_max, "largest budget")->required();

  CLI::App* noise = app.add_subcommand(
      "noise-sweep", "rescale one process-noise entry across a log range");
  add_common(noise, o);
  noise->add_option("--equation-index", equation_index,
                    "row of Q to rescale")->required();
  noise->add_option("--scale-min", scale_min, "smallest scale factor");
  noise->add_option("--scale-max", scale_max, "largest scale factor");
  noise->add_option("--points", points, "number of log-spaced scales");

  CLI::App* cond = app.add_subcommand(
      "condition-compare",
      "average P condition number, voltage vs current coordinates");
  add_common(cond, o, /*with_budget=*/false);
  cond->add_option("--configs-per-count", configs_per_count,
                   "random subsets per measurement count");
  cond->add_option("--count-min", count_min, "smallest measurement count");
  CLI::Option* cm = cond->add_option("--count-max", count_max,
                                     "largest measurement count (default M)");
  cond->callback([&] { count_max_set = cm->count() > 0; });

  CLI::App* certify = app.add_subcommand(
      "certify", "solve, then check the semidefinite feasibility certificate");
  add_common(certify, o);
  certify->add_flag("--debug-perturb-p", debug_perturb_p,
                    "perturb P before certification (forces failure)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(o);
    if (sweep->parsed()) return cmd_budget_sweep(o, b_min, b_max);
    if (noise->parsed())
      return cmd_noise_sweep(o, equation_index, scale_min, scale_max, points);
    if (cond->parsed()) {
      if (!count_max_set) {
        CommonOpts ov = o;
        ov.coords = "voltages";
        count_max = static_cast<int>(load_for_run(ov).candidates.size());
      }
      return cmd_condition_compare(o, configs_per_count, count_min, count_max);
    }
    if (certify->parsed()) return cmd_certify(o, debug_perturb_p);
  } catch (const pmuplace::CaseFormatError& e) {
    std::cerr << "case error: " << e.what() << "\n";
    return 1;
  } catch (const pmuplace::RefusedScale& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 1;
  } catch (const pmuplace::NotDetectable& e) {
    std::cerr << "not detectable: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
