#include "pmuplace/power_system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmuplace/errors.hpp"

namespace pmuplace {

using json = nlohmann::ordered_json;

int CaseDefinition::bus_index(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  throw ModelError("unknown bus id " + std::to_string(bus_id));
}

int CaseDefinition::n_g() const {
  int count = 0;
  for (const auto& b : buses)
    if (!b.is_boundary) count += 2;
  return count;
}

std::vector<int> CaseDefinition::non_boundary() const {
  std::vector<int> out;
  for (size_t i = 0; i < buses.size(); ++i)
    if (!buses[i].is_boundary) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw CaseFormatError(msg, path);
}

double require_number(const json& j, const std::string& path,
                      const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing required field");
  if (!j[key].is_number()) fail(path + "." + key, "expected a number");
  return j[key].get<double>();
}

double optional_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  return j[key].get<double>();
}

int require_int(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing required field");
  if (!j[key].is_number_integer()) fail(path + "." + key, "expected an integer");
  return j[key].get<int>();
}

const json& require_array(const json& j, const std::string& path,
                          const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing required field");
  if (!j[key].is_array()) fail(path + "." + key, "expected an array");
  return j[key];
}

struct GenFrame {
  // Operating quantities of one machine needed by f, g and their Jacobians.
  double delta, omega, ed, eq;
  double vre, vim;
};

}  // namespace

CaseDefinition parse_case(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1;
    size_t limit = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (size_t i = 0; i < limit; ++i)
      if (text[i] == '\n') ++line;
    throw CaseFormatError(e.what(), origin + ":" + std::to_string(line));
  }

  CaseDefinition c;
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    fail("schema_version", "missing or non-integer");
  if (doc["schema_version"].get<int>() != 1)
    fail("schema_version", "unsupported version " + doc["schema_version"].dump());

  c.name = doc.value("name", std::string{});
  c.description = doc.value("description", std::string{});
  c.step_size = require_number(doc, "", "step_size");
  if (c.step_size <= 0) fail("step_size", "must be > 0");
  double f_hz = optional_number(doc, "base_frequency_hz", 60.0);
  if (f_hz <= 0) fail("base_frequency_hz", "must be > 0");
  c.omega_b = 2.0 * M_PI * f_hz;

  std::set<int> bus_ids;
  for (const auto& [i, jb] : require_array(doc, "", "buses").items()) {
    std::string path = "buses[" + i + "]";
    BusSpec b;
    b.id = require_int(jb, path, "id");
    b.is_boundary = jb.value("is_boundary", false);
    if (!bus_ids.insert(b.id).second) fail(path, "duplicate bus id");
    c.buses.push_back(b);
  }
  if (c.buses.empty()) fail("buses", "at least one bus is required");

  auto check_bus = [&](int id, const std::string& path) {
    if (!bus_ids.count(id))
      fail(path, "references undeclared bus " + std::to_string(id));
  };

  if (doc.contains("branches"))
    for (const auto& [i, jb] : doc["branches"].items()) {
      std::string path = "branches[" + i + "]";
      BranchSpec br;
      br.from = require_int(jb, path, "from");
      br.to = require_int(jb, path, "to");
      br.r = require_number(jb, path, "r");
      br.x = require_number(jb, path, "x");
      br.b = optional_number(jb, "b", 0.0);
      check_bus(br.from, path);
      check_bus(br.to, path);
      if (br.from == br.to) fail(path, "self-loop branch");
      if (br.r == 0 && br.x == 0) fail(path, "zero series impedance");
      c.branches.push_back(br);
    }

  if (doc.contains("loads"))
    for (const auto& [i, jl] : doc["loads"].items()) {
      std::string path = "loads[" + i + "]";
      LoadSpec l;
      l.bus = require_int(jl, path, "bus");
      l.p = require_number(jl, path, "p");
      l.q = require_number(jl, path, "q");
      check_bus(l.bus, path);
      c.loads.push_back(l);
    }

  std::set<int> gen_buses;
  if (doc.contains("generators"))
    for (const auto& [i, jg] : doc["generators"].items()) {
      std::string path = "generators[" + i + "]";
      GeneratorSpec g;
      g.bus = require_int(jg, path, "bus");
      g.H = require_number(jg, path, "H");
      g.D = require_number(jg, path, "D");
      g.xd = require_number(jg, path, "x_d");
      g.xdp = require_number(jg, path, "x_d_prime");
      g.xq = require_number(jg, path, "x_q");
      g.xqp = require_number(jg, path, "x_q_prime");
      g.ra = require_number(jg, path, "r_a");
      g.Td0 = require_number(jg, path, "T_d0_prime");
      g.Tq0 = require_number(jg, path, "T_q0_prime");
      check_bus(g.bus, path);
      if (!gen_buses.insert(g.bus).second)
        fail(path, "second generator on bus " + std::to_string(g.bus));
      if (g.H <= 0 || g.Td0 <= 0 || g.Tq0 <= 0)
        fail(path, "H and time constants must be > 0");
      if (g.xdp <= 0 || g.xqp <= 0)
        fail(path, "transient reactances must be > 0");
      for (const auto& b : c.buses)
        if (b.id == g.bus && b.is_boundary)
          fail(path, "generator on boundary bus " + std::to_string(g.bus));
      c.generators.push_back(g);
    }

  if (!doc.contains("operating_point") || !doc["operating_point"].is_object())
    fail("operating_point", "missing required object");
  const json& op = doc["operating_point"];
  c.voltages.assign(c.buses.size(), {0.0, 0.0});
  std::set<int> seen_v;
  for (const auto& [i, jv] : require_array(op, "operating_point", "voltages").items()) {
    std::string path = "operating_point.voltages[" + i + "]";
    int bus = require_int(jv, path, "bus");
    double mag = require_number(jv, path, "magnitude");
    double ang = require_number(jv, path, "angle");
    check_bus(bus, path);
    if (mag <= 0) fail(path, "magnitude must be > 0");
    if (!seen_v.insert(bus).second) fail(path, "duplicate bus voltage");
    c.voltages[c.bus_index(bus)] = std::polar(mag, ang);
  }
  if (seen_v.size() != c.buses.size())
    fail("operating_point.voltages", "every bus needs an operating voltage");

  c.generator_inputs.assign(c.generators.size(), std::nullopt);
  if (op.contains("generator_inputs"))
    for (const auto& [i, jg] : op["generator_inputs"].items()) {
      std::string path = "operating_point.generator_inputs[" + i + "]";
      int bus = require_int(jg, path, "bus");
      GeneratorInputs gi;
      gi.Pm = require_number(jg, path, "P_m");
      gi.Ef = require_number(jg, path, "E_f");
      bool found = false;
      for (size_t k = 0; k < c.generators.size(); ++k)
        if (c.generators[k].bus == bus) {
          if (c.generator_inputs[k].has_value()) fail(path, "duplicate entry");
          c.generator_inputs[k] = gi;
          found = true;
        }
      if (!found) fail(path, "no generator on bus " + std::to_string(bus));
    }

  if (!doc.contains("process_noise") || !doc["process_noise"].is_object())
    fail("process_noise", "missing required object");
  const json& pn = doc["process_noise"];
  auto read_noise = [&](const std::string& key, int expected) {
    const json& arr = require_array(pn, "process_noise", key);
    if (static_cast<int>(arr.size()) != expected)
      fail("process_noise." + key,
           "expected " + std::to_string(expected) + " entries, got " +
               std::to_string(arr.size()));
    Eigen::VectorXd out(expected);
    for (int i = 0; i < expected; ++i) {
      out(i) = arr[i].get<double>();
      if (!(out(i) > 0))
        fail("process_noise." + key + "[" + std::to_string(i) + "]",
             "entries must be > 0");
    }
    return out;
  };
  c.q_differential = read_noise("differential", c.n_d());
  c.q_algebraic = read_noise("algebraic", c.n_g());

  if (doc.contains("candidates"))
    for (const auto& [i, jc] : doc["candidates"].items()) {
      std::string path = "candidates[" + i + "]";
      CandidateSpec cs;
      std::string kind = jc.value("kind", std::string{});
      if (kind == "node_voltage") cs.kind = CandidateKind::NodeVoltage;
      else if (kind == "branch_current") cs.kind = CandidateKind::BranchCurrent;
      else if (kind == "node_injected_current")
        cs.kind = CandidateKind::NodeInjectedCurrent;
      else fail(path + ".kind", "expected node_voltage, branch_current, or "
                                "node_injected_current");
      if (cs.kind == CandidateKind::BranchCurrent) {
        cs.from = require_int(jc, path, "from");
        cs.to = require_int(jc, path, "to");
        check_bus(cs.from, path);
        check_bus(cs.to, path);
        bool exists = false;
        for (const auto& br : c.branches)
          exists = exists || (br.from == cs.from && br.to == cs.to) ||
                   (br.from == cs.to && br.to == cs.from);
        if (!exists) fail(path, "no branch between " + std::to_string(cs.from) +
                                " and " + std::to_string(cs.to));
      } else {
        cs.bus = require_int(jc, path, "bus");
        check_bus(cs.bus, path);
      }
      const json& rd = require_array(jc, path, "r_diag");
      if (rd.size() != 2) fail(path + ".r_diag", "expected 2 entries");
      cs.r_diag << rd[0].get<double>(), rd[1].get<double>();
      if (!(cs.r_diag(0) > 0) || !(cs.r_diag(1) > 0))
        fail(path + ".r_diag", "entries must be > 0");
      cs.cost = optional_number(jc, "cost", 1.0);
      if (cs.cost < 0) fail(path + ".cost", "cost must be >= 0");
      c.candidates.push_back(cs);
    }

  return c;
}

CaseDefinition load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseFormatError("cannot open case file", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str(), path);
}

Eigen::MatrixXcd build_admittance_complex(const CaseDefinition& c) {
  const int n = c.n_bus();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  std::vector<int> degree(n, 0);
  for (const auto& br : c.branches) {
    int i = c.bus_index(br.from), j = c.bus_index(br.to);
    std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    std::complex<double> half_shunt(0.0, br.b / 2.0);
    Y(i, i) += y + half_shunt;
    Y(j, j) += y + half_shunt;
    Y(i, j) -= y;
    Y(j, i) -= y;
    ++degree[i];
    ++degree[j];
  }
  for (int i = 0; i < n; ++i)
    if (degree[i] == 0 && n > 1)
      throw ModelError("bus " + std::to_string(c.buses[i].id) +
                       " has no incident branch");
  for (const auto& l : c.loads) {
    int k = c.bus_index(l.bus);
    std::complex<double> V = c.voltages[k];
    Y(k, k) += std::conj(std::complex<double>(l.p, l.q)) / std::norm(V);
  }
  return Y;
}

Eigen::MatrixXd build_admittance(const CaseDefinition& c) {
  Eigen::MatrixXcd Yc = build_admittance_complex(c);
  const int n = c.n_bus();
  Eigen::MatrixXd Y(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double G = Yc(i, j).real(), B = Yc(i, j).imag();
      Y(2 * i, 2 * j) = G;
      Y(2 * i, 2 * j + 1) = -B;
      Y(2 * i + 1, 2 * j) = B;
      Y(2 * i + 1, 2 * j + 1) = G;
    }
  return Y;
}

Eigen::VectorXd operating_algebraic_vector(const CaseDefinition& c) {
  Eigen::VectorXd v(c.n_a());
  for (int i = 0; i < c.n_bus(); ++i) {
    v(2 * i) = c.voltages[i].real();
    v(2 * i + 1) = c.voltages[i].imag();
  }
  return v;
}

namespace {

// (id, iq) from terminal voltage and transient EMFs through the stator
// algebra; det = ra^2 + x'_d x'_q > 0.
void stator_currents(const GeneratorSpec& g, double vd, double vq, double ed,
                     double eq, double& id, double& iq) {
  double det = g.ra * g.ra + g.xdp * g.xqp;
  double a1 = vd - ed, a2 = vq - eq;
  id = (-g.ra * a1 - g.xqp * a2) / det;
  iq = (g.xdp * a1 - g.ra * a2) / det;
}

struct InitResult {
  Eigen::VectorXd y0;
  std::vector<GeneratorInputs> inputs;  // resolved (derived or supplied)
};

InitResult initialize_full(const CaseDefinition& c) {
  Eigen::MatrixXcd Yc = build_admittance_complex(c);
  Eigen::VectorXcd vop(c.n_bus());
  for (int i = 0; i < c.n_bus(); ++i) vop(i) = c.voltages[i];
  Eigen::VectorXcd inj = Yc * vop;

  InitResult out;
  out.y0.resize(c.n_d());
  out.inputs.resize(c.generators.size());
  for (size_t gi = 0; gi < c.generators.size(); ++gi) {
    const auto& g = c.generators[gi];
    int k = c.bus_index(g.bus);
    std::complex<double> V = vop(k), I = inj(k);
    std::complex<double> EQ = V + std::complex<double>(g.ra, g.xq) * I;
    double delta = std::atan2(EQ.imag(), EQ.real());
    double sd = std::sin(delta), cd = std::cos(delta);
    double vd = sd * V.real() - cd * V.imag();
    double vq = cd * V.real() + sd * V.imag();
    double id = sd * I.real() - cd * I.imag();
    double iq = cd * I.real() + sd * I.imag();
    double ed = vd + g.ra * id - g.xqp * iq;
    double eq = vq + g.ra * iq + g.xdp * id;
    double Pe = ed * id + eq * iq + (g.xqp - g.xdp) * id * iq;
    out.y0(4 * gi + 0) = delta;
    out.y0(4 * gi + 1) = 1.0;
    out.y0(4 * gi + 2) = ed;
    out.y0(4 * gi + 3) = eq;
    GeneratorInputs derived{Pe, eq + (g.xd - g.xdp) * id};
    out.inputs[gi] = c.generator_inputs[gi].value_or(derived);
  }
  return out;
}

Eigen::VectorXd eval_f(const CaseDefinition& c, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& v,
                       const std::vector<GeneratorInputs>& inputs) {
  Eigen::VectorXd f(c.n_d());
  for (size_t gi = 0; gi < c.generators.size(); ++gi) {
    const auto& g = c.generators[gi];
    int k = c.bus_index(g.bus);
    double delta = y(4 * gi + 0), omega = y(4 * gi + 1);
    double ed = y(4 * gi + 2), eq = y(4 * gi + 3);
    double sd = std::sin(delta), cd = std::cos(delta);
    double vre = v(2 * k), vim = v(2 * k + 1);
    double vd = sd * vre - cd * vim;
    double vq = cd * vre + sd * vim;
    double id, iq;
    stator_currents(g, vd, vq, ed, eq, id, iq);
    double Pe = ed * id + eq * iq + (g.xqp - g.xdp) * id * iq;
    f(4 * gi + 0) = c.omega_b * (omega - 1.0);
    f(4 * gi + 1) = (inputs[gi].Pm - Pe - g.D * (omega - 1.0)) / (2.0 * g.H);
    f(4 * gi + 2) = (-ed + (g.xq - g.xqp) * iq) / g.Tq0;
    f(4 * gi + 3) = (-eq - (g.xd - g.xdp) * id + inputs[gi].Ef) / g.Td0;
  }
  return f;
}

Eigen::VectorXd eval_g(const CaseDefinition& c, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& v, const Eigen::MatrixXd& Yx) {
  Eigen::VectorXd mismatch = Yx * v;
  for (size_t gi = 0; gi < c.generators.size(); ++gi) {
    const auto& g = c.generators[gi];
    int k = c.bus_index(g.bus);
    double delta = y(4 * gi + 0);
    double ed = y(4 * gi + 2), eq = y(4 * gi + 3);
    double sd = std::sin(delta), cd = std::cos(delta);
    double vre = v(2 * k), vim = v(2 * k + 1);
    double vd = sd * vre - cd * vim;
    double vq = cd * vre + sd * vim;
    double id, iq;
    stator_currents(g, vd, vq, ed, eq, id, iq);
    mismatch(2 * k) -= sd * id + cd * iq;
    mismatch(2 * k + 1) -= -cd * id + sd * iq;
  }
  Eigen::VectorXd gvec(c.n_g());
  int row = 0;
  for (int bi : c.non_boundary()) {
    gvec(row++) = mismatch(2 * bi);
    gvec(row++) = mismatch(2 * bi + 1);
  }
  return gvec;
}

}  // namespace

Eigen::VectorXd initialize_generators(const CaseDefinition& c) {
  InitResult init = initialize_full(c);
  Eigen::VectorXd v0 = operating_algebraic_vector(c);
  Eigen::VectorXd f = eval_f(c, init.y0, v0, init.inputs);
  double resid = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (resid > 1e-8)
    throw ModelError(
        "generator initialization residual " + std::to_string(resid) +
        " exceeds 1e-8; operating point or supplied P_m/E_f inconsistent");
  return init.y0;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate_dae(
    const CaseDefinition& c, const Eigen::VectorXd& y,
    const Eigen::VectorXd& v) {
  InitResult init = initialize_full(c);
  Eigen::MatrixXd Yx = build_admittance(c);
  return {eval_f(c, y, v, init.inputs), eval_g(c, y, v, Yx)};
}

LinearizedModel linearize(const CaseDefinition& c) {
  InitResult init = initialize_full(c);
  Eigen::VectorXd v0 = operating_algebraic_vector(c);
  Eigen::MatrixXd Yx = build_admittance(c);
  const int nd = c.n_d(), na = c.n_a();

  LinearizedModel lin;
  lin.F_y = Eigen::MatrixXd::Zero(nd, nd);
  lin.F_v = Eigen::MatrixXd::Zero(nd, na);
  Eigen::MatrixXd Gy_full = Eigen::MatrixXd::Zero(2 * c.n_bus(), nd);
  Eigen::MatrixXd Gv_full = Yx;

  for (size_t gi = 0; gi < c.generators.size(); ++gi) {
    const auto& g = c.generators[gi];
    int k = c.bus_index(g.bus);
    double delta = init.y0(4 * gi + 0);
    double ed = init.y0(4 * gi + 2), eq = init.y0(4 * gi + 3);
    double sd = std::sin(delta), cd = std::cos(delta);
    double vre = v0(2 * k), vim = v0(2 * k + 1);
    double vd = sd * vre - cd * vim;
    double vq = cd * vre + sd * vim;
    double id, iq;
    stator_currents(g, vd, vq, ed, eq, id, iq);
    double det = g.ra * g.ra + g.xdp * g.xqp;

    // d(id,iq)/d(a1,a2) with a = (vd - ed, vq - eq).
    Eigen::Matrix2d J_ia;
    J_ia << -g.ra / det, -g.xqp / det, g.xdp / det, -g.ra / det;
    // d(a1,a2)/d(delta, ed, eq, vre, vim).
    Eigen::Matrix<double, 2, 5> J_a;
    J_a << vq, -1.0, 0.0, sd, -cd,
          -vd, 0.0, -1.0, cd, sd;
    Eigen::Matrix<double, 2, 5> J_i = J_ia * J_a;

    double pPid = ed + (g.xqp - g.xdp) * iq;
    double pPiq = eq + (g.xqp - g.xdp) * id;
    Eigen::Matrix<double, 1, 5> dPe = pPid * J_i.row(0) + pPiq * J_i.row(1);
    dPe(1) += id;  // direct ed term of P_e
    dPe(2) += iq;  // direct eq term

    const int r = static_cast<int>(4 * gi);
    const int cols_y[3] = {r + 0, r + 2, r + 3};  // delta, ed, eq
    lin.F_y(r + 0, r + 1) = c.omega_b;
    lin.F_y(r + 1, r + 1) = -g.D / (2.0 * g.H);
    for (int s = 0; s < 3; ++s) {
      lin.F_y(r + 1, cols_y[s]) = -dPe(s) / (2.0 * g.H);
      lin.F_y(r + 2, cols_y[s]) = (g.xq - g.xqp) * J_i(1, s) / g.Tq0;
      lin.F_y(r + 3, cols_y[s]) = -(g.xd - g.xdp) * J_i(0, s) / g.Td0;
    }
    lin.F_y(r + 2, r + 2) += -1.0 / g.Tq0;
    lin.F_y(r + 3, r + 3) += -1.0 / g.Td0;
    const int cols_v[2] = {2 * k, 2 * k + 1};
    for (int s = 0; s < 2; ++s) {
      lin.F_v(r + 1, cols_v[s]) = -dPe(3 + s) / (2.0 * g.H);
      lin.F_v(r + 2, cols_v[s]) = (g.xq - g.xqp) * J_i(1, 3 + s) / g.Tq0;
      lin.F_v(r + 3, cols_v[s]) = -(g.xd - g.xdp) * J_i(0, 3 + s) / g.Td0;
    }

    // Injected current in network coordinates: (ire, iim) = R(delta)' (id, iq).
    Eigen::Matrix2d Rt, dRt;
    Rt << sd, cd, -cd, sd;
    dRt << cd, -sd, sd, cd;
    Eigen::Matrix<double, 2, 5> J_inj = Rt * J_i;
    J_inj.col(0) += dRt * Eigen::Vector2d(id, iq);
    for (int s = 0; s < 3; ++s)
      Gy_full.block<2, 1>(2 * k, cols_y[s]) -= J_inj.col(s);
    for (int s = 0; s < 2; ++s)
      Gv_full.block<2, 1>(2 * k, cols_v[s]) -= J_inj.col(3 + s);
  }

  lin.G_y.resize(c.n_g(), nd);
  lin.G_v.resize(c.n_g(), na);
  int row = 0;
  for (int bi : c.non_boundary()) {
    lin.G_y.row(row) = Gy_full.row(2 * bi);
    lin.G_v.row(row) = Gv_full.row(2 * bi);
    lin.G_y.row(row + 1) = Gy_full.row(2 * bi + 1);
    lin.G_v.row(row + 1) = Gv_full.row(2 * bi + 1);
    row += 2;
  }

  lin.f0 = eval_f(c, init.y0, v0, init.inputs);
  lin.g0 = eval_g(c, init.y0, v0, Yx);
  return lin;
}

DescriptorSystem discretize(const LinearizedModel& lin,
                            const CaseDefinition& c) {
  const int nd = c.n_d(), na = c.n_a(), ng = c.n_g();
  const double h = c.step_size;
  InitResult init = initialize_full(c);
  Eigen::VectorXd v0 = operating_algebraic_vector(c);

  DescriptorSystem sys;
  sys.n_d = nd;
  sys.n_a = na;
  sys.n_g = ng;
  sys.E.setZero(nd + ng, nd + na);
  sys.E.topLeftCorner(nd, nd) =
      Eigen::MatrixXd::Identity(nd, nd) - h * lin.F_y;
  sys.E.topRightCorner(nd, na) = -h * lin.F_v;
  sys.E.bottomLeftCorner(ng, nd) = lin.G_y;
  sys.E.bottomRightCorner(ng, na) = lin.G_v;
  sys.A.setZero(nd + ng, nd + na);
  sys.A.topLeftCorner(nd, nd).setIdentity();
  sys.delta.resize(nd + ng);
  sys.delta.head(nd) = h * (lin.f0 - lin.F_y * init.y0 - lin.F_v * v0);
  sys.delta.tail(ng) = lin.G_y * init.y0 + lin.G_v * v0 - lin.g0;
  sys.Q = Eigen::MatrixXd::Zero(nd + ng, nd + ng);
  sys.Q.diagonal().head(nd) = c.q_differential;
  sys.Q.diagonal().tail(ng) = c.q_algebraic;
  sys.algebraic_coords = AlgebraicCoords::Voltages;

  static const char* gen_state[4] = {"delta", "omega", "edp", "eqp"};
  for (const auto& g : c.generators)
    for (int s = 0; s < 4; ++s)
      sys.state_labels.push_back(std::string(gen_state[s]) + "_b" +
                                 std::to_string(g.bus));
  for (const auto& b : c.buses) {
    sys.state_labels.push_back("vre_b" + std::to_string(b.id));
    sys.state_labels.push_back("vim_b" + std::to_string(b.id));
  }
  return sys;
}

std::vector<MeasurementCandidate> build_candidates(const CaseDefinition& c,
                                                   const DescriptorSystem& sys) {
  if (sys.algebraic_coords != AlgebraicCoords::Voltages)
    throw ModelError("candidates are built in Voltages coordinates");
  const int nd = sys.n_d, n = sys.n();
  Eigen::MatrixXd Yx = build_admittance(c);

  std::vector<MeasurementCandidate> out;
  std::set<std::string> ids;
  for (const auto& spec : c.candidates) {
    MeasurementCandidate mc;
    mc.kind = spec.kind;
    mc.cost = spec.cost;
    mc.R = spec.r_diag.asDiagonal();
    mc.C.setZero(2, n);
    switch (spec.kind) {
      case CandidateKind::NodeVoltage: {
        int k = c.bus_index(spec.bus);
        mc.id = "V_" + std::to_string(spec.bus);
        mc.C(0, nd + 2 * k) = 1.0;
        mc.C(1, nd + 2 * k + 1) = 1.0;
        break;
      }
      case CandidateKind::NodeInjectedCurrent: {
        int k = c.bus_index(spec.bus);
        mc.id = "Iinj_" + std::to_string(spec.bus);
        mc.C.block(0, nd, 2, c.n_a()) = Yx.middleRows(2 * k, 2);
        break;
      }
      case CandidateKind::BranchCurrent: {
        const BranchSpec* br = nullptr;
        for (const auto& cand : c.branches)
          if ((cand.from == spec.from && cand.to == spec.to) ||
              (cand.from == spec.to && cand.to == spec.from))
            br = &cand;
        if (!br)
          throw ModelError("candidate references missing branch " +
                           std::to_string(spec.from) + "-" +
                           std::to_string(spec.to));
        mc.id = "I_" + std::to_string(spec.from) + "-" + std::to_string(spec.to);
        std::complex<double> y = 1.0 / std::complex<double>(br->r, br->x);
        std::complex<double> yfrom = y + std::complex<double>(0.0, br->b / 2.0);
        int j = c.bus_index(spec.from), k = c.bus_index(spec.to);
        auto put = [&](int col_bus, std::complex<double> coef) {
          mc.C(0, nd + 2 * col_bus) += coef.real();
          mc.C(0, nd + 2 * col_bus + 1) += -coef.imag();
          mc.C(1, nd + 2 * col_bus) += coef.imag();
          mc.C(1, nd + 2 * col_bus + 1) += coef.real();
        };
        put(j, yfrom);
        put(k, -y);
        break;
      }
    }
    if (!ids.insert(mc.id).second)
      throw ModelError("duplicate candidate " + mc.id);
    out.push_back(std::move(mc));
  }
  return out;
}

}  // namespace pmuplace
