#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "pmuplace/types.hpp"

namespace pmuplace {

struct BusSpec {
  int id = 0;
  bool is_boundary = false;  // interface to an unmodeled region
};

struct BranchSpec {
  int from = 0, to = 0;
  double r = 0.0;  // series resistance, p.u.
  double x = 0.0;  // series reactance, p.u.
  double b = 0.0;  // total shunt susceptance, p.u.
};

struct LoadSpec {
  int bus = 0;
  double p = 0.0, q = 0.0;  // p.u., folded into Y as constant admittance
};

struct GeneratorSpec {
  int bus = 0;
  double H = 0.0;       // inertia, s
  double D = 0.0;       // damping, p.u.
  double xd = 0.0, xdp = 0.0;  // d-axis synchronous / transient reactance
  double xq = 0.0, xqp = 0.0;  // q-axis synchronous / transient reactance
  double ra = 0.0;      // armature resistance
  double Td0 = 0.0, Tq0 = 0.0;  // open-circuit transient time constants, s
};

struct GeneratorInputs {
  double Pm = 0.0;  // mechanical power
  double Ef = 0.0;  // field voltage
};

struct CandidateSpec {
  CandidateKind kind = CandidateKind::NodeVoltage;
  int bus = 0;               // NodeVoltage / NodeInjectedCurrent
  int from = 0, to = 0;      // BranchCurrent (measured at the `from` end)
  Eigen::Vector2d r_diag{1e-6, 1e-6};
  double cost = 1.0;
};

struct CaseDefinition {
  std::string name;
  std::string description;
  std::vector<BusSpec> buses;
  std::vector<BranchSpec> branches;
  std::vector<LoadSpec> loads;
  std::vector<GeneratorSpec> generators;
  std::vector<std::complex<double>> voltages;  // operating point, bus order
  std::vector<std::optional<GeneratorInputs>> generator_inputs;  // per generator
  double step_size = 0.01;   // h, seconds
  double omega_b = 2.0 * 3.14159265358979323846 * 60.0;
  Eigen::VectorXd q_differential;  // n_d entries
  Eigen::VectorXd q_algebraic;     // n_g entries
  std::vector<CandidateSpec> candidates;

  int bus_index(int bus_id) const;  // ModelError on unknown id
  int n_bus() const { return static_cast<int>(buses.size()); }
  int n_d() const { return 4 * static_cast<int>(generators.size()); }
  int n_a() const { return 2 * n_bus(); }
  int n_g() const;
  std::vector<int> non_boundary() const;
};

struct LinearizedModel {
  Eigen::MatrixXd F_y, F_v;  // generator ODE Jacobians at the operating point
  Eigen::MatrixXd G_y, G_v;  // network balance Jacobians
  Eigen::VectorXd f0, g0;    // residuals at the operating point
};

// Parses and validates a JSON case file. Throws CaseFormatError with a line
// number (syntax) or JSON path (schema violation).
CaseDefinition load_case(const std::string& path);
CaseDefinition parse_case(const std::string& json_text,
                          const std::string& origin = "<string>");

// Complex nodal admittance matrix: branches, half shunts at both ends, and
// loads as constant admittance conj(S)/|V|^2 at the operating voltage.
Eigen::MatrixXcd build_admittance_complex(const CaseDefinition& c);

// The same matrix expanded to 2 n_bus x 2 n_bus real blocks [[G,-B],[B,G]]
// with per-bus interleaved (re, im) ordering.
Eigen::MatrixXd build_admittance(const CaseDefinition& c);

// Steady-state internal generator states (delta, omega, e'_d, e'_q per
// machine) consistent with the operating point; omega = 1. Throws ModelError
// when the two-axis residual at the result exceeds 1e-8 (inconsistent
// operating point or supplied P_m / E_f).
Eigen::VectorXd initialize_generators(const CaseDefinition& c);

// Two-axis DAE right-hand sides at an arbitrary point: returns (f, g) where
// f stacks the generator ODEs and g the current mismatch at non-boundary
// buses. Shared by linearize and its finite-difference verification.
std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate_dae(
    const CaseDefinition& c, const Eigen::VectorXd& y,
    const Eigen::VectorXd& v);

// Analytic Jacobians and residuals at the operating point.
LinearizedModel linearize(const CaseDefinition& c);

// Implicit-Euler descriptor assembly:
//   E = [[I - h F_y, -h F_v], [G_y, G_v]],  A = [[I, 0], [0, 0]],
//   Delta = [h (f0 - F_y y0 - F_v v0); G_y y0 + G_v v0 - g0],
//   Q = diag(process noise).
DescriptorSystem discretize(const LinearizedModel& lin,
                            const CaseDefinition& c);

// Measurement candidates in Voltages coordinates: voltage selector rows,
// branch currents I = (y + j b/2) v_from - y v_to, and injected currents as
// admittance row pairs.
std::vector<MeasurementCandidate> build_candidates(const CaseDefinition& c,
                                                   const DescriptorSystem& sys);

// Operating-point algebraic vector (re, im per bus).
Eigen::VectorXd operating_algebraic_vector(const CaseDefinition& c);

}  // namespace pmuplace
