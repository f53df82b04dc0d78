#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace pmuplace {

enum class AlgebraicCoords { Voltages, Currents };

// Discrete-time descriptor model  E x_k = A x_{k-1} + Delta + xi_k,
// with E, A of size ntilde x n where ntilde = n_d + n_g <= n = n_d + n_a.
// The gap n - ntilde comes from boundary buses whose balance equations are
// omitted (interfaces to unmodeled regions).
struct DescriptorSystem {
  Eigen::MatrixXd E;
  Eigen::MatrixXd A;
  Eigen::VectorXd delta;  // carried for completeness; unused by covariance math
  Eigen::MatrixXd Q;      // process noise covariance, ntilde x ntilde, SPD
  int n_d = 0;            // differential states
  int n_a = 0;            // algebraic states
  int n_g = 0;            // retained algebraic equations, n_g <= n_a
  std::vector<std::string> state_labels;
  AlgebraicCoords algebraic_coords = AlgebraicCoords::Voltages;

  int n() const { return n_d + n_a; }
  int ntilde() const { return n_d + n_g; }
};

enum class CandidateKind { NodeVoltage, BranchCurrent, NodeInjectedCurrent };

// One PMU candidate: a complex phasor measured as two real rows.
struct MeasurementCandidate {
  std::string id;
  CandidateKind kind = CandidateKind::NodeVoltage;
  Eigen::Matrix<double, 2, Eigen::Dynamic> C;  // 2 x n
  Eigen::Matrix2d R;                           // SPD noise covariance
  double cost = 1.0;
};

// Subset of at most 64 candidates, bit i = candidate i selected.
struct SensorSelection {
  std::uint64_t mask = 0;
  int size = 0;  // M, number of candidates the mask ranges over

  bool test(int i) const { return (mask >> i) & 1u; }
  void set(int i) { mask |= std::uint64_t{1} << i; }
  void reset(int i) { mask &= ~(std::uint64_t{1} << i); }
  int count() const { return __builtin_popcountll(mask); }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (int i = 0; i < size; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }
};

// Lexicographic order on the gamma bitstring read from index 0: at the first
// differing index, the selection with a 0 is smaller. Used for every exact
// tie so all solvers agree on the returned subset.
inline bool lex_less(std::uint64_t a, std::uint64_t b) {
  std::uint64_t diff = a ^ b;
  if (diff == 0) return false;
  std::uint64_t lowest = diff & (~diff + 1);
  return (b & lowest) != 0;
}

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

}  // namespace pmuplace
