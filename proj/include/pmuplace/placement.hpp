#pragma once

#include <optional>
#include <vector>

#include "pmuplace/riccati.hpp"
#include "pmuplace/types.hpp"

namespace pmuplace {

struct PlacementProblem {
  DescriptorSystem sys;
  std::vector<MeasurementCandidate> candidates;
  double budget = 0.0;
  SteadyStateOptions riccati;

  int M() const { return static_cast<int>(candidates.size()); }
  double total_cost() const;
  double selection_cost(const SensorSelection& sel) const;
};

enum class Method { BranchAndBound, GreedyBestIn, GreedyWorstOut, Exhaustive };

const char* method_name(Method m);

struct BoundCertificate {
  double lower_bound = 0.0;
  double gap = 0.0;  // objective - lower_bound
  long nodes_explored = 0;
};

struct PlacementSolution {
  SensorSelection gamma;
  double objective = 0.0;
  Method method = Method::Exhaustive;
  std::optional<BoundCertificate> certificate;  // branch-and-bound only
  long evaluated = 0;   // distinct subsets sent to the covariance solver
  double wall_time = 0.0;                       // seconds
  bool non_detectable = false;   // no convergent selection was reachable
  bool budget_infeasible = false;  // worst-out could not reach the budget
};

// Feasibility of the paper's MISDP reformulation at (X = P^{-1}, gamma),
// checked numerically: fixed-point residual, the Schur pair [[P, I],[I, X]],
// and the block matrix
//   Theta = [[X + A'Q^{-1}A, 0,  A'Q^{-1}E ],
//            [0,             X,  X         ],
//            [E'Q^{-1}A,     X,  E'Q^{-1}E + S]].
struct CertificateReport {
  double fixed_point_residual = 0.0;
  double schur_pair_min_eig = 0.0;
  double theta_min_eig = 0.0;
  bool passed = false;
};

// Diminishing-returns violation: adding `element` to the superset t2 reduces
// the trace by more than adding it to t1 (by margin > 1e-9).
struct SubmodularityWitness {
  SensorSelection t1, t2;  // t1 strictly contained in t2
  int element = 0;         // outside t2
  double gain_t1 = 0.0, gain_t2 = 0.0;
};

struct BnbOptions {
  double abs_gap = 1e-9;
  // Nodes whose remaining feasible completions number at most this are
  // finished by direct enumeration.
  int enumerate_limit = 512;
};

// Adds the affordable candidate with the smallest resulting trace until the
// budget is exhausted; ties to the lowest index, divergent subsets score
// +inf. If nothing convergent is reachable the best-effort selection carries
// objective +inf and the non_detectable flag.
PlacementSolution greedy_best_in(const PlacementProblem& prob);

// Removes the candidate whose removal leaves the smallest trace until the
// budget is met. If every budget-meeting removal diverges, stops at the last
// convergent set with budget_infeasible set.
PlacementSolution greedy_worst_out(const PlacementProblem& prob);

// Evaluates every feasible subset; ties to the lexicographically smallest
// gamma. Throws RefusedScale when M > max_candidates.
PlacementSolution exhaustive(const PlacementProblem& prob,
                             int max_candidates = 25);

// Exact minimizer via best-first search. A node fixes candidates on/off; its
// lower bound is the trace with every undecided candidate on (adding sensors
// never raises the trace), sharpened by the m-th smallest single-removal
// trace when m more exclusions are inevitable. Incumbent from greedy_best_in.
PlacementSolution branch_and_bound(const PlacementProblem& prob,
                                   const BnbOptions& opts = {});

// Numerical feasibility certificate for the MISDP reformulation at a
// converged steady-state covariance P with precision S.
CertificateReport verify_certificate(const DescriptorSystem& sys,
                                     const Eigen::MatrixXd& S,
                                     const Eigen::MatrixXd& P);

// Searches subset pairs (t1 strictly inside t2) and an element outside t2 for
// a diminishing-returns violation among finite-trace evaluations; returns the
// first one in deterministic order or nullopt. Throws RefusedScale when
// M > max_candidates.
std::optional<SubmodularityWitness> non_submodularity_witness(
    const PlacementProblem& prob, int max_candidates = 12);

}  // namespace pmuplace
