#pragma once

#include "pmuplace/types.hpp"

namespace pmuplace {

struct SteadyStateOptions {
  double tol = 1e-10;    // relative Frobenius residual
  int max_iter = 100000;
};

struct SteadyStateResult {
  Eigen::MatrixXd P_inf;  // converged covariance (last iterate if not)
  double trace = 0.0;     // +inf when not converged
  double condition_number = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// One covariance propagation step
//   g(P) = [E' (Q + A P A')^{-1} E + S]^{-1},
// computed with a Cholesky factorization of the inner ntilde x ntilde matrix
// and of the outer n x n matrix; the result is explicitly symmetrized.
// Throws NumericalError when the inner matrix is not SPD and NotDetectable
// (with the deficiency rank) when the outer matrix is rank deficient.
Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& P,
                             const DescriptorSystem& sys,
                             const Eigen::MatrixXd& S);

// Fixed point of g from P_0 = alpha I, alpha = 1e6 tr(Q)/ntilde. The start
// dominates the fixed point, so iterates decrease monotonically. Divergence
// (trace blow-up or a residual that stops decaying) and max_iter exhaustion
// return converged=false with trace=+inf; NotDetectable propagates.
SteadyStateResult solve_steady_state(const DescriptorSystem& sys,
                                     const Eigen::MatrixXd& S,
                                     const SteadyStateOptions& opts = {});

// sigma_max / sigma_min via SVD; +inf when sigma_min = 0.
double condition_number(const Eigen::MatrixXd& P);

}  // namespace pmuplace
