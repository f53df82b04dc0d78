#include "pmuplace/riccati.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

#include "pmuplace/errors.hpp"

namespace pmuplace {

namespace {

constexpr double kTraceCap = 1e250;      // geometric divergence bail-out
constexpr double kGrowthGuard = 100.0;   // growth past the start = divergence
constexpr int kStallWindow = 2048;       // residual decay check interval
constexpr int kStallWarmup = 4096;       // iterations before stall checks
constexpr double kStallRatio = 0.25;     // required decay over one window

// Inverts the outer SPD matrix. The LLT may fail on the first iterates even
// for detectable configurations (P_0 is huge, so the E-term is nearly rank
// deficient); eigenvalues then separate "marginally PSD, keep iterating"
// from genuine rank deficiency.
Eigen::MatrixXd invert_outer(const Eigen::MatrixXd& outer) {
  Eigen::LLT<Eigen::MatrixXd> llt(outer);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd inv = llt.solve(
        Eigen::MatrixXd::Identity(outer.rows(), outer.cols()));
    return 0.5 * (inv + inv.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(outer);
  const auto& ev = es.eigenvalues();
  double emax = std::max(ev(ev.size() - 1), 0.0);
  double thresh = 1e-12 * std::max(1.0, emax);
  int deficiency = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) <= thresh) ++deficiency;
  if (deficiency > 0)
    throw NotDetectable(
        "information matrix E'(Q + A P A')^{-1}E + S is rank deficient "
        "(deficiency rank " + std::to_string(deficiency) + " of " +
        std::to_string(outer.rows()) + ")",
        deficiency);
  Eigen::MatrixXd inv =
      es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& P,
                             const DescriptorSystem& sys,
                             const Eigen::MatrixXd& S) {
  const auto& E = sys.E;
  const auto& A = sys.A;
  Eigen::MatrixXd inner = sys.Q + A * P * A.transpose();
  inner = 0.5 * (inner + inner.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success)
    throw NumericalError("inner matrix Q + A P A' is not positive definite");
  // E'(inner)^{-1}E = W'W with W = L^{-1} E.
  Eigen::MatrixXd W = llt.matrixL().solve(E);
  Eigen::MatrixXd outer = W.transpose() * W + S;
  outer = 0.5 * (outer + outer.transpose());
  return invert_outer(outer);
}

SteadyStateResult solve_steady_state(const DescriptorSystem& sys,
                                     const Eigen::MatrixXd& S,
                                     const SteadyStateOptions& opts) {
  const int n = sys.n();
  const double alpha = 1e6 * sys.Q.trace() / sys.ntilde();
  SteadyStateResult res;
  res.P_inf = alpha * Eigen::MatrixXd::Identity(n, n);

  double window_residual = -1.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::MatrixXd next;
    try {
      next = riccati_step(res.P_inf, sys, S);
    } catch (const NumericalError&) {
      // Geometric growth pushes cond(Q + A P A') past the Cholesky's
      // numerical range long before the trace cap trips. The start
      // dominates every fixed point, so an iterate far above it means
      // divergence, not a malformed input.
      if (res.P_inf.trace() > kGrowthGuard * alpha * n) break;
      throw;
    }
    double num = (next - res.P_inf).norm();
    double den = next.norm();
    res.residual = den > 0 ? num / den : 0.0;
    res.P_inf = std::move(next);
    res.iterations = it;

    double tr = res.P_inf.trace();
    if (!std::isfinite(tr) || tr > kTraceCap) break;  // diverging
    if (res.residual < opts.tol) {
      res.converged = true;
      break;
    }
    // A residual that no longer decays geometrically signals the linear
    // growth of an undetectable neutral mode; waiting for max_iter would
    // cost seconds per subset in the placement loops.
    if (it % kStallWindow == 0 && it >= kStallWarmup && res.residual > 1e-12) {
      if (window_residual > 0 && res.residual > kStallRatio * window_residual)
        break;
      window_residual = res.residual;
    }
  }

  if (res.converged) {
    res.trace = res.P_inf.trace();
    res.condition_number = condition_number(res.P_inf);
  } else {
    res.trace = std::numeric_limits<double>::infinity();
    res.condition_number = std::numeric_limits<double>::infinity();
  }
  return res;
}

double condition_number(const Eigen::MatrixXd& P) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

}  // namespace pmuplace
