#include "pmuplace/descriptor_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "pmuplace/errors.hpp"

namespace pmuplace {

Eigen::MatrixXd assemble_precision(
    const std::vector<MeasurementCandidate>& candidates,
    const SensorSelection& selection) {
  if (selection.size != static_cast<int>(candidates.size()))
    throw ModelError("selection length " + std::to_string(selection.size) +
                     " does not match candidate count " +
                     std::to_string(candidates.size()));
  Eigen::Index n = candidates.empty() ? 0 : candidates.front().C.cols();
  for (const auto& c : candidates)
    if (c.C.cols() != n)
      throw ModelError("candidate " + c.id + " has " +
                       std::to_string(c.C.cols()) + " columns, expected " +
                       std::to_string(n));
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < selection.size; ++i) {
    if (!selection.test(i)) continue;
    const auto& cand = candidates[i];
    Eigen::Matrix2d R = 0.5 * (cand.R + cand.R.transpose());
    Eigen::LLT<Eigen::Matrix2d> llt(R);
    if (llt.info() != Eigen::Success)
      throw ModelError("candidate " + cand.id + " has non-SPD noise covariance");
    // C' R^{-1} C via the factor: S += W' W with W = L^{-1} C.
    Eigen::Matrix<double, 2, Eigen::Dynamic> W =
        llt.matrixL().solve(Eigen::MatrixXd(cand.C));
    S.noalias() += W.transpose() * W;
  }
  return S;
}

std::pair<DescriptorSystem, std::vector<MeasurementCandidate>>
transform_algebraic_coordinates(const DescriptorSystem& sys,
                                const std::vector<MeasurementCandidate>& candidates,
                                const Eigen::MatrixXd& Y) {
  if (Y.rows() != sys.n_a || Y.cols() != sys.n_a)
    throw ModelError("transform matrix must be n_a x n_a");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0 || smax / smin >= 1e12)
    throw ModelError("transform matrix is singular or too ill-conditioned "
                     "(condition number " +
                     std::to_string(smin > 0 ? smax / smin : INFINITY) + ")");

  // Right-multiplying by T^{-1} = blockdiag(I, Y^{-1}) only touches the
  // algebraic column block: B_alg <- B_alg Y^{-1}, solved as Y' X' = B_alg'.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Y.transpose());
  auto apply = [&](Eigen::MatrixXd& B) {
    Eigen::MatrixXd alg = B.rightCols(sys.n_a);
    B.rightCols(sys.n_a) =
        lu.solve(alg.transpose()).transpose();
  };

  DescriptorSystem out = sys;
  apply(out.E);
  apply(out.A);
  out.algebraic_coords = sys.algebraic_coords == AlgebraicCoords::Voltages
                             ? AlgebraicCoords::Currents
                             : AlgebraicCoords::Voltages;
  std::vector<MeasurementCandidate> cands = candidates;
  for (auto& c : cands) {
    Eigen::MatrixXd C = c.C;
    apply(C);
    c.C = C;
  }
  return {std::move(out), std::move(cands)};
}

ValidationReport validate_system(const DescriptorSystem& sys) {
  ValidationReport rep;
  auto add = [&](const std::string& name, bool ok, double measured,
                 const std::string& detail) {
    rep.checks.push_back({name, ok, measured, detail});
  };

  int n = sys.n(), nt = sys.ntilde();
  bool dims = sys.E.rows() == nt && sys.E.cols() == n && sys.A.rows() == nt &&
              sys.A.cols() == n && sys.Q.rows() == nt && sys.Q.cols() == nt &&
              sys.delta.size() == nt && sys.n_g <= sys.n_a && nt <= n;
  add("dimensions", dims, 0.0,
      "n=" + std::to_string(n) + " ntilde=" + std::to_string(nt));
  if (!dims) return rep;

  bool labels = sys.state_labels.empty() ||
                static_cast<int>(sys.state_labels.size()) == n;
  add("state_labels", labels, static_cast<double>(sys.state_labels.size()),
      labels ? "" : "label count differs from n");

  double qnorm = sys.Q.norm();
  double sym = qnorm > 0 ? (sys.Q - sys.Q.transpose()).norm() / qnorm : 0.0;
  add("Q_symmetry", sym <= 1e-12, sym, "relative Frobenius asymmetry");

  Eigen::MatrixXd Qs = 0.5 * (sys.Q + sys.Q.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(Qs);
  add("Q_cholesky", llt.info() == Eigen::Success,
      llt.info() == Eigen::Success ? 1.0 : 0.0,
      llt.info() == Eigen::Success ? "" : "Q is not positive definite");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.E);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  double ratio = smax > 0 ? smin / smax : 0.0;
  add("E_row_rank", ratio > 1e-10, ratio, "sigma_min / sigma_max of E");

  return rep;
}

}  // namespace pmuplace
