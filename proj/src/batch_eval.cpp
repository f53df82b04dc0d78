#include "pmuplace/batch_eval.hpp"

#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pmuplace/descriptor_model.hpp"
#include "pmuplace/errors.hpp"

namespace pmuplace {

namespace {

SubsetEvaluation evaluate_one(const DescriptorSystem& sys,
                              const std::vector<MeasurementCandidate>& candidates,
                              std::uint64_t mask,
                              const SteadyStateOptions& opts) {
  SensorSelection sel{mask, static_cast<int>(candidates.size())};
  SubsetEvaluation out;
  out.mask = mask;
  try {
    Eigen::MatrixXd S = assemble_precision(candidates, sel);
    SteadyStateResult res = solve_steady_state(sys, S, opts);
    out.trace = res.trace;
    out.condition_number = res.condition_number;
    out.iterations = res.iterations;
    out.converged = res.converged;
  } catch (const NotDetectable&) {
    out.trace = std::numeric_limits<double>::infinity();
    out.condition_number = std::numeric_limits<double>::infinity();
    out.converged = false;
  }
  return out;
}

}  // namespace

std::vector<SubsetEvaluation> evaluate_subsets_serial(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks, const SteadyStateOptions& opts) {
  std::vector<SubsetEvaluation> out(masks.size());
  for (size_t i = 0; i < masks.size(); ++i)
    out[i] = evaluate_one(sys, candidates, masks[i], opts);
  return out;
}

std::vector<SubsetEvaluation> evaluate_subsets_parallel(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks, const SteadyStateOptions& opts) {
  std::vector<SubsetEvaluation> out(masks.size());
  std::exception_ptr failure = nullptr;
  const std::int64_t count = static_cast<std::int64_t>(masks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      out[i] = evaluate_one(sys, candidates, masks[i], opts);
    } catch (...) {
      // First failure wins; the loop must still run to completion because
      // OpenMP regions cannot be exited by exception.
#pragma omp critical(batch_eval_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<SubsetEvaluation> evaluate_subsets(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks, const SteadyStateOptions& opts,
    bool force_serial) {
  if (force_serial) return evaluate_subsets_serial(sys, candidates, masks, opts);
  return evaluate_subsets_parallel(sys, candidates, masks, opts);
}

}  // namespace pmuplace
