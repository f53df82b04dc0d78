#pragma once

#include <cstdint>
#include <vector>

#include "pmuplace/riccati.hpp"
#include "pmuplace/types.hpp"

namespace pmuplace {

// Outcome of one subset evaluation. NotDetectable and non-convergence both
// surface as trace = +inf so callers can rank subsets uniformly.
struct SubsetEvaluation {
  std::uint64_t mask = 0;
  double trace = 0.0;
  double condition_number = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Evaluates tr(P_inf(S(mask))) for each mask. The parallel kernel distributes
// masks over OpenMP workers; results land in slots indexed by input position,
// so the output is identical to the serial kernel for any worker count.
// Exceptions other than NotDetectable are rethrown after the loop finishes.
std::vector<SubsetEvaluation> evaluate_subsets_serial(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks,
    const SteadyStateOptions& opts = {});

std::vector<SubsetEvaluation> evaluate_subsets_parallel(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks,
    const SteadyStateOptions& opts = {});

// Dispatches to the parallel kernel unless `force_serial`.
std::vector<SubsetEvaluation> evaluate_subsets(
    const DescriptorSystem& sys,
    const std::vector<MeasurementCandidate>& candidates,
    const std::vector<std::uint64_t>& masks,
    const SteadyStateOptions& opts = {}, bool force_serial = false);

}  // namespace pmuplace
