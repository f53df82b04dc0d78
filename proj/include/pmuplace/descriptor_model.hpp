#pragma once

#include <utility>
#include <vector>

#include "pmuplace/types.hpp"

namespace pmuplace {

// Assimilated sensing precision S(gamma) = sum_i gamma_i C_i' R_i^{-1} C_i.
// R_i is inverted via Cholesky solve. Throws ModelError on dimension
// mismatch or a non-SPD R_i.
Eigen::MatrixXd assemble_precision(
    const std::vector<MeasurementCandidate>& candidates,
    const SensorSelection& selection);

// Change of algebraic coordinates i = Y v (or back). With
// T = blockdiag(I_{n_d}, Y), returns E T^{-1}, A T^{-1}, C_i T^{-1}; Q and
// Delta are untouched. Flips algebraic_coords in whichever direction it
// points. Throws ModelError if Y is singular or has condition number
// >= 1e12. The steady-state covariance maps as T P T'.
std::pair<DescriptorSystem, std::vector<MeasurementCandidate>>
transform_algebraic_coordinates(const DescriptorSystem& sys,
                                const std::vector<MeasurementCandidate>& candidates,
                                const Eigen::MatrixXd& Y);

// Checks dimension bookkeeping, Q symmetry and positive definiteness, and
// full row rank of E. Failures are reported, never thrown.
ValidationReport validate_system(const DescriptorSystem& sys);

}  // namespace pmuplace
