#pragma once

#include <random>

#include "tenrec/tensor.hpp"

namespace tenrec {

using Rng = std::mt19937_64;

RealMatrix symmetrize(const RealMatrix& m);

// Symmetric inverse square root. Eigenvalues below rel_floor * trace are
// raised to that floor; a clearly indefinite or zero-trace input throws
// ConditioningError naming `what`.
RealMatrix inv_sqrt_spd(const RealMatrix& m, const std::string& what, double rel_floor = 1e-12);

RealMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);
DenseTensor gaussian_tensor(const Dims& dims, Rng& rng);
RealMatrix random_orthogonal(Eigen::Index n, Rng& rng);
// Random special-linear matrix: det = 1, condition number moderate.
RealMatrix random_special_linear(Eigen::Index n, Rng& rng);

}  // namespace tenrec
