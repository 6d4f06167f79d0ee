#pragma once

#include "tenrec/tensor.hpp"

namespace tenrec {

struct CpModel {
  std::vector<RealMatrix> factors;  // unit-norm columns
  Eigen::VectorXd weights;
};

DenseTensor cp_reconstruct(const CpModel& model, const Dims& dims);

// Simultaneous-diagonalization estimate of the first factor of an order-3
// tensor, refined by alternating least squares. Requires rank <= dims[0], dims[1].
CpModel cp_decompose(const DenseTensor& x, std::size_t rank, std::size_t max_iters = 500,
                     double tol = 1e-14);

// Optimal one-to-one assignment minimizing total cost; result[i] = column of row i.
std::vector<std::size_t> min_cost_assignment(const RealMatrix& cost);

}  // namespace tenrec
