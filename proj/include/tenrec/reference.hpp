#pragma once

#include "tenrec/tensor.hpp"

// Serial reference kernels. Same results as the OpenMP kernels in
// tensor.hpp; kept for tests and benchmarks.
namespace tenrec::reference {

DenseTensor mode_product(const DenseTensor& x, const RealMatrix& m, std::size_t mode);
RealMatrix contract_except(const DenseTensor& a, const DenseTensor& b, std::size_t mode);
// Via explicit unfold, matrix product and fold.
DenseTensor mode_product_unfolded(const DenseTensor& x, const RealMatrix& m, std::size_t mode);

}  // namespace tenrec::reference
