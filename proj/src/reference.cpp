#include "tenrec/reference.hpp"

namespace tenrec::reference {

namespace {

void outer_inner(const Dims& dims, std::size_t mode, std::size_t& outer, std::size_t& inner) {
  outer = inner = 1;
  for (std::size_t k = 0; k < mode; ++k) outer *= dims[k];
  for (std::size_t k = mode + 1; k < dims.size(); ++k) inner *= dims[k];
}

}  // namespace

DenseTensor mode_product(const DenseTensor& x, const RealMatrix& m, std::size_t mode) {
  if (mode >= x.order() || static_cast<std::size_t>(m.cols()) != x.dim(mode))
    throw ShapeError("reference::mode_product: shape mismatch");
  Dims out_dims = x.dims();
  out_dims[mode] = m.rows();
  DenseTensor y(out_dims);
  std::size_t outer, inner;
  outer_inner(x.dims(), mode, outer, inner);
  const std::size_t n = x.dim(mode), rows = m.rows();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) {
        const double c = m(r, j);
        for (std::size_t in = 0; in < inner; ++in)
          y[(o * rows + r) * inner + in] += c * x[(o * n + j) * inner + in];
      }
  return y;
}

RealMatrix contract_except(const DenseTensor& a, const DenseTensor& b, std::size_t mode) {
  if (mode >= a.order() || a.order() != b.order())
    throw ShapeError("reference::contract_except: shape mismatch");
  std::size_t outer, inner;
  outer_inner(a.dims(), mode, outer, inner);
  const std::size_t na = a.dim(mode), nb = b.dim(mode);
  RealMatrix c = RealMatrix::Zero(na, nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double acc = 0.0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in)
          acc += a[(o * na + i) * inner + in] * b[(o * nb + j) * inner + in];
      c(i, j) = acc;
    }
  return c;
}

DenseTensor mode_product_unfolded(const DenseTensor& x, const RealMatrix& m, std::size_t mode) {
  Dims out_dims = x.dims();
  out_dims[mode] = m.rows();
  return fold(m * unfold(x, mode), mode, out_dims);
}

}  // namespace tenrec::reference
